#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pipect/cli.hpp"
#include "pipect/errors.hpp"

namespace {

// Exit codes: 0 success, 2 configuration error, 3 numerical failure.
constexpr int kConfigExit = 2;
constexpr int kNumericalExit = 3;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pipect: Bayesian CT reconstruction of layered pipes"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    double angle_fraction = 0.0;
    std::string prior;
    std::string method;
    double delta0 = 0.0;
    double noise_rel = 0.0;
    int grid_n = 0;
    std::string materials_file, pipe_file, sinogram_file, truth_file, stopping;
    double lambda = 0.0;
    int n_samples = 0, burn_in = -1, inner_iters = 0;
    std::vector<double> delta0_grid;

    auto* opt_config = app.add_option("--config", config_path, "JSON config file");
    auto* opt_seed = app.add_option("--seed", seed, "random seed");
    auto* opt_out = app.add_option("--out", out_dir, "output directory");
    auto* opt_fraction =
        app.add_option("--angle-fraction", angle_fraction, "kept view-angle fraction");
    auto* opt_prior = app.add_option("--prior", prior, "gmrf | sgp-bg | sgp-f");
    auto* opt_method = app.add_option("--method", method, "deterministic | map");
    auto* opt_delta0 = app.add_option("--delta0", delta0, "GMRF precision");
    auto* opt_noise = app.add_option("--noise-rel", noise_rel, "relative noise level");
    auto* opt_grid_n = app.add_option("--grid-n", grid_n, "reconstruction grid size");
    auto* opt_materials = app.add_option("--materials", materials_file, "materials JSON");
    auto* opt_pipe = app.add_option("--pipe", pipe_file, "pipe spec JSON");
    auto* opt_sino = app.add_option("--sinogram", sinogram_file, "sinogram .arr file");
    auto* opt_truth = app.add_option("--truth", truth_file, "ground-truth .arr file");
    auto* opt_lambda = app.add_option("--lambda", lambda, "noise precision override");
    auto* opt_stopping =
        app.add_option("--stopping", stopping, "discrepancy | oracle (deterministic)");
    auto* opt_n_samples = app.add_option("--n-samples", n_samples, "chain length");
    auto* opt_burn_in = app.add_option("--burn-in", burn_in, "discarded samples");
    auto* opt_inner =
        app.add_option("--inner-iters", inner_iters, "CGLS iterations per sample");
    auto* opt_grid =
        app.add_option("--delta0-grid", delta0_grid, "sweep grid")->delimiter(',');

    auto* sc_phantom = app.add_subcommand("phantom", "rasterize phantom, truth, masks");
    auto* sc_simulate = app.add_subcommand("simulate", "simulate a noisy sinogram");
    auto* sc_reconstruct =
        app.add_subcommand("reconstruct", "deterministic or MAP reconstruction");
    auto* sc_sample = app.add_subcommand("sample", "posterior sampling with diagnostics");
    auto* sc_sweep = app.add_subcommand("sweep", "delta0 parameter sweep");

    auto* sc_export = app.add_subcommand("export-png", "render an .arr to PNG");
    std::string export_in, export_out;
    std::vector<double> export_range = {-0.05, 0.20};
    std::optional<int> export_index;
    int export_index_val = 0;
    sc_export->add_option("input", export_in, "input .arr")->required();
    sc_export->add_option("output", export_out, "output .png")->required();
    auto* opt_range = sc_export
                          ->add_option("--range", export_range,
                                       "color range lo,hi (default -0.05,0.20)")
                          ->delimiter(',')
                          ->expected(2);
    auto* opt_index = sc_export->add_option("--index", export_index_val,
                                            "slab index for 3D arrays");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigExit;
    }

    try {
        if (sc_export->parsed()) {
            if (opt_index->count()) export_index = export_index_val;
            pipect::cmd_export_png(export_in, export_out, export_range[0],
                                   export_range[1], export_index);
            return 0;
        }

        pipect::RunConfig cfg;
        if (opt_config->count()) cfg = pipect::load_run_config(config_path);

        // CLI flags override config-file keys, which override the defaults.
        if (opt_seed->count()) cfg.seed = seed;
        if (opt_out->count()) cfg.out_dir = out_dir;
        if (opt_fraction->count()) cfg.angle_fraction = angle_fraction;
        if (opt_prior->count()) cfg.prior = prior;
        if (opt_method->count()) cfg.method = method;
        if (opt_delta0->count()) cfg.delta0 = delta0;
        if (opt_noise->count()) cfg.noise_rel = noise_rel;
        if (opt_grid_n->count()) cfg.geometry.grid_n = grid_n;
        if (opt_materials->count()) cfg.materials_file = materials_file;
        if (opt_pipe->count()) {
            cfg.pipe_file = pipe_file;
            cfg.pipe_inline.reset();
        }
        if (opt_sino->count()) cfg.sinogram_file = sinogram_file;
        if (opt_truth->count()) cfg.truth_file = truth_file;
        if (opt_lambda->count()) cfg.lambda_override = lambda;
        if (opt_stopping->count()) cfg.stopping = stopping;
        if (opt_n_samples->count()) cfg.n_samples = n_samples;
        if (opt_burn_in->count()) cfg.burn_in = burn_in;
        if (opt_inner->count()) cfg.inner_iters = inner_iters;
        if (opt_grid->count()) cfg.delta0_grid = delta0_grid;
        if (!(cfg.angle_fraction > 0.0) || cfg.angle_fraction > 1.0)
            throw pipect::ConfigError("angle fraction must be in (0, 1]");

        if (sc_phantom->parsed()) {
            pipect::cmd_phantom(cfg);
        } else if (sc_simulate->parsed()) {
            pipect::cmd_simulate(cfg);
        } else if (sc_reconstruct->parsed()) {
            pipect::cmd_reconstruct(cfg, pipect::recon_method_from_string(cfg.method));
        } else if (sc_sample->parsed()) {
            pipect::cmd_sample(cfg);
        } else if (sc_sweep->parsed()) {
            pipect::cmd_sweep(cfg);
        }
        return 0;
    } catch (const pipect::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericalExit;
    } catch (const pipect::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    } catch (const pipect::DimensionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    } catch (const std::out_of_range& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumericalExit;
    }
}
