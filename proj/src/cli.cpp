#include "pipect/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>

#include "pipect/array_io.hpp"
#include "pipect/diagnostics.hpp"
#include "pipect/png.hpp"
#include "pipect/posterior.hpp"
#include "pipect/solver.hpp"

namespace fs = std::filesystem;

namespace pipect {

namespace {

nlohmann::json load_json_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ConfigError(std::string("cannot open ") + what + ": " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(what) + " '" + path + "': " + e.what());
    }
    return j;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
}

void prepare_out_dir(const RunConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    write_json_file(out_path(cfg, "resolved_config.json"), run_config_to_json(cfg));
}

struct Problem {
    ImageGrid grid;
    ImageGrid fine_grid;
    ScanGeometry full_geometry;
    PipeSpec pipe;
    AttenuationTable table;
    int erosion_px;
};

Problem setup(const RunConfig& cfg) {
    std::vector<std::string> warnings;
    auto materials = load_materials(cfg.materials_file);
    AttenuationTable table = build_attenuation_table(materials, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

    PipeSpec pipe = cfg.pipe_inline ? pipe_spec_from_json(*cfg.pipe_inline)
                                    : load_pipe_spec(cfg.pipe_file);

    if (cfg.fine_factor < 1)
        throw ConfigError("fine_factor must be >= 1");

    return Problem{
        build_image_grid(cfg.geometry),
        ImageGrid(cfg.geometry.grid_n * cfg.fine_factor, cfg.geometry.grid_size_cm),
        build_scan_geometry(cfg.geometry),
        std::move(pipe),
        std::move(table),
        cfg.erosion_px ? *cfg.erosion_px : default_erosion_px(cfg.geometry.grid_n)};
}

PriorDeltas resolve_deltas(const RunConfig& cfg) {
    PriorDeltas deltas;
    deltas.delta0 = cfg.delta0 ? *cfg.delta0 : default_delta0(cfg.angle_fraction);
    deltas.region = cfg.region_deltas;
    return deltas;
}

struct LoadedSinogram {
    Sinogram sinogram;
    double lambda;
};

/// Reads the sinogram produced by `simulate` (or supplied externally) and
/// checks it against the configured acquisition via the geometry hash.
LoadedSinogram load_sinogram(const RunConfig& cfg, const Problem& problem) {
    const std::string path = cfg.sinogram_file.empty()
                                 ? out_path(cfg, "sinogram.arr")
                                 : cfg.sinogram_file;
    ArrayFile file = read_array(path);
    if (file.shape.size() != 2)
        throw ConfigError("sinogram file '" + path + "': expected a 2D array");

    const ScanGeometry geometry =
        subsample_geometry(problem.full_geometry, cfg.angle_fraction);
    if (file.shape[0] != geometry.n_angles || file.shape[1] != geometry.n_detectors)
        throw ConfigError("sinogram file '" + path + "': shape [" +
                          std::to_string(file.shape[0]) + "," +
                          std::to_string(file.shape[1]) +
                          "] does not match the configured acquisition");
    const std::string expected_hash = geometry_hash_hex(geometry);
    const std::string found_hash = file.meta.value("geometry_hash", "");
    if (found_hash != expected_hash)
        throw ConfigError("sinogram file '" + path + "': geometry hash " + found_hash +
                          " does not match configured acquisition " + expected_hash);

    double lambda = std::numeric_limits<double>::quiet_NaN();
    if (cfg.lambda_override) {
        lambda = *cfg.lambda_override;
    } else if (file.meta.contains("lambda") && file.meta.at("lambda").is_number()) {
        lambda = file.meta.at("lambda").get<double>();
    } else {
        const fs::path lambda_path = fs::path(path).parent_path() / "lambda.json";
        if (fs::exists(lambda_path)) {
            // lambda is the string "inf" for noiseless simulations
            const auto lam = load_json_file(lambda_path.string(), "lambda file");
            if (lam.contains("lambda") && lam.at("lambda").is_number())
                lambda = lam.at("lambda").get<double>();
            else
                lambda = std::numeric_limits<double>::infinity();
        }
    }

    Sinogram sino{geometry,
                  Eigen::Map<const Eigen::VectorXd>(file.payload.data(),
                                                    static_cast<Eigen::Index>(
                                                        file.payload.size()))};
    return LoadedSinogram{std::move(sino), lambda};
}

Image load_truth(const RunConfig& cfg, const ImageGrid& grid) {
    const std::string path = cfg.truth_file.empty()
                                 ? out_path(cfg, "truth_downsampled.arr")
                                 : cfg.truth_file;
    ArrayFile file = read_array(path);
    if (file.shape != std::vector<std::int64_t>{grid.n_side(), grid.n_side()})
        throw ConfigError("truth file '" + path +
                          "': shape does not match the reconstruction grid");
    return Image{grid, Eigen::Map<const Eigen::VectorXd>(
                           file.payload.data(),
                           static_cast<Eigen::Index>(file.payload.size()))};
}

nlohmann::json image_meta(const ImageGrid& grid, const char* kind) {
    return {{"units", "cm^-1"},
            {"layout", "image-col-major"},
            {"kind", kind},
            {"grid_n", grid.n_side()},
            {"grid_size_cm", grid.physical_size()}};
}

double finite_lambda_or_throw(double lambda) {
    if (!std::isfinite(lambda) || !(lambda > 0.0))
        throw ConfigError("no usable noise precision: pass --lambda or provide "
                          "lambda.json / sinogram meta (noiseless data has "
                          "infinite precision)");
    return lambda;
}

/// Forward operator on the reconstruction grid, cached or on-the-fly.
struct ForwardOp {
    std::unique_ptr<SystemMatrix> cache;
    LinearOperator op;
};

ForwardOp make_forward_op(const RunConfig& cfg, const ImageGrid& grid,
                          const ScanGeometry& geometry) {
    ForwardOp fwd;
    if (cfg.cache_system_matrix) {
        fwd.cache = std::make_unique<SystemMatrix>(grid, geometry);
        fwd.op = fwd.cache->as_operator();
    } else {
        fwd.op = projector_operator(grid, geometry);
    }
    return fwd;
}

}  // namespace

ReconMethod recon_method_from_string(const std::string& s) {
    if (s == "deterministic") return ReconMethod::Deterministic;
    if (s == "map") return ReconMethod::Map;
    throw ConfigError("unknown method '" + s + "' (expected deterministic or map)");
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "geometry") cfg.geometry = geometry_config_from_json(value);
        else if (key == "fine_factor") cfg.fine_factor = value.get<int>();
        else if (key == "materials_file") cfg.materials_file = value.get<std::string>();
        else if (key == "pipe_file") cfg.pipe_file = value.get<std::string>();
        else if (key == "pipe") cfg.pipe_inline = value;
        else if (key == "prior") cfg.prior = value.get<std::string>();
        else if (key == "delta0") cfg.delta0 = value.get<double>();
        else if (key == "region_deltas") {
            cfg.region_deltas.clear();
            for (const auto& [region, delta] : value.items())
                cfg.region_deltas[std::stoi(region)] = delta.get<double>();
        } else if (key == "erosion_px") cfg.erosion_px = value.get<int>();
        else if (key == "noise_rel") cfg.noise_rel = value.get<double>();
        else if (key == "angle_fraction") cfg.angle_fraction = value.get<double>();
        else if (key == "n_samples") cfg.n_samples = value.get<int>();
        else if (key == "burn_in") cfg.burn_in = value.get<int>();
        else if (key == "inner_iters") cfg.inner_iters = value.get<int>();
        else if (key == "method") cfg.method = value.get<std::string>();
        else if (key == "stopping") cfg.stopping = value.get<std::string>();
        else if (key == "tau") cfg.tau = value.get<double>();
        else if (key == "map_tol") cfg.map_tol = value.get<double>();
        else if (key == "map_max_iter") cfg.map_max_iter = value.get<int>();
        else if (key == "det_max_iter") cfg.det_max_iter = value.get<int>();
        else if (key == "lambda") cfg.lambda_override = value.get<double>();
        else if (key == "sinogram_file") cfg.sinogram_file = value.get<std::string>();
        else if (key == "truth_file") cfg.truth_file = value.get<std::string>();
        else if (key == "delta0_grid") cfg.delta0_grid = value.get<std::vector<double>>();
        else if (key == "cache_system_matrix") cfg.cache_system_matrix = value.get<bool>();
        else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
        else if (key == "out_dir") cfg.out_dir = value.get<std::string>();
        else throw ConfigError("run config: unknown key '" + key + "'");
    }
    if (!(cfg.angle_fraction > 0.0) || cfg.angle_fraction > 1.0)
        throw ConfigError("run config: angle_fraction must be in (0, 1]");
    if (cfg.noise_rel < 0.0)
        throw ConfigError("run config: noise_rel must be >= 0");
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return run_config_from_json(load_json_file(path, "config file"));
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json deltas = nlohmann::json::object();
    for (const auto& [region, delta] : cfg.region_deltas)
        deltas[std::to_string(region)] = delta;

    nlohmann::json j{{"geometry", geometry_config_to_json(cfg.geometry)},
                     {"fine_factor", cfg.fine_factor},
                     {"materials_file", cfg.materials_file},
                     {"prior", cfg.prior},
                     {"region_deltas", deltas},
                     {"noise_rel", cfg.noise_rel},
                     {"angle_fraction", cfg.angle_fraction},
                     {"n_samples", cfg.n_samples},
                     {"burn_in", cfg.resolved_burn_in()},
                     {"inner_iters", cfg.inner_iters},
                     {"method", cfg.method},
                     {"stopping", cfg.stopping},
                     {"tau", cfg.tau},
                     {"map_tol", cfg.map_tol},
                     {"map_max_iter", cfg.map_max_iter},
                     {"det_max_iter", cfg.det_max_iter},
                     {"delta0_grid", cfg.delta0_grid},
                     {"cache_system_matrix", cfg.cache_system_matrix},
                     {"seed", cfg.seed},
                     {"out_dir", cfg.out_dir}};
    if (cfg.pipe_inline) j["pipe"] = *cfg.pipe_inline;
    else j["pipe_file"] = cfg.pipe_file;
    j["delta0"] = cfg.delta0 ? nlohmann::json(*cfg.delta0)
                             : nlohmann::json(default_delta0(cfg.angle_fraction));
    j["erosion_px"] = cfg.erosion_px ? *cfg.erosion_px
                                     : default_erosion_px(cfg.geometry.grid_n);
    if (cfg.lambda_override) j["lambda"] = *cfg.lambda_override;
    if (!cfg.sinogram_file.empty()) j["sinogram_file"] = cfg.sinogram_file;
    if (!cfg.truth_file.empty()) j["truth_file"] = cfg.truth_file;
    return j;
}

void cmd_phantom(const RunConfig& cfg) {
    Problem problem = setup(cfg);
    prepare_out_dir(cfg);

    const Image phantom = build_phantom(problem.pipe, problem.fine_grid, problem.table);
    const Image truth = downsample(phantom, problem.grid.n_side());
    const MaskSet masks = build_masks(problem.pipe, problem.grid, problem.erosion_px);

    const int nf = problem.fine_grid.n_side();
    write_array(out_path(cfg, "phantom.arr"), {nf, nf}, phantom.values.data(),
                phantom.values.size(), image_meta(problem.fine_grid, "phantom"));
    const int n = problem.grid.n_side();
    write_array(out_path(cfg, "truth_downsampled.arr"), {n, n}, truth.values.data(),
                truth.values.size(), image_meta(problem.grid, "truth"));

    std::vector<double> mask_payload;
    mask_payload.reserve(static_cast<std::size_t>(masks.p) * masks.n);
    for (int region = 1; region <= masks.p; ++region) {
        const Eigen::VectorXd b = masks.binary(region);
        mask_payload.insert(mask_payload.end(), b.data(), b.data() + b.size());
    }
    nlohmann::json mask_meta{{"layout", "masks-col-major"},
                             {"kind", "masks"},
                             {"regions", masks.p},
                             {"erosion_px", problem.erosion_px},
                             {"grid_n", n}};
    write_array(out_path(cfg, "masks.arr"), {masks.p, n, n}, mask_payload.data(),
                static_cast<std::int64_t>(mask_payload.size()), mask_meta);

    std::cout << "phantom: " << nf << "x" << nf << " fine grid, " << masks.p
              << " regions, truth " << n << "x" << n << "\n";
}

void cmd_simulate(const RunConfig& cfg) {
    Problem problem = setup(cfg);
    prepare_out_dir(cfg);

    SimulatedSinogram sim =
        simulate_sinogram(problem.pipe, problem.fine_grid, problem.full_geometry,
                          problem.table, cfg.noise_rel, cfg.seed);
    const Sinogram sub = subsample_angles(sim.sinogram, cfg.angle_fraction);
    const std::string hash = geometry_hash_hex(sub.geometry);

    nlohmann::json meta{{"units", "absorbance"},
                        {"layout", "sino-row-major"},
                        {"kind", "sinogram"},
                        {"geometry_hash", hash},
                        {"noise_rel", cfg.noise_rel},
                        {"seed", cfg.seed}};
    if (std::isfinite(sim.lambda)) meta["lambda"] = sim.lambda;
    write_array(out_path(cfg, "sinogram.arr"),
                {sub.geometry.n_angles, sub.geometry.n_detectors}, sub.values.data(),
                sub.values.size(), meta);

    nlohmann::json lam{{"lambda", sim.lambda},
                       {"sigma", sim.sigma},
                       {"noise_rel", cfg.noise_rel},
                       {"realized_noise_rel", sim.realized_noise_rel},
                       {"m", sub.geometry.m()},
                       {"geometry_hash", hash}};
    if (!std::isfinite(sim.lambda)) lam["lambda"] = "inf";
    write_json_file(out_path(cfg, "lambda.json"), lam);

    std::cout << "simulate: " << sub.geometry.n_angles << " angles x "
              << sub.geometry.n_detectors << " detectors, lambda = " << sim.lambda
              << ", realized noise " << sim.realized_noise_rel << "\n";
}

void cmd_reconstruct(const RunConfig& cfg, ReconMethod method) {
    Problem problem = setup(cfg);
    prepare_out_dir(cfg);
    LoadedSinogram data = load_sinogram(cfg, problem);
    ForwardOp fwd = make_forward_op(cfg, problem.grid, data.sinogram.geometry);

    nlohmann::json report;
    Image recon = zero_image(problem.grid);

    if (method == ReconMethod::Deterministic) {
        StoppingRule rule = DiscrepancyRule{0.0, cfg.tau};
        if (cfg.stopping == "oracle") {
            rule = OracleRule{load_truth(cfg, problem.grid).values};
        } else if (cfg.stopping == "discrepancy") {
            rule = DiscrepancyRule{finite_lambda_or_throw(data.lambda), cfg.tau};
        } else {
            throw ConfigError("unknown stopping rule '" + cfg.stopping + "'");
        }
        SemiconvergentResult result = cgls_semiconvergent(
            fwd.op, data.sinogram.values, rule, cfg.det_max_iter);
        recon.values = std::move(result.x);
        report = {{"method", "deterministic"},
                  {"stopping", cfg.stopping},
                  {"iterations", result.report.iterations_run},
                  {"stopped_at", result.stopped_at},
                  {"rule_triggered", result.rule_triggered},
                  {"metric", result.metric}};
    } else {
        const double lambda = finite_lambda_or_throw(data.lambda);
        const MaskSet masks = build_masks(problem.pipe, problem.grid, problem.erosion_px);
        const StructuralPrior prior =
            assemble_sgp(prior_kind_from_string(cfg.prior), problem.grid, masks,
                         problem.table, resolve_deltas(cfg),
                         problem.pipe.background_region);
        const PosteriorModel model = assemble_posterior(
            fwd.op, problem.grid, data.sinogram, lambda, prior);
        MapResult map = map_estimate(model, cfg.map_tol, cfg.map_max_iter);
        if (!map.report.converged)
            std::cerr << "warning: MAP solve hit the iteration limit; result is "
                         "partial\n";
        recon.values = std::move(map.estimate.values);
        report = {{"method", "map"},
                  {"prior", prior.name()},
                  {"delta0", resolve_deltas(cfg).delta0},
                  {"lambda", lambda},
                  {"q", model.q()},
                  {"iterations", map.report.iterations_run},
                  {"residual", map.report.residual_history.empty() ||
                                       map.report.initial_ne_residual == 0.0
                                   ? 0.0
                                   : map.report.residual_history.back() /
                                         map.report.initial_ne_residual},
                  {"converged", map.report.converged}};
    }

    // RMSE against the synthetic truth when it is available.
    try {
        const Image truth = load_truth(cfg, problem.grid);
        report["rmse"] = rmse(recon, truth);
    } catch (const ConfigError&) {
    }

    write_array(out_path(cfg, "recon.arr"),
                {problem.grid.n_side(), problem.grid.n_side()}, recon.values.data(),
                recon.values.size(), image_meta(problem.grid, "reconstruction"));
    write_json_file(out_path(cfg, "report.json"), report);

    std::cout << "reconstruct: " << report.dump() << "\n";
}

void cmd_sample(const RunConfig& cfg) {
    Problem problem = setup(cfg);
    prepare_out_dir(cfg);
    LoadedSinogram data = load_sinogram(cfg, problem);
    const double lambda = finite_lambda_or_throw(data.lambda);
    ForwardOp fwd = make_forward_op(cfg, problem.grid, data.sinogram.geometry);

    const MaskSet masks = build_masks(problem.pipe, problem.grid, problem.erosion_px);
    const StructuralPrior prior =
        assemble_sgp(prior_kind_from_string(cfg.prior), problem.grid, masks,
                     problem.table, resolve_deltas(cfg),
                     problem.pipe.background_region);
    const PosteriorModel model =
        assemble_posterior(fwd.op, problem.grid, data.sinogram, lambda, prior);

    const int burn_in = cfg.resolved_burn_in();
    SampleSet samples = run_chain(model, cfg.n_samples, burn_in, cfg.inner_iters,
                                  cfg.seed, zero_image(problem.grid));

    const Image mean = sample_mean(samples);
    const Image iqr = interquantile_range(samples);

    const int n = problem.grid.n_side();
    write_array(out_path(cfg, "mean.arr"), {n, n}, mean.values.data(),
                mean.values.size(), image_meta(problem.grid, "posterior-mean"));
    write_array(out_path(cfg, "interquantile.arr"), {n, n}, iqr.values.data(),
                iqr.values.size(), image_meta(problem.grid, "interquantile-95"));

    const ChainDiagnostics diag =
        chain_diagnostics(samples, std::min<int>(100, static_cast<int>(model.n())),
                          cfg.seed);
    std::ofstream iact_csv(out_path(cfg, "iact.csv"), std::ios::trunc);
    iact_csv << "pixel,iact\n";
    for (auto j : diag.pixel_sample) {
        char line[64];
        std::snprintf(line, sizeof(line), "%d,%.17g\n", j, diag.iact_values.at(j));
        iact_csv << line;
    }

    double res_mean = 0.0;
    for (double r : samples.residuals) res_mean += r;
    res_mean /= static_cast<double>(samples.residuals.size());
    nlohmann::json meta{{"n_samples", cfg.n_samples},
                        {"burn_in", burn_in},
                        {"retained", samples.retained()},
                        {"inner_iters", cfg.inner_iters},
                        {"seed", cfg.seed},
                        {"q", model.q()},
                        {"prior", prior.name()},
                        {"delta0", resolve_deltas(cfg).delta0},
                        {"lambda", lambda},
                        {"residual_first", samples.residuals.front()},
                        {"residual_last", samples.residuals.back()},
                        {"residual_mean", res_mean}};
    write_json_file(out_path(cfg, "samples_meta.json"), meta);

    std::cout << "sample: retained " << samples.retained() << " of " << cfg.n_samples
              << ", mean residual " << res_mean << "\n";
}

void cmd_sweep(const RunConfig& cfg) {
    Problem problem = setup(cfg);
    prepare_out_dir(cfg);
    LoadedSinogram data = load_sinogram(cfg, problem);

    ForwardOp fwd = make_forward_op(cfg, problem.grid, data.sinogram.geometry);
    const SweepProblem sweep{problem.grid,
                             fwd.op,
                             data.sinogram,
                             finite_lambda_or_throw(data.lambda),
                             prior_kind_from_string(cfg.prior),
                             build_masks(problem.pipe, problem.grid, problem.erosion_px),
                             problem.table,
                             cfg.region_deltas,
                             problem.pipe.background_region,
                             cfg.map_tol,
                             cfg.map_max_iter};

    const Image truth = load_truth(cfg, problem.grid);
    const SweepResult result = sweep_delta0(sweep, cfg.delta0_grid, truth);

    std::ofstream csv(out_path(cfg, "sweep.csv"), std::ios::trunc);
    csv << "delta0,rmse,converged\n";
    for (std::size_t i = 0; i < result.grid.size(); ++i) {
        char line[96];
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%d\n", result.grid[i],
                      result.rmse_per_delta[i], result.converged[i] ? 1 : 0);
        csv << line;
    }

    std::cout << "sweep: best delta0 = " << result.best_delta << "\n";
}

void cmd_export_png(const std::string& array_path, const std::string& png_path,
                    double range_lo, double range_hi, std::optional<int> index) {
    if (!(range_hi > range_lo))
        throw ConfigError("export-png: color range must have hi > lo");

    ArrayFile file = read_array(array_path);
    std::size_t offset = 0;
    std::int64_t h = 0, w = 0;
    if (file.shape.size() == 2) {
        h = file.shape[0];
        w = file.shape[1];
    } else if (file.shape.size() == 3) {
        if (!index)
            throw ConfigError("export-png: 3D array needs --index to pick a slab");
        if (*index < 0 || *index >= file.shape[0])
            throw ConfigError("export-png: index out of range");
        h = file.shape[1];
        w = file.shape[2];
        offset = static_cast<std::size_t>(*index) * h * w;
    } else {
        throw ConfigError("export-png: only 2D (or indexed 3D) arrays supported");
    }

    const bool row_major = file.meta.value("layout", "image-col-major") ==
                           std::string("sino-row-major");
    const double scale = 255.0 / (range_hi - range_lo);
    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(h) * w);
    for (std::int64_t r = 0; r < h; ++r) {
        for (std::int64_t c = 0; c < w; ++c) {
            const double v = row_major ? file.payload[offset + r * w + c]
                                       : file.payload[offset + c * h + r];
            const double clamped = std::clamp((v - range_lo) * scale, 0.0, 255.0);
            pixels[static_cast<std::size_t>(r) * w + c] =
                static_cast<std::uint8_t>(std::lround(clamped));
        }
    }
    write_gray8_png(png_path, static_cast<int>(w), static_cast<int>(h), pixels);
    std::cout << "export-png: " << png_path << " (" << w << "x" << h << ")\n";
}

}  // namespace pipect
