#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pipect/geometry.hpp"
#include "pipect/phantom.hpp"
#include "pipect/priors.hpp"

namespace pipect {

enum class ReconMethod { Deterministic, Map };

ReconMethod recon_method_from_string(const std::string& s);

/// Resolved run configuration. Precedence: CLI flags override config-file
/// keys, which override these built-in defaults. The resolved config is
/// written to the output directory by every command.
struct RunConfig {
    GeometryConfig geometry;
    int fine_factor = 2;

    std::string materials_file = "data/materials.json";
    std::string pipe_file = "data/pipe_default.json";
    std::optional<nlohmann::json> pipe_inline;  // "pipe" object in the config

    std::string prior = "sgp-f";
    std::optional<double> delta0;  // unset -> default_delta0(angle_fraction)
    std::map<int, double> region_deltas = {{1, 1000.0}, {2, 1000.0}, {3, 1000.0},
                                           {4, 1000.0}, {5, 500.0}};
    std::optional<int> erosion_px;  // unset -> default_erosion_px(grid_n)

    double noise_rel = 0.02;
    double angle_fraction = 1.0;

    int n_samples = 3000;
    int burn_in = -1;  // -1 -> n_samples / 3
    int inner_iters = 10;

    std::string method = "map";
    std::string stopping = "discrepancy";  // deterministic: discrepancy | oracle
    double tau = 1.02;
    double map_tol = 1e-8;
    int map_max_iter = 1000;
    int det_max_iter = 400;

    std::optional<double> lambda_override;
    std::string sinogram_file;  // default: <out>/sinogram.arr
    std::string truth_file;     // default: <out>/truth_downsampled.arr
    std::vector<double> delta0_grid = {100.0, 316.0, 1000.0, 3162.0, 10000.0};

    bool cache_system_matrix = true;

    std::uint64_t seed = 1;
    std::string out_dir = "out";

    int resolved_burn_in() const { return burn_in >= 0 ? burn_in : n_samples / 3; }
};

/// Overlays config-file keys onto the defaults. Unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_to_json(const RunConfig& cfg);

/// Writes phantom.arr (fine grid), truth_downsampled.arr (reconstruction
/// grid, area-averaged) and masks.arr.
void cmd_phantom(const RunConfig& cfg);

/// Writes sinogram.arr (after angle subsampling) and lambda.json.
void cmd_simulate(const RunConfig& cfg);

/// Writes recon.arr and report.json. Accepts any sinogram.arr whose
/// geometry hash matches the configured acquisition.
void cmd_reconstruct(const RunConfig& cfg, ReconMethod method);

/// Writes mean.arr, interquantile.arr, samples_meta.json and iact.csv.
void cmd_sample(const RunConfig& cfg);

/// Writes sweep.csv (delta0, rmse, converged) over the config's delta0 grid.
void cmd_sweep(const RunConfig& cfg);

/// Renders a 2D .arr (or one slab of a 3D one, via `index`) to an 8-bit
/// grayscale PNG with the given clamped color range.
void cmd_export_png(const std::string& array_path, const std::string& png_path,
                    double range_lo = -0.05, double range_hi = 0.20,
                    std::optional<int> index = std::nullopt);

}  // namespace pipect
