#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "pipect/linop.hpp"
#include "pipect/materials.hpp"
#include "pipect/phantom.hpp"
#include "pipect/posterior.hpp"
#include "pipect/priors.hpp"
#include "pipect/projector.hpp"

namespace pipect {

/// Root-mean-square error sqrt(sum (x_j - t_j)^2 / n); grids must match.
double rmse(const Image& x, const Image& truth);

Image sample_mean(const SampleSet& samples);

/// Per-pixel empirical quantiles, linear interpolation between order
/// statistics (type-7 convention). Needs at least 2 samples.
std::vector<Image> pixel_quantiles(const SampleSet& samples,
                                   const std::vector<double>& probs);

/// q97.5 - q2.5 image: the pixelwise 95% uncertainty estimate.
Image interquantile_range(const SampleSet& samples);

/// Integrated autocorrelation time 1 + 2 sum_k rho(k), truncated by Geyer's
/// initial-sequence rule: pairwise autocorrelation sums are added while they
/// stay positive, with the monotone refinement (each accepted pair sum is
/// capped by its predecessor). Values near 1 indicate quasi-independent
/// samples. Requires length >= 50; a constant chain has no autocorrelation
/// and raises NumericalError.
double iact(const std::vector<double>& chain);

struct ChainDiagnostics {
    std::map<std::int32_t, double> iact_values;  // pixel index -> IACT
    std::vector<std::int32_t> pixel_sample;
    std::optional<double> rmse_vs_truth;
};

/// IACT probed at n_pixels uniformly random pixels (seeded), the chain-level
/// independence check.
ChainDiagnostics chain_diagnostics(const SampleSet& samples, int n_pixels,
                                   std::uint64_t seed,
                                   const Image* truth = nullptr);

/// Everything needed to re-assemble the posterior for one delta0 choice.
struct SweepProblem {
    ImageGrid grid;
    LinearOperator forward_op;
    Sinogram data;
    double lambda = 0.0;
    PriorKind prior_kind = PriorKind::SgpF;
    MaskSet masks;
    AttenuationTable table;
    std::map<int, double> region_deltas;
    int background_region = 1;
    double map_tol = 1e-8;
    int map_max_iter = 500;
};

struct SweepResult {
    std::vector<double> grid;            // delta0 values
    std::vector<double> rmse_per_delta;  // NaN where the solve failed
    std::vector<bool> converged;
    double best_delta = 0.0;             // first argmin over finite entries
};

/// MAP reconstruction and RMSE against truth for every delta0 in the grid.
/// Solve failures are recorded and the sweep continues.
SweepResult sweep_delta0(const SweepProblem& problem,
                         const std::vector<double>& delta0_grid,
                         const Image& truth);

enum class SliceAxis { Row, Column };

/// 1D profile through an image.
std::vector<double> slice(const Image& image, SliceAxis axis, int index);

struct SliceBand {
    std::vector<double> mean;
    std::vector<double> lower;
    std::vector<double> upper;
};

/// Profile of the sample mean with a pointwise credible band.
SliceBand slice_with_band(const SampleSet& samples, SliceAxis axis, int index,
                          double lower_prob = 0.025, double upper_prob = 0.975);

}  // namespace pipect
