#include "pipect/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pipect/rng.hpp"

namespace pipect {

namespace {

// Type-7 quantile (linear interpolation of order statistics) on sorted data.
double quantile_sorted(const std::vector<double>& sorted, double prob) {
    const std::size_t k = sorted.size();
    const double h = (static_cast<double>(k) - 1.0) * prob;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= k) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

void check_probs(const std::vector<double>& probs) {
    for (double p : probs)
        if (!(p > 0.0) || !(p < 1.0))
            throw ConfigError("pixel_quantiles: probabilities must lie in (0, 1)");
}

}  // namespace

double rmse(const Image& x, const Image& truth) {
    if (!(x.grid == truth.grid))
        throw DimensionError("rmse: images live on different grids");
    return (x.values - truth.values).norm() /
           std::sqrt(static_cast<double>(x.values.size()));
}

Image sample_mean(const SampleSet& samples) {
    if (samples.samples.empty()) throw ConfigError("sample_mean: empty sample set");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(samples.grid.n());
    for (const auto& s : samples.samples) acc += s;
    acc /= static_cast<double>(samples.samples.size());
    return Image{samples.grid, std::move(acc)};
}

std::vector<Image> pixel_quantiles(const SampleSet& samples,
                                   const std::vector<double>& probs) {
    if (samples.samples.size() < 2)
        throw ConfigError("pixel_quantiles: need at least 2 samples");
    check_probs(probs);

    const Eigen::Index n = samples.grid.n();
    const std::size_t k = samples.samples.size();

    std::vector<Image> out;
    out.reserve(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i)
        out.push_back(Image{samples.grid, Eigen::VectorXd(n)});

    std::vector<double> column(k);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (std::size_t s = 0; s < k; ++s) column[s] = samples.samples[s][j];
        std::sort(column.begin(), column.end());
        for (std::size_t i = 0; i < probs.size(); ++i)
            out[i].values[j] = quantile_sorted(column, probs[i]);
    }
    return out;
}

Image interquantile_range(const SampleSet& samples) {
    auto q = pixel_quantiles(samples, {0.025, 0.975});
    return Image{samples.grid, q[1].values - q[0].values};
}

double iact(const std::vector<double>& chain) {
    const std::size_t k = chain.size();
    if (k < 50) throw ConfigError("iact: chain must have at least 50 entries");

    double mean = 0.0;
    for (double v : chain) mean += v;
    mean /= static_cast<double>(k);

    double c0 = 0.0;
    for (double v : chain) c0 += (v - mean) * (v - mean);
    c0 /= static_cast<double>(k);
    if (c0 == 0.0)
        throw NumericalError("iact: constant chain has undefined autocorrelation");

    auto rho = [&](std::size_t lag) {
        double c = 0.0;
        for (std::size_t t = 0; t + lag < k; ++t)
            c += (chain[t] - mean) * (chain[t + lag] - mean);
        return c / (static_cast<double>(k) * c0);
    };

    // Geyer initial-sequence estimator: add pairwise autocorrelation sums
    // while they stay positive, enforcing the monotone (non-increasing)
    // refinement that caps spurious late pairs on near-independent chains.
    double total = 0.0;  // sum of rho over accepted lags, rho(0) = 1 included
    double cap = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0;; ++m) {
        const std::size_t lag0 = 2 * m, lag1 = 2 * m + 1;
        if (lag1 >= k) break;
        const double pair = std::min(rho(lag0) + rho(lag1), cap);
        if (pair <= 0.0) break;
        total += pair;
        cap = pair;
    }
    return 2.0 * total - 1.0;
}

ChainDiagnostics chain_diagnostics(const SampleSet& samples, int n_pixels,
                                   std::uint64_t seed, const Image* truth) {
    if (samples.samples.empty())
        throw ConfigError("chain_diagnostics: empty sample set");
    const Eigen::Index n = samples.grid.n();
    if (n_pixels < 1 || n_pixels > n)
        throw ConfigError("chain_diagnostics: bad probe count");

    // Without replacement, rejection sampling (probe count << n).
    Rng rng = Rng(seed).stream(rng_streams::kPixelProbe);
    std::vector<char> taken(n, 0);
    ChainDiagnostics diag;
    diag.pixel_sample.reserve(n_pixels);
    while (static_cast<int>(diag.pixel_sample.size()) < n_pixels) {
        const auto j = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n));
        if (j >= n || taken[j]) continue;
        taken[j] = 1;
        diag.pixel_sample.push_back(static_cast<std::int32_t>(j));
    }

    std::vector<double> chain(samples.samples.size());
    for (auto j : diag.pixel_sample) {
        for (std::size_t s = 0; s < samples.samples.size(); ++s)
            chain[s] = samples.samples[s][j];
        diag.iact_values[j] = iact(chain);
    }

    if (truth) diag.rmse_vs_truth = rmse(sample_mean(samples), *truth);
    return diag;
}

SweepResult sweep_delta0(const SweepProblem& problem,
                         const std::vector<double>& delta0_grid,
                         const Image& truth) {
    if (delta0_grid.empty()) throw ConfigError("sweep_delta0: empty grid");

    SweepResult result;
    result.grid = delta0_grid;
    result.rmse_per_delta.assign(delta0_grid.size(),
                                 std::numeric_limits<double>::quiet_NaN());
    result.converged.assign(delta0_grid.size(), false);

    for (std::size_t i = 0; i < delta0_grid.size(); ++i) {
        try {
            PriorDeltas deltas;
            deltas.delta0 = delta0_grid[i];
            deltas.region = problem.region_deltas;
            StructuralPrior prior =
                assemble_sgp(problem.prior_kind, problem.grid, problem.masks,
                             problem.table, deltas, problem.background_region);
            PosteriorModel model =
                assemble_posterior(problem.forward_op, problem.grid, problem.data,
                                   problem.lambda, prior);
            MapResult map = map_estimate(model, problem.map_tol, problem.map_max_iter);
            result.rmse_per_delta[i] = rmse(map.estimate, truth);
            result.converged[i] = map.report.converged;
        } catch (const std::exception&) {
            // Recorded as NaN; the sweep continues.
        }
    }

    double best = std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t i = 0; i < delta0_grid.size(); ++i) {
        const double r = result.rmse_per_delta[i];
        if (std::isfinite(r) && r < best) {
            best = r;
            result.best_delta = delta0_grid[i];
            any = true;
        }
    }
    if (!any)
        throw NumericalError("sweep_delta0: every delta0 candidate failed");
    return result;
}

std::vector<double> slice(const Image& image, SliceAxis axis, int index) {
    const int n = image.grid.n_side();
    if (index < 0 || index >= n) throw std::out_of_range("slice: index out of range");

    std::vector<double> profile(n);
    if (axis == SliceAxis::Row) {
        for (int c = 0; c < n; ++c)
            profile[c] = image.values[static_cast<Eigen::Index>(c) * n + index];
    } else {
        for (int r = 0; r < n; ++r)
            profile[r] = image.values[static_cast<Eigen::Index>(index) * n + r];
    }
    return profile;
}

SliceBand slice_with_band(const SampleSet& samples, SliceAxis axis, int index,
                          double lower_prob, double upper_prob) {
    if (samples.samples.size() < 2)
        throw ConfigError("slice_with_band: need at least 2 samples");
    check_probs({lower_prob, upper_prob});
    const int n = samples.grid.n_side();
    if (index < 0 || index >= n)
        throw std::out_of_range("slice_with_band: index out of range");

    auto pixel_at = [&](int along) -> Eigen::Index {
        return axis == SliceAxis::Row
                   ? static_cast<Eigen::Index>(along) * n + index
                   : static_cast<Eigen::Index>(index) * n + along;
    };

    SliceBand band;
    band.mean.resize(n);
    band.lower.resize(n);
    band.upper.resize(n);
    std::vector<double> column(samples.samples.size());
    for (int a = 0; a < n; ++a) {
        const Eigen::Index j = pixel_at(a);
        double mean = 0.0;
        for (std::size_t s = 0; s < samples.samples.size(); ++s) {
            column[s] = samples.samples[s][j];
            mean += column[s];
        }
        band.mean[a] = mean / static_cast<double>(column.size());
        std::sort(column.begin(), column.end());
        band.lower[a] = quantile_sorted(column, lower_prob);
        band.upper[a] = quantile_sorted(column, upper_prob);
    }
    return band;
}

}  // namespace pipect
