#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "pipect/linop.hpp"
#include "pipect/priors.hpp"
#include "pipect/projector.hpp"
#include "pipect/rng.hpp"
#include "pipect/solver.hpp"

namespace pipect {

/// Gaussian posterior assembled as a stacked least-squares system.
///
/// The square-root precision R_post stacks sqrt(lambda) * A over the prior
/// factor square roots; it has q = m + 2N(N+1) + sum_i l_i rows. The
/// posterior mean solves min ||R_post x - b|| with
/// b = [sqrt(lambda) d; R_0 mu_0; ...; R_p mu_p].
class PosteriorModel {
  public:
    PosteriorModel(LinearOperator forward_op, ImageGrid grid, Eigen::VectorXd data,
                   double lambda, StructuralPrior prior);

    Eigen::Index q() const { return q_; }
    Eigen::Index n() const { return grid_.n(); }
    Eigen::Index m() const { return data_.size(); }
    double lambda() const { return lambda_; }
    const ImageGrid& grid() const { return grid_; }
    const StructuralPrior& prior() const { return prior_; }
    const Eigen::VectorXd& data() const { return data_; }

    /// Matrix-free R_post (valid while the model is alive).
    LinearOperator op() const;

    /// Noise-free right-hand side b.
    const Eigen::VectorXd& rhs() const { return rhs_; }

  private:
    LinearOperator forward_op_;
    ImageGrid grid_;
    Eigen::VectorXd data_;
    double lambda_;
    StructuralPrior prior_;
    Eigen::Index q_;
    Eigen::VectorXd rhs_;
};

/// Validates block dimensions and assembles the stacked system.
PosteriorModel assemble_posterior(const LinearOperator& forward_op,
                                  const ImageGrid& grid, const Sinogram& data,
                                  double lambda, const StructuralPrior& prior);

struct MapResult {
    Image estimate;
    SolveReport report;
};

/// Posterior mean / MAP estimate via CGLS on the stacked system. On hitting
/// the iteration limit the partial result is returned with
/// report.converged = false.
MapResult map_estimate(const PosteriorModel& model, double tol, int max_iter);

struct SampleResult {
    Image sample;
    double residual;  // relative normal-equations residual of the inner solve
};

/// One posterior realization: draws xi ~ N(0, I_q) from `rng` (block order:
/// data, GMRF, IID regions) and solves R_post x = b + xi in the
/// least-squares sense, starting from `start` and running exactly
/// inner_iters CGLS iterations (tol = 0), or to tolerance when tol > 0.
SampleResult draw_sample(const PosteriorModel& model, const Image& start,
                         int inner_iters, Rng& rng, double tol = 0.0);

/// Same, with the perturbation supplied by the caller (xi = 0 recovers the
/// posterior mean in the fully converged limit).
SampleResult draw_sample_given_noise(const PosteriorModel& model, const Image& start,
                                     int inner_iters, const Eigen::VectorXd& xi,
                                     double tol = 0.0);

/// Retained posterior realizations plus chain bookkeeping. residuals covers
/// every drawn sample (burn-in included).
struct SampleSet {
    ImageGrid grid;
    std::vector<Eigen::VectorXd> samples;
    int burn_in = 0;
    int iters_per_sample = 0;
    std::uint64_t seed = 0;
    std::vector<double> residuals;

    int retained() const { return static_cast<int>(samples.size()); }
};

/// Sequential sampling chain with warm starts: each draw starts from the
/// previous realization. The first burn_in samples are discarded.
/// Deterministic given seed (noise comes from Rng(seed).stream(kChain)).
SampleSet run_chain(const PosteriorModel& model, int n_samples, int burn_in,
                    int inner_iters, std::uint64_t seed, const Image& init);

}  // namespace pipect
