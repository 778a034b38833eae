#pragma once

#include <functional>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "pipect/errors.hpp"
#include "pipect/linop.hpp"

namespace pipect {

/// Per-solve diagnostics.
///
/// residual_history records the normal-equations residual ||A^T(Ax - b)||
/// after each iteration; ls_residual_history records ||Ax - b||. Both are
/// nonempty whenever at least one iteration ran.
struct SolveReport {
    int iterations_run = 0;
    double initial_ne_residual = 0.0;  // ||A^T(A x0 - b)||
    std::vector<double> residual_history;
    std::vector<double> ls_residual_history;
    bool converged = false;
    bool breakdown = false;
    bool stopped_by_callback = false;
};

struct SolveResult {
    Eigen::VectorXd x;
    SolveReport report;
};

/// Called after every iteration with the iterate and both residual norms;
/// returning true stops the solve at that iterate.
using IterateCallback = std::function<bool(
    int iteration, const Eigen::VectorXd& x, double ne_residual, double ls_residual)>;

/// Conjugate gradient least squares: iterates toward argmin ||op x - b|| from
/// x0. Stops when the normal-equations residual drops below tol relative to
/// its initial value, or after max_iter iterations. tol = 0 runs exactly
/// max_iter iterations (modulo breakdown), which is the fixed-iteration mode
/// the sampler uses.
SolveResult cgls(const LinearOperator& op, const Eigen::VectorXd& b,
                 const Eigen::VectorXd& x0, double tol, int max_iter,
                 const IterateCallback& callback = nullptr);

/// Stop at the first iterate with ||op x - b|| <= tau * sqrt(m / lambda),
/// i.e. at the expected residual norm of the noise.
struct DiscrepancyRule {
    double lambda;
    double tau = 1.02;
};

/// Return the iterate with minimum RMSE against a known ground truth
/// (synthetic experiments only).
struct OracleRule {
    Eigen::VectorXd truth;
};

using StoppingRule = std::variant<DiscrepancyRule, OracleRule>;

struct SemiconvergentResult {
    Eigen::VectorXd x;
    SolveReport report;
    int stopped_at = 0;        // iteration index of the returned iterate
    bool rule_triggered = false;
    double metric = 0.0;       // LS residual (discrepancy) or RMSE (oracle)
};

/// CGLS with early stopping for noisy data, where the plain least-squares
/// solution degrades past an optimal iteration count. If the rule never
/// triggers within max_iter the best iterate seen is returned with
/// rule_triggered = false.
SemiconvergentResult cgls_semiconvergent(const LinearOperator& op,
                                         const Eigen::VectorXd& b,
                                         const StoppingRule& rule,
                                         int max_iter);

}  // namespace pipect
