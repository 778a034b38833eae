#include "pipect/solver.hpp"

#include <cmath>

namespace pipect {

SolveResult cgls(const LinearOperator& op, const Eigen::VectorXd& b,
                 const Eigen::VectorXd& x0, double tol, int max_iter,
                 const IterateCallback& callback) {
    if (b.size() != op.n_rows)
        throw DimensionError("cgls: rhs length does not match operator rows");
    if (x0.size() != op.n_cols)
        throw DimensionError("cgls: x0 length does not match operator cols");

    SolveResult result;
    result.x = x0;
    Eigen::VectorXd r(op.n_rows), s(op.n_cols), p(op.n_cols), q(op.n_rows);

    op.apply(result.x, q);
    r = b - q;
    op.apply_transpose(r, s);

    const double ne_residual0 = s.norm();
    result.report.initial_ne_residual = ne_residual0;
    if (ne_residual0 == 0.0) {
        // x0 already satisfies the normal equations.
        result.report.converged = true;
        return result;
    }

    p = s;
    double gamma = ne_residual0 * ne_residual0;

    for (int k = 0; k < max_iter; ++k) {
        op.apply(p, q);
        const double qq = q.squaredNorm();
        if (qq == 0.0) {
            result.report.breakdown = true;
            return result;
        }
        const double alpha = gamma / qq;
        result.x += alpha * p;
        r -= alpha * q;
        op.apply_transpose(r, s);
        const double gamma_new = s.squaredNorm();
        const double ne_residual = std::sqrt(gamma_new);
        const double ls_residual = r.norm();

        result.report.iterations_run = k + 1;
        result.report.residual_history.push_back(ne_residual);
        result.report.ls_residual_history.push_back(ls_residual);

        if (callback && callback(k + 1, result.x, ne_residual, ls_residual)) {
            result.report.stopped_by_callback = true;
            return result;
        }
        if (tol > 0.0 && ne_residual <= tol * ne_residual0) {
            result.report.converged = true;
            return result;
        }
        p = s + (gamma_new / gamma) * p;
        gamma = gamma_new;
    }
    return result;
}

SemiconvergentResult cgls_semiconvergent(const LinearOperator& op,
                                         const Eigen::VectorXd& b,
                                         const StoppingRule& rule, int max_iter) {
    SemiconvergentResult out;
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(op.n_cols);

    if (const auto* disc = std::get_if<DiscrepancyRule>(&rule)) {
        if (!(disc->lambda > 0.0) || !std::isfinite(disc->lambda))
            throw ConfigError("discrepancy rule requires a finite positive lambda");
        const double target =
            disc->tau * std::sqrt(static_cast<double>(op.n_rows) / disc->lambda);

        SolveResult run =
            cgls(op, b, x0, 0.0, max_iter,
                 [target](int, const Eigen::VectorXd&, double, double ls_residual) {
                     return ls_residual <= target;
                 });
        out.rule_triggered = run.report.stopped_by_callback;
        out.stopped_at = run.report.iterations_run;
        out.metric = run.report.ls_residual_history.empty()
                         ? 0.0
                         : run.report.ls_residual_history.back();
        out.x = std::move(run.x);
        out.report = std::move(run.report);
        return out;
    }

    const auto& oracle = std::get<OracleRule>(rule);
    if (oracle.truth.size() != op.n_cols)
        throw DimensionError("oracle rule: truth length does not match operator cols");
    const double sqrt_n = std::sqrt(static_cast<double>(op.n_cols));

    Eigen::VectorXd best = x0;
    double best_rmse = (best - oracle.truth).norm() / sqrt_n;
    int best_iter = 0;
    SolveResult run =
        cgls(op, b, x0, 0.0, max_iter,
             [&](int k, const Eigen::VectorXd& x, double, double) {
                 const double e = (x - oracle.truth).norm() / sqrt_n;
                 if (e < best_rmse) {
                     best_rmse = e;
                     best = x;
                     best_iter = k;
                 }
                 return false;
             });
    out.x = std::move(best);
    out.report = std::move(run.report);
    out.stopped_at = best_iter;
    // Semi-convergence shows as a strictly better interior iterate.
    out.rule_triggered = best_iter > 0 && best_iter < run.report.iterations_run;
    out.metric = best_rmse;
    return out;
}

}  // namespace pipect
