#include "pipect/posterior.hpp"

#include <cmath>

namespace pipect {

PosteriorModel::PosteriorModel(LinearOperator forward_op, ImageGrid grid,
                               Eigen::VectorXd data, double lambda,
                               StructuralPrior prior)
    : forward_op_(std::move(forward_op)), grid_(grid), data_(std::move(data)),
      lambda_(lambda), prior_(std::move(prior)) {
    if (!(lambda_ > 0.0) || !std::isfinite(lambda_))
        throw ConfigError("posterior: lambda must be finite and positive "
                          "(noiseless data needs an explicit precision)");
    if (forward_op_.n_rows != data_.size())
        throw DimensionError("posterior: data block mismatch: A has " +
                             std::to_string(forward_op_.n_rows) + " rows, d has " +
                             std::to_string(data_.size()) + " entries");
    if (forward_op_.n_cols != grid_.n())
        throw DimensionError("posterior: projector block mismatch: A has " +
                             std::to_string(forward_op_.n_cols) +
                             " columns, grid has " + std::to_string(grid_.n()) +
                             " pixels");
    if (prior_.n() != grid_.n())
        throw DimensionError("posterior: prior block mismatch: prior is over " +
                             std::to_string(prior_.n()) + " pixels, grid has " +
                             std::to_string(grid_.n()));

    q_ = data_.size() + prior_.total_rows();

    rhs_.resize(q_);
    rhs_.head(data_.size()) = std::sqrt(lambda_) * data_;
    rhs_.tail(prior_.total_rows()) = prior_.mean_rhs();
}

LinearOperator PosteriorModel::op() const {
    const double sqrt_lambda = std::sqrt(lambda_);
    const Eigen::Index m = data_.size();
    const LinearOperator* A = &forward_op_;
    const StructuralPrior* prior = &prior_;

    LinearOperator op;
    op.n_rows = q_;
    op.n_cols = grid_.n();
    op.apply = [A, prior, sqrt_lambda, m](const Eigen::VectorXd& x,
                                          Eigen::VectorXd& out) {
        out.resize(m + prior->total_rows());
        Eigen::VectorXd ax(m);
        A->apply(x, ax);
        out.head(m) = sqrt_lambda * ax;
        prior->apply_R(x, out.tail(prior->total_rows()));
    };
    op.apply_transpose = [A, prior, sqrt_lambda, m](const Eigen::VectorXd& y,
                                                    Eigen::VectorXd& out) {
        A->apply_transpose(y.head(m), out);
        out *= sqrt_lambda;
        Eigen::VectorXd tmp(prior->n());
        prior->apply_Rt(y.tail(prior->total_rows()), tmp);
        out += tmp;
    };
    return op;
}

PosteriorModel assemble_posterior(const LinearOperator& forward_op,
                                  const ImageGrid& grid, const Sinogram& data,
                                  double lambda, const StructuralPrior& prior) {
    return PosteriorModel(forward_op, grid, data.values, lambda, prior);
}

MapResult map_estimate(const PosteriorModel& model, double tol, int max_iter) {
    SolveResult result = cgls(model.op(), model.rhs(),
                              Eigen::VectorXd::Zero(model.n()), tol, max_iter);
    return MapResult{Image{model.grid(), std::move(result.x)},
                     std::move(result.report)};
}

SampleResult draw_sample_given_noise(const PosteriorModel& model, const Image& start,
                                     int inner_iters, const Eigen::VectorXd& xi,
                                     double tol) {
    if (inner_iters < 1)
        throw ConfigError("draw_sample: inner_iters must be >= 1");
    if (!(start.grid == model.grid()))
        throw DimensionError("draw_sample: start image grid mismatch");
    if (xi.size() != model.q())
        throw DimensionError("draw_sample: perturbation length must equal q");

    const LinearOperator op = model.op();
    const Eigen::VectorXd rhs = model.rhs() + xi;
    SolveResult result = cgls(op, rhs, start.values, tol, inner_iters);

    // Relative normal-equations residual ||R^T(Rx - rhs)|| / ||R^T rhs||; the
    // numerator is the solver's final residual.
    double residual = 0.0;
    if (!result.report.residual_history.empty()) {
        Eigen::VectorXd atb(model.n());
        op.apply_transpose(rhs, atb);
        const double denom = atb.norm();
        residual = denom > 0.0 ? result.report.residual_history.back() / denom
                               : result.report.residual_history.back();
    }
    return SampleResult{Image{model.grid(), std::move(result.x)}, residual};
}

SampleResult draw_sample(const PosteriorModel& model, const Image& start,
                         int inner_iters, Rng& rng, double tol) {
    // Block order of the perturbation matches the rhs: data, GMRF, IID
    // regions in factor order.
    Eigen::VectorXd xi(model.q());
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = rng.normal();
    return draw_sample_given_noise(model, start, inner_iters, xi, tol);
}

SampleSet run_chain(const PosteriorModel& model, int n_samples, int burn_in,
                    int inner_iters, std::uint64_t seed, const Image& init) {
    if (burn_in < 0 || n_samples <= burn_in)
        throw ConfigError("run_chain: need n_samples > burn_in >= 0");

    Rng rng = Rng(seed).stream(rng_streams::kChain);

    SampleSet set{model.grid(), {}, burn_in, inner_iters, seed, {}};
    set.samples.reserve(n_samples - burn_in);
    set.residuals.reserve(n_samples);

    Image current = init;
    for (int k = 0; k < n_samples; ++k) {
        SampleResult drawn = draw_sample(model, current, inner_iters, rng);
        current = std::move(drawn.sample);
        set.residuals.push_back(drawn.residual);
        if (k >= burn_in) set.samples.push_back(current.values);
    }
    return set;
}

}  // namespace pipect
