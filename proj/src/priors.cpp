#include "pipect/priors.hpp"

#include <algorithm>
#include <cmath>

#include "pipect/solver.hpp"

namespace pipect {

LinearOperator GaussianFactor::as_operator() const {
    LinearOperator op;
    op.n_rows = rows();
    op.n_cols = cols();
    op.apply = [this](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        out.resize(rows());
        apply_R(x, out);
    };
    op.apply_transpose = [this](const Eigen::VectorXd& y, Eigen::VectorXd& out) {
        apply_Rt(y, out);
    };
    return op;
}

LinearOperator difference_operator(int n) {
    if (n < 1) throw ConfigError("difference_operator: n must be >= 1");
    LinearOperator op;
    op.n_rows = n + 1;
    op.n_cols = n;
    op.apply = [n](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        out.resize(n + 1);
        out[0] = x[0];
        for (int k = 1; k < n; ++k) out[k] = x[k] - x[k - 1];
        out[n] = -x[n - 1];
    };
    op.apply_transpose = [n](const Eigen::VectorXd& y, Eigen::VectorXd& out) {
        out.resize(n);
        for (int j = 0; j < n; ++j) out[j] = y[j] - y[j + 1];
    };
    return op;
}

GmrfFactor::GmrfFactor(int n_side, double delta0)
    : n_side_(n_side), delta0_(delta0) {
    if (n_side < 1) throw ConfigError("gmrf_factor: n_side must be >= 1");
    if (!(delta0 > 0.0)) throw ConfigError("gmrf_factor: delta0 must be positive");
}

void GmrfFactor::apply_R(const Eigen::VectorXd& x,
                         Eigen::Ref<Eigen::VectorXd> out) const {
    const int n = n_side_;
    const double s = std::sqrt(delta0_);
    const Eigen::Index half = static_cast<Eigen::Index>(n) * (n + 1);

    // D1 = I (x) D: backward differences down each column.
    for (int c = 0; c < n; ++c) {
        const Eigen::Index xi = static_cast<Eigen::Index>(c) * n;
        const Eigen::Index oi = static_cast<Eigen::Index>(c) * (n + 1);
        out[oi] = s * x[xi];
        for (int k = 1; k < n; ++k) out[oi + k] = s * (x[xi + k] - x[xi + k - 1]);
        out[oi + n] = -s * x[xi + n - 1];
    }
    // D2 = D (x) I: backward differences across columns, row by row.
    for (int k = 0; k <= n; ++k) {
        const Eigen::Index oi = half + static_cast<Eigen::Index>(k) * n;
        if (k == 0) {
            for (int r = 0; r < n; ++r) out[oi + r] = s * x[r];
        } else if (k == n) {
            const Eigen::Index xi = static_cast<Eigen::Index>(n - 1) * n;
            for (int r = 0; r < n; ++r) out[oi + r] = -s * x[xi + r];
        } else {
            const Eigen::Index xi = static_cast<Eigen::Index>(k) * n;
            for (int r = 0; r < n; ++r)
                out[oi + r] = s * (x[xi + r] - x[xi + r - n]);
        }
    }
}

void GmrfFactor::apply_Rt(const Eigen::Ref<const Eigen::VectorXd>& y,
                          Eigen::VectorXd& out) const {
    const int n = n_side_;
    const double s = std::sqrt(delta0_);
    const Eigen::Index half = static_cast<Eigen::Index>(n) * (n + 1);

    out.resize(cols());
    for (int c = 0; c < n; ++c) {
        const Eigen::Index yi = static_cast<Eigen::Index>(c) * (n + 1);
        const Eigen::Index oi = static_cast<Eigen::Index>(c) * n;
        for (int j = 0; j < n; ++j) out[oi + j] = s * (y[yi + j] - y[yi + j + 1]);
    }
    for (int k = 0; k < n; ++k) {
        const Eigen::Index yi = half + static_cast<Eigen::Index>(k) * n;
        const Eigen::Index oi = static_cast<Eigen::Index>(k) * n;
        for (int r = 0; r < n; ++r) out[oi + r] += s * (y[yi + r] - y[yi + n + r]);
    }
}

Eigen::VectorXd GmrfFactor::mean() const { return Eigen::VectorXd::Zero(cols()); }

Eigen::VectorXd GmrfFactor::mean_rhs() const { return Eigen::VectorXd::Zero(rows()); }

IidFactor::IidFactor(std::vector<std::int32_t> mask_indices, Eigen::Index n,
                     double alpha, double delta, int region)
    : indices_(std::move(mask_indices)), n_(n), alpha_(alpha), delta_(delta),
      region_(region) {
    if (indices_.empty())
        throw ConfigError("iid_factor: empty mask (region " +
                          std::to_string(region) + ")");
    if (!(delta > 0.0)) throw ConfigError("iid_factor: delta must be positive");
    if (alpha < 0.0)
        throw ConfigError("iid_factor: negative prior mean (region " +
                          std::to_string(region) + "); check material constants");
    for (auto idx : indices_)
        if (idx < 0 || idx >= n_)
            throw ConfigError("iid_factor: mask index out of range");
}

void IidFactor::apply_R(const Eigen::VectorXd& x,
                        Eigen::Ref<Eigen::VectorXd> out) const {
    const double s = std::sqrt(delta_);
    for (std::size_t k = 0; k < indices_.size(); ++k) out[k] = s * x[indices_[k]];
}

void IidFactor::apply_Rt(const Eigen::Ref<const Eigen::VectorXd>& y,
                         Eigen::VectorXd& out) const {
    const double s = std::sqrt(delta_);
    out = Eigen::VectorXd::Zero(n_);
    for (std::size_t k = 0; k < indices_.size(); ++k) out[indices_[k]] = s * y[k];
}

Eigen::VectorXd IidFactor::mean() const {
    return Eigen::VectorXd::Constant(n_, alpha_);
}

Eigen::VectorXd IidFactor::mean_rhs() const {
    return Eigen::VectorXd::Constant(rows(), std::sqrt(delta_) * alpha_);
}

std::shared_ptr<GmrfFactor> gmrf_factor(int n_side, double delta0) {
    return std::make_shared<GmrfFactor>(n_side, delta0);
}

std::shared_ptr<IidFactor> iid_factor(const std::vector<std::int32_t>& mask_indices,
                                      Eigen::Index n, double alpha, double delta,
                                      int region) {
    return std::make_shared<IidFactor>(mask_indices, n, alpha, delta, region);
}

PriorKind prior_kind_from_string(const std::string& s) {
    if (s == "gmrf") return PriorKind::GmrfOnly;
    if (s == "sgp-bg") return PriorKind::SgpBg;
    if (s == "sgp-f") return PriorKind::SgpF;
    throw ConfigError("unknown prior '" + s + "' (expected gmrf, sgp-bg or sgp-f)");
}

std::string to_string(PriorKind kind) {
    switch (kind) {
        case PriorKind::GmrfOnly: return "gmrf";
        case PriorKind::SgpBg: return "sgp-bg";
        case PriorKind::SgpF: return "sgp-f";
    }
    return "?";
}

StructuralPrior::StructuralPrior(
    ImageGrid grid, std::string name,
    std::vector<std::shared_ptr<const GaussianFactor>> factors)
    : grid_(grid), name_(std::move(name)), factors_(std::move(factors)),
      total_rows_(0) {
    int gmrf_count = 0;
    std::vector<char> covered(grid_.n(), 0);
    for (const auto& f : factors_) {
        if (!f) throw ConfigError("structural prior: null factor");
        if (f->cols() != grid_.n())
            throw DimensionError("structural prior: factor size does not match grid");
        if (f->kind() == GaussianFactor::Kind::Gmrf) {
            ++gmrf_count;
        } else {
            const auto& iid = static_cast<const IidFactor&>(*f);
            for (auto idx : iid.mask_indices()) {
                if (covered[idx])
                    throw ConfigError("structural prior: IID masks overlap "
                                      "(region " + std::to_string(iid.region()) + ")");
                covered[idx] = 1;
            }
        }
        total_rows_ += f->rows();
    }
    if (gmrf_count != 1)
        throw ConfigError("structural prior: exactly one GMRF factor required "
                          "(it guarantees full column rank)");
}

void StructuralPrior::apply_R(const Eigen::VectorXd& x,
                              Eigen::Ref<Eigen::VectorXd> out) const {
    Eigen::Index offset = 0;
    for (const auto& f : factors_) {
        f->apply_R(x, out.segment(offset, f->rows()));
        offset += f->rows();
    }
}

void StructuralPrior::apply_Rt(const Eigen::Ref<const Eigen::VectorXd>& y,
                               Eigen::VectorXd& out) const {
    out = Eigen::VectorXd::Zero(n());
    Eigen::VectorXd tmp(n());
    Eigen::Index offset = 0;
    for (const auto& f : factors_) {
        f->apply_Rt(y.segment(offset, f->rows()), tmp);
        out += tmp;
        offset += f->rows();
    }
}

Eigen::VectorXd StructuralPrior::mean_rhs() const {
    Eigen::VectorXd rhs(total_rows_);
    Eigen::Index offset = 0;
    for (const auto& f : factors_) {
        rhs.segment(offset, f->rows()) = f->mean_rhs();
        offset += f->rows();
    }
    return rhs;
}

LinearOperator StructuralPrior::as_operator() const {
    LinearOperator op;
    op.n_rows = total_rows_;
    op.n_cols = n();
    op.apply = [this](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        out.resize(total_rows_);
        apply_R(x, out);
    };
    op.apply_transpose = [this](const Eigen::VectorXd& y, Eigen::VectorXd& out) {
        apply_Rt(y, out);
    };
    return op;
}

StructuralPrior assemble_sgp(PriorKind kind, const ImageGrid& grid,
                             const MaskSet& masks, const AttenuationTable& table,
                             const PriorDeltas& deltas, int background_region) {
    std::vector<std::shared_ptr<const GaussianFactor>> factors;
    factors.push_back(gmrf_factor(grid.n_side(), deltas.delta0));

    auto add_region = [&](int region) {
        if (region < 1 || region > masks.p)
            throw ConfigError("assemble_sgp: mask set has no region " +
                              std::to_string(region));
        auto it = deltas.region.find(region);
        if (it == deltas.region.end())
            throw ConfigError("assemble_sgp: no delta for region " +
                              std::to_string(region));
        factors.push_back(iid_factor(masks.indices[region - 1], grid.n(),
                                     table.alpha(region), it->second, region));
    };

    switch (kind) {
        case PriorKind::GmrfOnly:
            break;
        case PriorKind::SgpBg:
            add_region(background_region);
            break;
        case PriorKind::SgpF:
            for (int region = 1; region <= masks.p; ++region) add_region(region);
            break;
    }
    return StructuralPrior(grid, to_string(kind), std::move(factors));
}

Image prior_mean(const StructuralPrior& prior, double tol, int max_iter) {
    SolveResult result = cgls(prior.as_operator(), prior.mean_rhs(),
                              Eigen::VectorXd::Zero(prior.n()), tol, max_iter);
    if (!result.report.converged) {
        const double res = result.report.residual_history.empty()
                               ? 0.0
                               : result.report.residual_history.back();
        throw NumericalError("prior_mean: CGLS did not reach tolerance within " +
                                 std::to_string(max_iter) + " iterations",
                             res);
    }
    return Image{prior.grid(), std::move(result.x)};
}

double unnormalized_log_density(const StructuralPrior& prior, const Image& x) {
    if (!(x.grid == prior.grid()))
        throw DimensionError("unnormalized_log_density: grid mismatch");
    double acc = 0.0;
    Eigen::VectorXd tmp;
    for (const auto& f : prior.factors()) {
        tmp.resize(f->rows());
        f->apply_R(x.values, tmp);
        tmp -= f->mean_rhs();
        acc += tmp.squaredNorm();
    }
    return -0.5 * acc;
}

double default_delta0(double angle_fraction) {
    if (angle_fraction >= 0.75) return 4000.0;
    if (angle_fraction >= 0.35) return 3000.0;
    return 1000.0;
}

PriorDeltas default_deltas(double angle_fraction) {
    PriorDeltas d;
    d.delta0 = default_delta0(angle_fraction);
    d.region = {{1, 1000.0}, {2, 1000.0}, {3, 1000.0}, {4, 1000.0}, {5, 500.0}};
    return d;
}

}  // namespace pipect
