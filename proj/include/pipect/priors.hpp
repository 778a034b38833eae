#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pipect/linop.hpp"
#include "pipect/materials.hpp"
#include "pipect/phantom.hpp"
#include "pipect/projector.hpp"

namespace pipect {

/// One Gaussian prior term, parameterized by mean and square-root precision:
/// the factor contributes exp(-1/2 ||R (x - mu)||^2) to the prior.
class GaussianFactor {
  public:
    enum class Kind { Gmrf, Iid };

    virtual ~GaussianFactor() = default;

    virtual Kind kind() const = 0;
    virtual Eigen::Index rows() const = 0;
    virtual Eigen::Index cols() const = 0;
    virtual double delta() const = 0;

    /// out = R x (out sized rows(); may alias a segment of a larger vector).
    virtual void apply_R(const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> out) const = 0;

    /// out = R^T y (assigned, not accumulated).
    virtual void apply_Rt(const Eigen::Ref<const Eigen::VectorXd>& y,
                          Eigen::VectorXd& out) const = 0;

    /// Prior mean mu (length cols()).
    virtual Eigen::VectorXd mean() const = 0;

    /// R * mu (length rows()); the factor's block of stacked right-hand sides.
    virtual Eigen::VectorXd mean_rhs() const = 0;

    /// Operator view (valid while the factor is alive).
    LinearOperator as_operator() const;
};

/// Backward-difference matrix D in R^{(N+1) x N} with zero Dirichlet
/// boundaries: (Dx)_1 = x_1, (Dx)_k = x_k - x_{k-1}, (Dx)_{N+1} = -x_N.
LinearOperator difference_operator(int n);

/// Smoothness prior on the whole image: R = sqrt(delta0) [D1; D2] with
/// D1 = I (x) D acting down columns and D2 = D (x) I acting across rows
/// (column-major vectorization). 2N(N+1) rows; R^T R is positive definite.
class GmrfFactor final : public GaussianFactor {
  public:
    GmrfFactor(int n_side, double delta0);

    Kind kind() const override { return Kind::Gmrf; }
    Eigen::Index rows() const override {
        return 2 * static_cast<Eigen::Index>(n_side_) * (n_side_ + 1);
    }
    Eigen::Index cols() const override {
        return static_cast<Eigen::Index>(n_side_) * n_side_;
    }
    double delta() const override { return delta0_; }
    int n_side() const { return n_side_; }

    void apply_R(const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> out) const override;
    void apply_Rt(const Eigen::Ref<const Eigen::VectorXd>& y,
                  Eigen::VectorXd& out) const override;
    Eigen::VectorXd mean() const override;
    Eigen::VectorXd mean_rhs() const override;

  private:
    int n_side_;
    double delta0_;
};

/// Region prior pulling masked pixels toward the expected attenuation:
/// mu = alpha * 1 on the whole domain, R = sqrt(delta) * M with M the
/// row-selection matrix of the mask.
class IidFactor final : public GaussianFactor {
  public:
    IidFactor(std::vector<std::int32_t> mask_indices, Eigen::Index n,
              double alpha, double delta, int region);

    Kind kind() const override { return Kind::Iid; }
    Eigen::Index rows() const override {
        return static_cast<Eigen::Index>(indices_.size());
    }
    Eigen::Index cols() const override { return n_; }
    double delta() const override { return delta_; }
    double alpha() const { return alpha_; }
    int region() const { return region_; }
    const std::vector<std::int32_t>& mask_indices() const { return indices_; }

    void apply_R(const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> out) const override;
    void apply_Rt(const Eigen::Ref<const Eigen::VectorXd>& y,
                  Eigen::VectorXd& out) const override;
    Eigen::VectorXd mean() const override;
    Eigen::VectorXd mean_rhs() const override;

  private:
    std::vector<std::int32_t> indices_;
    Eigen::Index n_;
    double alpha_;
    double delta_;
    int region_;
};

std::shared_ptr<GmrfFactor> gmrf_factor(int n_side, double delta0);
std::shared_ptr<IidFactor> iid_factor(const std::vector<std::int32_t>& mask_indices,
                                      Eigen::Index n, double alpha, double delta,
                                      int region = 0);

enum class PriorKind { GmrfOnly, SgpBg, SgpF };

PriorKind prior_kind_from_string(const std::string& s);
std::string to_string(PriorKind kind);

struct PriorDeltas {
    double delta0 = 0.0;
    std::map<int, double> region;  // region index -> delta_i
};

/// Stacked structural prior: exactly one GMRF plus any number of IID region
/// factors on pairwise disjoint masks. R_pr stacks all factor square roots,
/// which keeps the combined precision full rank (the GMRF block already has
/// full column rank).
class StructuralPrior {
  public:
    StructuralPrior(ImageGrid grid, std::string name,
                    std::vector<std::shared_ptr<const GaussianFactor>> factors);

    const ImageGrid& grid() const { return grid_; }
    const std::string& name() const { return name_; }
    Eigen::Index n() const { return grid_.n(); }
    const std::vector<std::shared_ptr<const GaussianFactor>>& factors() const {
        return factors_;
    }
    Eigen::Index total_rows() const { return total_rows_; }

    void apply_R(const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> out) const;
    void apply_Rt(const Eigen::Ref<const Eigen::VectorXd>& y,
                  Eigen::VectorXd& out) const;

    /// Stacked [R_0 mu_0; ...; R_p mu_p].
    Eigen::VectorXd mean_rhs() const;

    /// Operator view of R_pr (valid while the prior is alive).
    LinearOperator as_operator() const;

  private:
    ImageGrid grid_;
    std::string name_;
    std::vector<std::shared_ptr<const GaussianFactor>> factors_;
    Eigen::Index total_rows_;
};

/// Builds the named configuration: GMRF-only -> [GMRF]; SGP-BG -> [GMRF,
/// IID(background)]; SGP-F -> [GMRF, IID for every mask region].
StructuralPrior assemble_sgp(PriorKind kind, const ImageGrid& grid,
                             const MaskSet& masks, const AttenuationTable& table,
                             const PriorDeltas& deltas, int background_region = 1);

/// Solves (R_pr^T R_pr) mu_pr = sum_i R_i^T R_i mu_i matrix-free.
/// Throws NumericalError (carrying the residual) on non-convergence.
Image prior_mean(const StructuralPrior& prior, double tol, int max_iter);

/// -1/2 sum_i ||R_i (x - mu_i)||^2 (normalization constants omitted; MAP and
/// sampling never need them).
double unnormalized_log_density(const StructuralPrior& prior, const Image& x);

/// Default GMRF precision per view-angle fraction (full / 50% / 20% / 10%).
double default_delta0(double angle_fraction);

/// Default region precisions: 1000 for regions 1-4, 500 for region 5.
PriorDeltas default_deltas(double angle_fraction);

}  // namespace pipect
