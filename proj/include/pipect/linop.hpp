#pragma once

#include <functional>

#include <Eigen/Core>

namespace pipect {

/// Matrix-free linear map with its transpose.
///
/// apply writes op * x into out; apply_transpose writes op^T * y. Both must
/// fully assign `out` (callers pass correctly sized vectors). Operators are
/// expected to be pure: repeated application to equal inputs yields equal
/// outputs.
struct LinearOperator {
    Eigen::Index n_rows = 0;
    Eigen::Index n_cols = 0;
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> apply;
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> apply_transpose;

    Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
        Eigen::VectorXd out(n_rows);
        apply(x, out);
        return out;
    }

    Eigen::VectorXd transpose_times(const Eigen::VectorXd& y) const {
        Eigen::VectorXd out(n_cols);
        apply_transpose(y, out);
        return out;
    }
};

}  // namespace pipect
