#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "pipect/geometry.hpp"
#include "pipect/linop.hpp"

namespace pipect {

/// Attenuation image over a grid, values in 1/cm, vectorized column-major
/// (see ImageGrid).
struct Image {
    ImageGrid grid;
    Eigen::VectorXd values;
};

/// Line-integral data, ordered angle-major: all detectors of angle 0, then
/// angle 1, ... Values are dimensionless absorbances.
struct Sinogram {
    ScanGeometry geometry;
    Eigen::VectorXd values;
};

Image zero_image(const ImageGrid& grid);

/// One row entry of the system matrix: pixel index and the exact length (cm)
/// of the ray's intersection with that pixel.
struct RaySegment {
    std::int32_t pixel;
    double length;
};

/// Exact ray-pixel intersection lengths (Siddon-style traversal).
///
/// Returns the nonzero entries of one system-matrix row. The sum of lengths
/// equals the length of the ray segment clipped to the grid; crossings
/// shorter than 1e-14 cm (corner grazes) are dropped. A zero-length ray is
/// rejected with ConfigError.
std::vector<RaySegment> trace_ray(const ImageGrid& grid, const Ray& ray);

/// Applies the system matrix: sinogram_i = sum_j a_ij x_j.
Sinogram forward(const ImageGrid& grid, const ScanGeometry& geometry,
                 const Image& image);

/// Applies the exact transpose of forward.
Image adjoint(const ImageGrid& grid, const ScanGeometry& geometry,
              const Sinogram& sinogram);

/// On-the-fly operator view of the projector (rays retraced per apply).
LinearOperator projector_operator(const ImageGrid& grid,
                                  const ScanGeometry& geometry);

/// System-matrix rows traced once and cached in sparse form.
///
/// Behaves identically to forward/adjoint (same traversal, same summation
/// order) but amortizes ray tracing across the many applications a Krylov
/// solve or a sampling chain performs. The dense matrix is never formed.
class SystemMatrix {
  public:
    SystemMatrix(const ImageGrid& grid, const ScanGeometry& geometry);

    Eigen::Index rows() const { return static_cast<Eigen::Index>(row_start_.size()) - 1; }
    Eigen::Index cols() const { return n_cols_; }
    std::int64_t nnz() const { return static_cast<std::int64_t>(value_.size()); }

    void apply(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;
    void apply_transpose(const Eigen::VectorXd& y, Eigen::VectorXd& out) const;

    LinearOperator as_operator() const;

  private:
    Eigen::Index n_cols_;
    std::vector<std::int64_t> row_start_;
    std::vector<std::int32_t> column_;
    std::vector<double> value_;
};

}  // namespace pipect
