#include "pipect/projector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pipect {

namespace {

// Crossings shorter than this (corner grazes) carry no area and are dropped.
constexpr double kMinSegmentCm = 1e-14;

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

Image zero_image(const ImageGrid& grid) {
    return Image{grid, Eigen::VectorXd::Zero(grid.n())};
}

std::vector<RaySegment> trace_ray(const ImageGrid& grid, const Ray& ray) {
    const double dx = ray.detector.x - ray.source.x;
    const double dy = ray.detector.y - ray.source.y;
    const double length = std::hypot(dx, dy);
    if (length == 0.0)
        throw ConfigError("trace_ray: degenerate (zero-length) ray");

    const int n = grid.n_side();
    const double h = grid.pixel_size();
    const double x_min = grid.x_min();
    const double y_max = grid.y_max();

    // Clip the parameter interval [0, 1] against both slabs.
    double t0 = 0.0, t1 = 1.0;
    if (dx != 0.0) {
        const double ta = (x_min - ray.source.x) / dx;
        const double tb = (x_min + grid.physical_size() - ray.source.x) / dx;
        t0 = std::max(t0, std::min(ta, tb));
        t1 = std::min(t1, std::max(ta, tb));
    } else if (ray.source.x < x_min || ray.source.x > x_min + grid.physical_size()) {
        return {};
    }
    if (dy != 0.0) {
        const double ta = (y_max - grid.physical_size() - ray.source.y) / dy;
        const double tb = (y_max - ray.source.y) / dy;
        t0 = std::max(t0, std::min(ta, tb));
        t1 = std::min(t1, std::max(ta, tb));
    } else if (ray.source.y > y_max || ray.source.y < y_max - grid.physical_size()) {
        return {};
    }
    if (t0 >= t1) return {};

    // Entry pixel from the clipped entry point.
    const double ex = ray.source.x + t0 * dx;
    const double ey = ray.source.y + t0 * dy;
    int col = std::clamp(static_cast<int>(std::floor((ex - x_min) / h)), 0, n - 1);
    int row = std::clamp(static_cast<int>(std::floor((y_max - ey) / h)), 0, n - 1);

    // Parameter stride per pixel and parameter of the next grid-line crossing.
    const int step_col = dx > 0.0 ? 1 : (dx < 0.0 ? -1 : 0);
    const int step_row = dy > 0.0 ? -1 : (dy < 0.0 ? 1 : 0);  // +y is upward, rows grow downward
    double t_next_x = kInf, dt_x = kInf;
    if (dx != 0.0) {
        const double boundary = x_min + (col + (dx > 0.0 ? 1 : 0)) * h;
        t_next_x = (boundary - ray.source.x) / dx;
        dt_x = h / std::abs(dx);
    }
    double t_next_y = kInf, dt_y = kInf;
    if (dy != 0.0) {
        const double boundary = y_max - (row + (dy > 0.0 ? 0 : 1)) * h;
        t_next_y = (boundary - ray.source.y) / dy;
        dt_y = h / std::abs(dy);
    }

    std::vector<RaySegment> segments;
    segments.reserve(2 * n);
    double t = t0;
    while (true) {
        const double t_exit = std::min(std::min(t_next_x, t_next_y), t1);
        const double seg = (t_exit - t) * length;
        if (seg > kMinSegmentCm)
            segments.push_back({static_cast<std::int32_t>(col) * n + row, seg});
        if (t_exit >= t1) break;
        if (t_next_x <= t_exit) {
            col += step_col;
            t_next_x += dt_x;
        }
        if (t_next_y <= t_exit) {
            row += step_row;
            t_next_y += dt_y;
        }
        t = t_exit;
        if (col < 0 || col >= n || row < 0 || row >= n) break;
    }
    return segments;
}

Sinogram forward(const ImageGrid& grid, const ScanGeometry& geometry,
                 const Image& image) {
    if (!(image.grid == grid))
        throw DimensionError("forward: image grid does not match the given grid");
    if (image.values.size() != grid.n())
        throw DimensionError("forward: image length does not match grid");

    Sinogram sino{geometry, Eigen::VectorXd::Zero(geometry.m())};
    std::int64_t i = 0;
    for (int a = 0; a < geometry.n_angles; ++a) {
        for (int d = 0; d < geometry.n_detectors; ++d, ++i) {
            double acc = 0.0;
            for (const RaySegment& s : trace_ray(grid, ray_for(geometry, a, d)))
                acc += s.length * image.values[s.pixel];
            sino.values[i] = acc;
        }
    }
    return sino;
}

Image adjoint(const ImageGrid& grid, const ScanGeometry& geometry,
              const Sinogram& sinogram) {
    if (geometry_hash(sinogram.geometry) != geometry_hash(geometry))
        throw DimensionError("adjoint: sinogram geometry does not match");
    if (sinogram.values.size() != geometry.m())
        throw DimensionError("adjoint: sinogram length does not match geometry");

    Image image = zero_image(grid);
    std::int64_t i = 0;
    for (int a = 0; a < geometry.n_angles; ++a) {
        for (int d = 0; d < geometry.n_detectors; ++d, ++i) {
            const double w = sinogram.values[i];
            if (w == 0.0) continue;
            for (const RaySegment& s : trace_ray(grid, ray_for(geometry, a, d)))
                image.values[s.pixel] += s.length * w;
        }
    }
    return image;
}

LinearOperator projector_operator(const ImageGrid& grid,
                                  const ScanGeometry& geometry) {
    LinearOperator op;
    op.n_rows = geometry.m();
    op.n_cols = grid.n();
    op.apply = [grid, geometry](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        out = forward(grid, geometry, Image{grid, x}).values;
    };
    op.apply_transpose = [grid, geometry](const Eigen::VectorXd& y,
                                          Eigen::VectorXd& out) {
        out = adjoint(grid, geometry, Sinogram{geometry, y}).values;
    };
    return op;
}

SystemMatrix::SystemMatrix(const ImageGrid& grid, const ScanGeometry& geometry)
    : n_cols_(grid.n()) {
    const std::int64_t m = geometry.m();
    row_start_.reserve(m + 1);
    row_start_.push_back(0);
    for (int a = 0; a < geometry.n_angles; ++a) {
        for (int d = 0; d < geometry.n_detectors; ++d) {
            for (const RaySegment& s : trace_ray(grid, ray_for(geometry, a, d))) {
                column_.push_back(s.pixel);
                value_.push_back(s.length);
            }
            row_start_.push_back(static_cast<std::int64_t>(value_.size()));
        }
    }
}

void SystemMatrix::apply(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    if (x.size() != cols()) throw DimensionError("SystemMatrix::apply: bad length");
    out.resize(rows());
    const Eigen::Index m = rows();
    for (Eigen::Index i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::int64_t k = row_start_[i]; k < row_start_[i + 1]; ++k)
            acc += value_[k] * x[column_[k]];
        out[i] = acc;
    }
}

void SystemMatrix::apply_transpose(const Eigen::VectorXd& y,
                                   Eigen::VectorXd& out) const {
    if (y.size() != rows())
        throw DimensionError("SystemMatrix::apply_transpose: bad length");
    out = Eigen::VectorXd::Zero(cols());
    const Eigen::Index m = rows();
    for (Eigen::Index i = 0; i < m; ++i) {
        const double w = y[i];
        if (w == 0.0) continue;
        for (std::int64_t k = row_start_[i]; k < row_start_[i + 1]; ++k)
            out[column_[k]] += value_[k] * w;
    }
}

LinearOperator SystemMatrix::as_operator() const {
    // Captures `this`; the SystemMatrix must outlive the operator.
    LinearOperator op;
    op.n_rows = rows();
    op.n_cols = cols();
    op.apply = [this](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        apply(x, out);
    };
    op.apply_transpose = [this](const Eigen::VectorXd& y, Eigen::VectorXd& out) {
        apply_transpose(y, out);
    };
    return op;
}

}  // namespace pipect
