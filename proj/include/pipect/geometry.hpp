#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pipect/errors.hpp"

namespace pipect {

/// 2D point/vector, coordinates in cm.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

/// Square pixel grid centered on the rotation axis.
///
/// The domain is [-L/2, L/2]^2 with L = physical_size_cm. Pixels are square,
/// side L / n_side. Images over the grid are vectorized column-major:
/// index j = column * n_side + row, with row 0 at the top edge (+y) and rows
/// running downward.
class ImageGrid {
  public:
    ImageGrid(int n_side, double physical_size_cm);

    int n_side() const { return n_side_; }
    double physical_size() const { return physical_size_; }
    double pixel_size() const { return physical_size_ / n_side_; }
    std::int64_t n() const {
        return static_cast<std::int64_t>(n_side_) * n_side_;
    }

    double x_min() const { return -0.5 * physical_size_; }
    double y_max() const { return 0.5 * physical_size_; }

    /// Center coordinates of pixel (row, col).
    Vec2 pixel_center(int row, int col) const {
        const double h = pixel_size();
        return {x_min() + (col + 0.5) * h, y_max() - (row + 0.5) * h};
    }

    friend bool operator==(const ImageGrid& a, const ImageGrid& b) {
        return a.n_side_ == b.n_side_ && a.physical_size_ == b.physical_size_;
    }

  private:
    int n_side_;
    double physical_size_;
};

/// One source -> detector-pixel-center line.
struct Ray {
    Vec2 source;
    Vec2 detector;
};

/// Offset fan-beam acquisition geometry.
///
/// Convention: angles are counterclockwise, angle 0 along +x. At angle theta
/// let u = (cos t, sin t) and v = (-sin t, cos t). The source sits at
/// source_to_axis * u and the flat detector panel is centered at
/// -axis_to_detector * u, both then translated by source_offset * v. The
/// translation displaces the beam midline from the rotation axis, which is
/// what makes the scan an offset scan. Detector pixel centers are spaced
/// detector_pixel_size apart along v.
struct ScanGeometry {
    int n_angles = 0;
    std::vector<double> angles;  // radians
    double source_to_axis = 0.0;
    double axis_to_detector = 0.0;
    double source_offset = 0.0;
    int n_detectors = 0;
    double detector_pixel_size = 0.0;

    /// Total sinogram length m = n_angles * n_detectors.
    std::int64_t m() const {
        return static_cast<std::int64_t>(n_angles) * n_detectors;
    }

    double panel_width() const { return n_detectors * detector_pixel_size; }
};

/// JSON keys: n_angles, angles_deg (optional explicit list),
/// source_to_axis_cm, axis_to_detector_cm, source_offset_cm, n_detectors,
/// detector_pixel_size_cm, grid_n, grid_size_cm.
///
/// Shipped defaults approximate the prototype pipe-scanner setup; the true
/// bench dimensions are not published, so every value here is overridable.
struct GeometryConfig {
    int n_angles = 360;
    std::vector<double> angles_deg;  // empty -> equi-angular over [0, 2pi)
    double source_to_axis_cm = 60.0;
    double axis_to_detector_cm = 40.0;
    double source_offset_cm = 15.0;
    int n_detectors = 510;
    double detector_pixel_size_cm = 0.08;
    int grid_n = 512;
    double grid_size_cm = 55.0;
};

GeometryConfig geometry_config_from_json(const nlohmann::json& j);
nlohmann::json geometry_config_to_json(const GeometryConfig& cfg);

/// Validates the config and derives the angle list.
ScanGeometry build_scan_geometry(const GeometryConfig& cfg);

ImageGrid build_image_grid(const GeometryConfig& cfg);

/// Ray for one (view angle, detector pixel) pair; throws std::out_of_range
/// on bad indices.
Ray ray_for(const ScanGeometry& geometry, int angle_index, int detector_index);

/// FNV-1a hash over the canonical serialization of the geometry; used to
/// match sinogram files against the configured acquisition.
std::uint64_t geometry_hash(const ScanGeometry& geometry);

std::string geometry_hash_hex(const ScanGeometry& geometry);

}  // namespace pipect
