#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pipect/geometry.hpp"
#include "pipect/materials.hpp"
#include "pipect/projector.hpp"

namespace pipect {

/// One annular pipe layer. Layers are listed innermost first and must nest
/// without overlap.
struct PipeLayer {
    int region = 0;  // index into the attenuation table
    double inner_radius_cm = 0.0;
    double outer_radius_cm = 0.0;
    std::string material;
};

enum class InclusionShape { RadialBar, TangentialBar };

/// Reinforcement-bar cross section embedded in a host layer. Radial bars
/// span the host layer's full radial extent with tangential width
/// `width_mm`; tangential bars run along a circle (radius_cm, defaulting to
/// the host layer's mid radius) with radial width `width_mm` and arc length
/// `length_cm`. Inclusions override the host material in the phantom but are
/// deliberately invisible to the region masks.
struct Inclusion {
    InclusionShape shape = InclusionShape::RadialBar;
    double width_mm = 0.0;
    double angle_deg = 0.0;
    std::string material;
    int host_region = 0;  // 0 -> outermost layer
    double length_cm = 3.0;
    std::optional<double> radius_cm;
};

/// Layered pipe description; all radii relative to the pipe center, which
/// may be offset from the rotation axis.
struct PipeSpec {
    std::vector<PipeLayer> layers;
    Vec2 center_offset;
    std::vector<Inclusion> inclusions;
    int background_region = 1;

    const PipeLayer& layer_of_region(int region) const;
    const PipeLayer& outermost() const;
};

PipeSpec pipe_spec_from_json(const nlohmann::json& j);
nlohmann::json pipe_spec_to_json(const PipeSpec& spec);
PipeSpec load_pipe_spec(const std::string& path);

/// Disjoint per-region pixel index sets over a grid (region i at masks()[i-1]).
struct MaskSet {
    int p = 0;
    std::int64_t n = 0;
    std::vector<std::vector<std::int32_t>> indices;  // sorted, disjoint

    std::int64_t size_of(int region) const {
        return static_cast<std::int64_t>(indices.at(region - 1).size());
    }
    std::int64_t total_masked() const;

    /// Dense 0/1 vector of one mask (test/inspection helper).
    Eigen::VectorXd binary(int region) const;
};

/// Region index per pixel, by annulus containment of the pixel center;
/// pixels outside all layers get the background region. Inclusions are
/// ignored here: they belong to their host layer's region.
std::vector<std::int32_t> region_labels(const PipeSpec& spec, const ImageGrid& grid);

/// Rasterizes attenuation values: innermost containing region wins,
/// inclusions override their host layer.
Image build_phantom(const PipeSpec& spec, const ImageGrid& grid,
                    const AttenuationTable& table);

/// Region masks eroded by erosion_px pixels (4-neighborhood, iterated), so
/// that a safety band along every region boundary belongs to no mask. The
/// domain edge is not treated as a boundary. Erosion that empties a mask is
/// an error.
MaskSet build_masks(const PipeSpec& spec, const ImageGrid& grid, int erosion_px);

/// Default erosion width: 2 px at N = 512, scaled proportionally.
int default_erosion_px(int n_side);

struct SimulatedSinogram {
    Sinogram sinogram;
    double lambda = 0.0;  // noise precision 1/sigma^2; +inf when noiseless
    double sigma = 0.0;
    double realized_noise_rel = 0.0;  // ||e|| / ||A x||
};

/// Simulates d = A_fine x_fine + e on a fine grid (inverse-crime guard:
/// reconstruct on a coarser grid). e is iid Gaussian with
/// sigma = noise_rel * ||A x|| / sqrt(m); deterministic given seed.
///
/// When the realized precision lands near the nominal working value 400
/// at the standard 2% noise level, lambda is snapped to exactly 400.
SimulatedSinogram simulate_sinogram(const PipeSpec& spec, const ImageGrid& fine_grid,
                                    const ScanGeometry& geometry,
                                    const AttenuationTable& table, double noise_rel,
                                    std::uint64_t seed);

/// Keeps every k-th view angle, k = round(1/fraction), preserving
/// equi-angular spacing.
Sinogram subsample_angles(const Sinogram& sinogram, double fraction);

/// The acquisition left after angle subsampling (same kept-angle rule).
ScanGeometry subsample_geometry(const ScanGeometry& geometry, double fraction);

/// Area-averaged downsample of a fine-grid image to n_side (fine n_side must
/// be an integer multiple).
Image downsample(const Image& fine, int n_side);

}  // namespace pipect
