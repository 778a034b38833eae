#include "pipect/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

#include "pipect/rng.hpp"

namespace pipect {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double a) {
    while (a > kPi) a -= 2.0 * kPi;
    while (a < -kPi) a += 2.0 * kPi;
    return a;
}

void validate_spec(const PipeSpec& spec) {
    for (std::size_t k = 0; k < spec.layers.size(); ++k) {
        const auto& layer = spec.layers[k];
        if (layer.region < 1)
            throw ConfigError("pipe spec: layer region indices start at 1");
        if (layer.inner_radius_cm < 0.0 ||
            !(layer.outer_radius_cm > layer.inner_radius_cm))
            throw ConfigError("pipe spec: layer radii must satisfy 0 <= inner < outer");
        if (k > 0 && spec.layers[k].inner_radius_cm <
                         spec.layers[k - 1].outer_radius_cm - 1e-12)
            throw ConfigError("pipe spec: layers must nest without overlap "
                              "(listed innermost first)");
    }
    for (const auto& inc : spec.inclusions) {
        if (!(inc.width_mm > 0.0))
            throw ConfigError("pipe spec: inclusion width must be positive");
    }
}

void check_fits(const PipeSpec& spec, const ImageGrid& grid) {
    if (spec.layers.empty()) return;
    const double reach =
        spec.layers.back().outer_radius_cm + norm(spec.center_offset);
    if (reach > 0.5 * grid.physical_size() + 1e-12)
        throw ConfigError("pipe spec: outermost annulus exceeds the grid extent");
}

bool inclusion_covers(const Inclusion& inc, const PipeLayer& host, double r,
                      double theta) {
    const double half_width = 0.05 * inc.width_mm;  // mm -> cm, half
    const double dtheta = wrap_angle(theta - inc.angle_deg * kPi / 180.0);
    if (inc.shape == InclusionShape::RadialBar) {
        return r >= host.inner_radius_cm && r < host.outer_radius_cm &&
               std::abs(r * std::sin(dtheta)) <= half_width &&
               std::cos(dtheta) > 0.0;
    }
    const double rc =
        inc.radius_cm.value_or(0.5 * (host.inner_radius_cm + host.outer_radius_cm));
    return std::abs(r - rc) <= half_width &&
           std::abs(rc * dtheta) <= 0.5 * inc.length_cm;
}

}  // namespace

const PipeLayer& PipeSpec::layer_of_region(int region) const {
    for (const auto& layer : layers)
        if (layer.region == region) return layer;
    throw ConfigError("pipe spec: no layer with region " + std::to_string(region));
}

const PipeLayer& PipeSpec::outermost() const {
    if (layers.empty()) throw ConfigError("pipe spec: no layers");
    return layers.back();
}

PipeSpec pipe_spec_from_json(const nlohmann::json& j) {
    PipeSpec spec;
    if (j.contains("background_region"))
        spec.background_region = j.at("background_region").get<int>();
    if (j.contains("center_offset_cm")) {
        const auto& c = j.at("center_offset_cm");
        spec.center_offset = {c.at(0).get<double>(), c.at(1).get<double>()};
    }
    for (const auto& item : j.value("layers", nlohmann::json::array())) {
        PipeLayer layer;
        layer.region = item.at("region").get<int>();
        layer.inner_radius_cm = item.at("inner_radius_cm").get<double>();
        layer.outer_radius_cm = item.at("outer_radius_cm").get<double>();
        layer.material = item.at("material").get<std::string>();
        spec.layers.push_back(std::move(layer));
    }
    for (const auto& item : j.value("inclusions", nlohmann::json::array())) {
        Inclusion inc;
        const std::string shape = item.at("shape").get<std::string>();
        if (shape == "radial-bar") inc.shape = InclusionShape::RadialBar;
        else if (shape == "tangential-bar") inc.shape = InclusionShape::TangentialBar;
        else throw ConfigError("pipe spec: unknown inclusion shape '" + shape + "'");
        inc.width_mm = item.at("width_mm").get<double>();
        inc.angle_deg = item.at("angle_deg").get<double>();
        inc.material = item.at("material").get<std::string>();
        inc.host_region = item.value("host_region", 0);
        inc.length_cm = item.value("length_cm", 3.0);
        if (item.contains("radius_cm")) inc.radius_cm = item.at("radius_cm").get<double>();
        spec.inclusions.push_back(std::move(inc));
    }
    validate_spec(spec);
    return spec;
}

nlohmann::json pipe_spec_to_json(const PipeSpec& spec) {
    nlohmann::json j;
    j["background_region"] = spec.background_region;
    j["center_offset_cm"] = {spec.center_offset.x, spec.center_offset.y};
    j["layers"] = nlohmann::json::array();
    for (const auto& layer : spec.layers)
        j["layers"].push_back({{"region", layer.region},
                               {"inner_radius_cm", layer.inner_radius_cm},
                               {"outer_radius_cm", layer.outer_radius_cm},
                               {"material", layer.material}});
    j["inclusions"] = nlohmann::json::array();
    for (const auto& inc : spec.inclusions) {
        nlohmann::json item{
            {"shape", inc.shape == InclusionShape::RadialBar ? "radial-bar"
                                                             : "tangential-bar"},
            {"width_mm", inc.width_mm},
            {"angle_deg", inc.angle_deg},
            {"material", inc.material},
            {"host_region", inc.host_region},
            {"length_cm", inc.length_cm}};
        if (inc.radius_cm) item["radius_cm"] = *inc.radius_cm;
        j["inclusions"].push_back(std::move(item));
    }
    return j;
}

PipeSpec load_pipe_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open pipe spec file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("pipe spec file '" + path + "': " + e.what());
    }
    return pipe_spec_from_json(j);
}

std::int64_t MaskSet::total_masked() const {
    std::int64_t total = 0;
    for (const auto& mask : indices) total += static_cast<std::int64_t>(mask.size());
    return total;
}

Eigen::VectorXd MaskSet::binary(int region) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    for (auto idx : indices.at(region - 1)) v[idx] = 1.0;
    return v;
}

std::vector<std::int32_t> region_labels(const PipeSpec& spec, const ImageGrid& grid) {
    validate_spec(spec);
    check_fits(spec, grid);

    const int n = grid.n_side();
    std::vector<std::int32_t> labels(grid.n(), spec.background_region);
    for (int col = 0; col < n; ++col) {
        for (int row = 0; row < n; ++row) {
            const Vec2 c = grid.pixel_center(row, col) - spec.center_offset;
            const double r = norm(c);
            for (const auto& layer : spec.layers) {
                if (r >= layer.inner_radius_cm && r < layer.outer_radius_cm) {
                    labels[static_cast<std::int64_t>(col) * n + row] = layer.region;
                    break;
                }
            }
        }
    }
    return labels;
}

Image build_phantom(const PipeSpec& spec, const ImageGrid& grid,
                    const AttenuationTable& table) {
    const auto labels = region_labels(spec, grid);
    const int n = grid.n_side();

    Image image{grid, Eigen::VectorXd(grid.n())};
    for (int col = 0; col < n; ++col) {
        for (int row = 0; row < n; ++row) {
            const std::int64_t j = static_cast<std::int64_t>(col) * n + row;
            double value = table.alpha(labels[j]);
            if (!spec.inclusions.empty() && !spec.layers.empty()) {
                const Vec2 c = grid.pixel_center(row, col) - spec.center_offset;
                const double r = norm(c);
                const double theta = std::atan2(c.y, c.x);
                for (const auto& inc : spec.inclusions) {
                    const PipeLayer& host =
                        inc.host_region > 0 ? spec.layer_of_region(inc.host_region)
                                            : spec.outermost();
                    if (labels[j] == host.region &&
                        inclusion_covers(inc, host, r, theta))
                        value = table.alpha(table.region_of(inc.material));
                }
            }
            image.values[j] = value;
        }
    }
    return image;
}

MaskSet build_masks(const PipeSpec& spec, const ImageGrid& grid, int erosion_px) {
    if (erosion_px < 0) throw ConfigError("build_masks: erosion_px must be >= 0");
    const auto labels = region_labels(spec, grid);
    const int n = grid.n_side();

    int p = spec.background_region;
    for (const auto& layer : spec.layers) p = std::max(p, layer.region);

    MaskSet set;
    set.p = p;
    set.n = grid.n();
    set.indices.resize(p);

    std::vector<char> mask(labels.size()), next(labels.size());
    for (int region = 1; region <= p; ++region) {
        for (std::size_t j = 0; j < labels.size(); ++j)
            mask[j] = labels[j] == region ? 1 : 0;

        // Iterated 4-neighborhood erosion; the domain edge does not erode
        // (only boundaries between regions produce safety bands).
        for (int it = 0; it < erosion_px; ++it) {
            for (int col = 0; col < n; ++col) {
                for (int row = 0; row < n; ++row) {
                    const std::int64_t j = static_cast<std::int64_t>(col) * n + row;
                    char keep = mask[j];
                    if (keep) {
                        if (row > 0) keep &= mask[j - 1];
                        if (row < n - 1) keep &= mask[j + 1];
                        if (col > 0) keep &= mask[j - n];
                        if (col < n - 1) keep &= mask[j + n];
                    }
                    next[j] = keep;
                }
            }
            mask.swap(next);
        }

        auto& idx = set.indices[region - 1];
        for (std::size_t j = 0; j < mask.size(); ++j)
            if (mask[j]) idx.push_back(static_cast<std::int32_t>(j));
        if (idx.empty())
            throw ConfigError("build_masks: mask for region " + std::to_string(region) +
                              " is empty (erosion too large or region missing)");
    }
    return set;
}

int default_erosion_px(int n_side) {
    return static_cast<int>(std::lround(2.0 * n_side / 512.0));
}

SimulatedSinogram simulate_sinogram(const PipeSpec& spec, const ImageGrid& fine_grid,
                                    const ScanGeometry& geometry,
                                    const AttenuationTable& table, double noise_rel,
                                    std::uint64_t seed) {
    if (noise_rel < 0.0)
        throw ConfigError("simulate_sinogram: noise_rel must be >= 0");

    const Image phantom = build_phantom(spec, fine_grid, table);
    Sinogram sino = forward(fine_grid, geometry, phantom);

    SimulatedSinogram out{std::move(sino), std::numeric_limits<double>::infinity(),
                          0.0, 0.0};
    if (noise_rel == 0.0) return out;

    const double signal_norm = out.sinogram.values.norm();
    const double m = static_cast<double>(geometry.m());
    const double sigma = noise_rel * signal_norm / std::sqrt(m);

    Rng rng = Rng(seed).stream(rng_streams::kSimulateNoise);
    Eigen::VectorXd e(out.sinogram.values.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = sigma * rng.normal();
    out.sinogram.values += e;

    out.sigma = sigma;
    out.realized_noise_rel = signal_norm > 0.0 ? e.norm() / signal_norm : 0.0;
    out.lambda = 1.0 / (sigma * sigma);
    // Snap to the nominal working precision at the standard noise level so
    // that default runs use the same round figure everywhere.
    if (noise_rel == 0.02 && std::abs(out.lambda - 400.0) <= 0.25 * 400.0)
        out.lambda = 400.0;
    return out;
}

ScanGeometry subsample_geometry(const ScanGeometry& geometry, double fraction) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw ConfigError("subsample_angles: fraction must be in (0, 1]");
    if (fraction * geometry.n_angles < 1.0)
        throw ConfigError("subsample_angles: fraction keeps no angles");

    const int stride = static_cast<int>(std::lround(1.0 / fraction));
    if (stride <= 1) return geometry;

    ScanGeometry sub = geometry;
    sub.angles.clear();
    for (int a = 0; a < geometry.n_angles; a += stride)
        sub.angles.push_back(geometry.angles[a]);
    sub.n_angles = static_cast<int>(sub.angles.size());
    return sub;
}

Sinogram subsample_angles(const Sinogram& sinogram, double fraction) {
    const ScanGeometry& g = sinogram.geometry;
    ScanGeometry sub = subsample_geometry(g, fraction);
    if (sub.n_angles == g.n_angles) return sinogram;

    const int stride = static_cast<int>(std::lround(1.0 / fraction));
    Sinogram out{sub, Eigen::VectorXd(sub.m())};
    for (int a = 0; a < sub.n_angles; ++a)
        out.values.segment(static_cast<Eigen::Index>(a) * g.n_detectors, g.n_detectors) =
            sinogram.values.segment(
                static_cast<Eigen::Index>(a) * stride * g.n_detectors, g.n_detectors);
    return out;
}

Image downsample(const Image& fine, int n_side) {
    const int nf = fine.grid.n_side();
    if (n_side < 1 || nf % n_side != 0)
        throw DimensionError("downsample: fine n_side must be a multiple of n_side");
    const int s = nf / n_side;
    const double w = 1.0 / (static_cast<double>(s) * s);

    Image out{ImageGrid(n_side, fine.grid.physical_size()),
              Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_side) * n_side)};
    for (int col = 0; col < n_side; ++col) {
        for (int row = 0; row < n_side; ++row) {
            double acc = 0.0;
            for (int fc = col * s; fc < (col + 1) * s; ++fc)
                for (int fr = row * s; fr < (row + 1) * s; ++fr)
                    acc += fine.values[static_cast<Eigen::Index>(fc) * nf + fr];
            out.values[static_cast<Eigen::Index>(col) * n_side + row] = acc * w;
        }
    }
    return out;
}

}  // namespace pipect
