#include "pipect/geometry.hpp"

#include <cstdio>
#include <numbers>

#include <nlohmann/json.hpp>

namespace pipect {

namespace {
constexpr double kPi = std::numbers::pi;
}

ImageGrid::ImageGrid(int n_side, double physical_size_cm)
    : n_side_(n_side), physical_size_(physical_size_cm) {
    if (n_side < 1) throw ConfigError("ImageGrid: n_side must be >= 1");
    if (!(physical_size_cm > 0.0))
        throw ConfigError("ImageGrid: physical_size must be positive");
}

GeometryConfig geometry_config_from_json(const nlohmann::json& j) {
    GeometryConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "n_angles") cfg.n_angles = value.get<int>();
        else if (key == "angles_deg") cfg.angles_deg = value.get<std::vector<double>>();
        else if (key == "source_to_axis_cm") cfg.source_to_axis_cm = value.get<double>();
        else if (key == "axis_to_detector_cm") cfg.axis_to_detector_cm = value.get<double>();
        else if (key == "source_offset_cm") cfg.source_offset_cm = value.get<double>();
        else if (key == "n_detectors") cfg.n_detectors = value.get<int>();
        else if (key == "detector_pixel_size_cm") cfg.detector_pixel_size_cm = value.get<double>();
        else if (key == "grid_n") cfg.grid_n = value.get<int>();
        else if (key == "grid_size_cm") cfg.grid_size_cm = value.get<double>();
        else throw ConfigError("geometry config: unknown key '" + key + "'");
    }
    return cfg;
}

nlohmann::json geometry_config_to_json(const GeometryConfig& cfg) {
    nlohmann::json j{{"n_angles", cfg.n_angles},
                     {"source_to_axis_cm", cfg.source_to_axis_cm},
                     {"axis_to_detector_cm", cfg.axis_to_detector_cm},
                     {"source_offset_cm", cfg.source_offset_cm},
                     {"n_detectors", cfg.n_detectors},
                     {"detector_pixel_size_cm", cfg.detector_pixel_size_cm},
                     {"grid_n", cfg.grid_n},
                     {"grid_size_cm", cfg.grid_size_cm}};
    if (!cfg.angles_deg.empty()) j["angles_deg"] = cfg.angles_deg;
    return j;
}

ScanGeometry build_scan_geometry(const GeometryConfig& cfg) {
    if (cfg.n_angles < 1) throw ConfigError("geometry: n_angles must be >= 1");
    if (cfg.n_detectors < 1) throw ConfigError("geometry: n_detectors must be >= 1");
    if (!(cfg.source_to_axis_cm > 0.0))
        throw ConfigError("geometry: source_to_axis_cm must be positive");
    if (!(cfg.axis_to_detector_cm > 0.0))
        throw ConfigError("geometry: axis_to_detector_cm must be positive");
    if (!(cfg.detector_pixel_size_cm > 0.0))
        throw ConfigError("geometry: detector_pixel_size_cm must be positive");

    ScanGeometry g;
    g.n_angles = cfg.n_angles;
    g.source_to_axis = cfg.source_to_axis_cm;
    g.axis_to_detector = cfg.axis_to_detector_cm;
    g.source_offset = cfg.source_offset_cm;
    g.n_detectors = cfg.n_detectors;
    g.detector_pixel_size = cfg.detector_pixel_size_cm;

    if (cfg.angles_deg.empty()) {
        g.angles.resize(cfg.n_angles);
        for (int k = 0; k < cfg.n_angles; ++k)
            g.angles[k] = 2.0 * kPi * k / cfg.n_angles;
    } else {
        if (static_cast<int>(cfg.angles_deg.size()) != cfg.n_angles)
            throw ConfigError("geometry: angles_deg length does not match n_angles");
        g.angles.resize(cfg.n_angles);
        for (int k = 0; k < cfg.n_angles; ++k)
            g.angles[k] = cfg.angles_deg[k] * kPi / 180.0;
    }
    return g;
}

ImageGrid build_image_grid(const GeometryConfig& cfg) {
    return ImageGrid(cfg.grid_n, cfg.grid_size_cm);
}

Ray ray_for(const ScanGeometry& geometry, int angle_index, int detector_index) {
    if (angle_index < 0 || angle_index >= geometry.n_angles)
        throw std::out_of_range("ray_for: angle_index out of range");
    if (detector_index < 0 || detector_index >= geometry.n_detectors)
        throw std::out_of_range("ray_for: detector_index out of range");

    const double theta = geometry.angles[angle_index];
    const Vec2 u{std::cos(theta), std::sin(theta)};
    const Vec2 v{-std::sin(theta), std::cos(theta)};

    // Detector pixel centers, symmetric about the (offset) panel center.
    const double t = (detector_index - 0.5 * (geometry.n_detectors - 1)) *
                     geometry.detector_pixel_size;

    Ray ray;
    ray.source = geometry.source_to_axis * u + geometry.source_offset * v;
    ray.detector = (-geometry.axis_to_detector) * u +
                   (geometry.source_offset + t) * v;
    return ray;
}

std::uint64_t geometry_hash(const ScanGeometry& geometry) {
    // FNV-1a over a canonical text form; %.17g round-trips doubles.
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto feed = [&h](const char* s) {
        for (; *s; ++s) {
            h ^= static_cast<unsigned char>(*s);
            h *= 0x100000001b3ull;
        }
    };
    char buf[512];
    std::snprintf(buf, sizeof(buf), "na=%d;sta=%.17g;atd=%.17g;off=%.17g;nd=%d;dps=%.17g;",
                  geometry.n_angles, geometry.source_to_axis, geometry.axis_to_detector,
                  geometry.source_offset, geometry.n_detectors,
                  geometry.detector_pixel_size);
    feed(buf);
    for (double a : geometry.angles) {
        std::snprintf(buf, sizeof(buf), "%.17g,", a);
        feed(buf);
    }
    return h;
}

std::string geometry_hash_hex(const ScanGeometry& geometry) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(geometry_hash(geometry)));
    return buf;
}

}  // namespace pipect
