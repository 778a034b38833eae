#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pipect/errors.hpp"

namespace pipect {

/// One pipe material with its constants at the working beam energy.
///
/// kappa is the mass attenuation coefficient (cm^2/g), rho the density
/// (g/cm^3). Dense materials additionally carry a buildup factor B >= 1 and
/// the material width w (cm) the factor was tabulated for.
struct Material {
    std::string name;
    double kappa = 0.0;
    double rho = 0.0;
    std::optional<double> buildup;
    std::optional<double> width_cm;
};

/// Linear attenuation coefficient kappa * rho (1/cm).
///
/// Only valid for materials without a buildup factor; use
/// attenuation_with_buildup for those.
double attenuation(const Material& material);

/// Linear attenuation coefficient corrected for buildup:
/// kappa * rho - ln(B) / w (natural logarithm).
///
/// The correction accounts for scattered photons reaching the detector, so
/// the result never exceeds kappa * rho. A negative result signals
/// inconsistent constants (B too large for the given width) and is returned
/// as-is rather than clamped so that callers can detect the bad config.
double attenuation_with_buildup(const Material& material);

/// Expected attenuation per pipe region, indexed 1..p in material-file order.
struct AttenuationTable {
    struct Entry {
        Material material;
        double alpha = 0.0;  // 1/cm
    };

    std::map<int, Entry> entries;

    int regions() const { return static_cast<int>(entries.size()); }
    bool has(int region) const { return entries.count(region) != 0; }
    const Entry& entry(int region) const;
    double alpha(int region) const { return entry(region).alpha; }

    /// Region index of the first material with the given name.
    int region_of(const std::string& material_name) const;
};

/// Materials file: JSON list of {name, kappa_cm2_per_g, rho_g_per_cm3,
/// buildup (optional), width_cm (optional)}.
std::vector<Material> materials_from_json(const nlohmann::json& j);
std::vector<Material> load_materials(const std::string& path);

/// Computes alpha for every material (with buildup correction where
/// present). Regions are numbered 1..p in input order. Non-physical results
/// (negative alpha) are kept and reported through `warnings`.
AttenuationTable build_attenuation_table(const std::vector<Material>& materials,
                                         std::vector<std::string>* warnings = nullptr);

}  // namespace pipect
