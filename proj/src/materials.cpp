#include "pipect/materials.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace pipect {

namespace {

void validate(const Material& m) {
    if (!(m.kappa > 0.0))
        throw ConfigError("material '" + m.name + "': kappa must be positive");
    if (m.rho < 0.0)
        throw ConfigError("material '" + m.name + "': rho must be nonnegative");
    if (m.buildup.has_value() != m.width_cm.has_value())
        throw ConfigError("material '" + m.name +
                          "': buildup and width_cm must be given together");
    if (m.buildup && !(*m.width_cm > 0.0))
        throw ConfigError("material '" + m.name + "': width_cm must be positive");
}

}  // namespace

double attenuation(const Material& material) {
    validate(material);
    if (material.buildup)
        throw ConfigError("material '" + material.name +
                          "' carries a buildup factor; use attenuation_with_buildup");
    return material.kappa * material.rho;
}

double attenuation_with_buildup(const Material& material) {
    validate(material);
    if (!material.buildup)
        throw ConfigError("material '" + material.name + "' has no buildup factor");
    if (*material.buildup < 1.0)
        throw ConfigError("material '" + material.name +
                          "': buildup factor must be >= 1");
    return material.kappa * material.rho -
           std::log(*material.buildup) / *material.width_cm;
}

const AttenuationTable::Entry& AttenuationTable::entry(int region) const {
    auto it = entries.find(region);
    if (it == entries.end())
        throw ConfigError("attenuation table has no region " + std::to_string(region));
    return it->second;
}

int AttenuationTable::region_of(const std::string& material_name) const {
    for (const auto& [region, entry] : entries)
        if (entry.material.name == material_name) return region;
    throw ConfigError("attenuation table has no material '" + material_name + "'");
}

std::vector<Material> materials_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ConfigError("materials file: expected a JSON list");
    std::vector<Material> out;
    for (const auto& item : j) {
        Material m;
        m.name = item.at("name").get<std::string>();
        m.kappa = item.at("kappa_cm2_per_g").get<double>();
        m.rho = item.at("rho_g_per_cm3").get<double>();
        if (item.contains("buildup")) m.buildup = item.at("buildup").get<double>();
        if (item.contains("width_cm")) m.width_cm = item.at("width_cm").get<double>();
        validate(m);
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<Material> load_materials(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open materials file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("materials file '" + path + "': " + e.what());
    }
    return materials_from_json(j);
}

AttenuationTable build_attenuation_table(const std::vector<Material>& materials,
                                         std::vector<std::string>* warnings) {
    AttenuationTable table;
    int region = 1;
    for (const auto& m : materials) {
        const double alpha = m.buildup ? attenuation_with_buildup(m) : attenuation(m);
        if (alpha < 0.0 && warnings)
            warnings->push_back("material '" + m.name +
                                "': buildup correction yields negative attenuation (" +
                                std::to_string(alpha) + " 1/cm); check constants");
        table.entries.emplace(region, AttenuationTable::Entry{m, alpha});
        ++region;
    }
    return table;
}

}  // namespace pipect
