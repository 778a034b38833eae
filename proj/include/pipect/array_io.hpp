#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pipect/errors.hpp"

namespace pipect {

/// Flat binary array format (".arr"): one JSON header line
/// {"magic":"pipect-arr","version":1,"shape":[...],"dtype":"f64le","meta":{...}}
/// followed by the payload as little-endian 64-bit floats.
///
/// Payload order is documented per producer: images are column-major,
/// sinograms angle-major. Writing is deterministic, so equal inputs give
/// byte-identical files.
struct ArrayFile {
    std::vector<std::int64_t> shape;
    nlohmann::json meta;
    std::vector<double> payload;

    std::int64_t size() const;
};

void write_array(const std::string& path, const std::vector<std::int64_t>& shape,
                 const double* data, std::int64_t count, const nlohmann::json& meta);

ArrayFile read_array(const std::string& path);

}  // namespace pipect
