#include "pipect/array_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace pipect {

static_assert(std::endian::native == std::endian::little,
              "the .arr payload is little-endian; big-endian hosts need a swap");

std::int64_t ArrayFile::size() const {
    std::int64_t total = 1;
    for (auto s : shape) total *= s;
    return total;
}

void write_array(const std::string& path, const std::vector<std::int64_t>& shape,
                 const double* data, std::int64_t count, const nlohmann::json& meta) {
    std::int64_t expected = 1;
    for (auto s : shape) {
        if (s <= 0) throw ConfigError("write_array: shape entries must be positive");
        expected *= s;
    }
    if (expected != count)
        throw DimensionError("write_array: payload length does not match shape");

    nlohmann::json header{{"magic", "pipect-arr"},
                          {"version", 1},
                          {"shape", shape},
                          {"dtype", "f64le"},
                          {"meta", meta.is_null() ? nlohmann::json::object() : meta}};

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("write_array: cannot open '" + path + "' for writing");
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(count * sizeof(double)));
    if (!out) throw ConfigError("write_array: write failed for '" + path + "'");
}

ArrayFile read_array(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("read_array: cannot open '" + path + "'");

    std::string header_line;
    if (!std::getline(in, header_line))
        throw ConfigError("read_array: '" + path + "' has no header line");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_line);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("read_array: bad header in '" + path + "': " + e.what());
    }
    if (header.value("magic", "") != "pipect-arr")
        throw ConfigError("read_array: '" + path + "' is not a pipect-arr file");
    if (header.value("version", 0) != 1)
        throw ConfigError("read_array: unsupported version in '" + path + "'");
    if (header.value("dtype", "") != "f64le")
        throw ConfigError("read_array: unsupported dtype in '" + path + "'");

    ArrayFile file;
    file.shape = header.at("shape").get<std::vector<std::int64_t>>();
    file.meta = header.value("meta", nlohmann::json::object());

    const std::int64_t count = file.size();
    if (count <= 0) throw ConfigError("read_array: bad shape in '" + path + "'");
    file.payload.resize(count);
    in.read(reinterpret_cast<char*>(file.payload.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
        throw ConfigError("read_array: truncated payload in '" + path + "'");
    return file;
}

}  // namespace pipect
