#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pipect {

/// Writes an 8-bit grayscale PNG. `pixels` is row-major, top row first,
/// width * height bytes. Output is deterministic (fixed zlib level).
void write_gray8_png(const std::string& path, int width, int height,
                     const std::vector<std::uint8_t>& pixels);

}  // namespace pipect
