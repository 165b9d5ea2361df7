#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mmsr {

// Deterministic 16-bit grayscale PNG writer (fixed zlib settings, no
// ancillary chunks, so identical input gives identical bytes).
void write_png16(const std::string& path, const std::vector<std::uint16_t>& pixels, int width,
                 int height);

} // namespace mmsr
