#include "mmsr/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "mmsr/errors.hpp"

namespace mmsr {

namespace {

void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(static_cast<std::uint8_t>(x >> 24));
    v.push_back(static_cast<std::uint8_t>(x >> 16));
    v.push_back(static_cast<std::uint8_t>(x >> 8));
    v.push_back(static_cast<std::uint8_t>(x));
}

void write_chunk(std::ofstream& out, const char type[4], const std::vector<std::uint8_t>& data) {
    std::vector<std::uint8_t> hdr;
    put_u32(hdr, static_cast<std::uint32_t>(data.size()));
    out.write(reinterpret_cast<const char*>(hdr.data()), 4);
    out.write(type, 4);
    if (!data.empty()) out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
    std::vector<std::uint8_t> tail;
    put_u32(tail, static_cast<std::uint32_t>(crc));
    out.write(reinterpret_cast<const char*>(tail.data()), 4);
}

} // namespace

void write_png16(const std::string& path, const std::vector<std::uint16_t>& pixels, int width,
                 int height) {
    if (width <= 0 || height <= 0 ||
        pixels.size() != static_cast<size_t>(width) * static_cast<size_t>(height))
        throw IoError("png pixel buffer does not match dimensions");

    // raw scanlines: filter byte 0 + big-endian 16-bit samples
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<size_t>(height) * (1 + 2 * static_cast<size_t>(width)));
    for (int i = 0; i < height; ++i) {
        raw.push_back(0);
        for (int j = 0; j < width; ++j) {
            const std::uint16_t v = pixels[static_cast<size_t>(i) * width + j];
            raw.push_back(static_cast<std::uint8_t>(v >> 8));
            raw.push_back(static_cast<std::uint8_t>(v & 0xff));
        }
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw IoError("png compression failed");
    compressed.resize(bound);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<std::uint8_t> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(width));
    put_u32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(16); // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);  // deflate
    ihdr.push_back(0);  // filter
    ihdr.push_back(0);  // no interlace
    write_chunk(out, "IHDR", ihdr);
    write_chunk(out, "IDAT", compressed);
    write_chunk(out, "IEND", {});
    if (!out) throw IoError("write failed for " + path);
}

} // namespace mmsr
