#include "mmsr/patches.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace mmsr {

std::vector<PatchSample> sample_patches(const CTVolume& vol, const LungMask& mask, int size,
                                        int count, std::uint64_t seed) {
    vol.validate();
    if (size < 1 || count < 1) throw ParamError("patch size and count must be positive");
    if (size > vol.nx || size > vol.ny) throw ShapeError("patch larger than slice");
    if (mask.nx != vol.nx || mask.ny != vol.ny || mask.nz != vol.nz)
        throw ShapeError("mask does not match volume");

    Rng rng(seed);
    std::vector<PatchSample> out;
    out.reserve(static_cast<size_t>(count));
    const int min_inside = (size * size + 1) / 2;
    const long long max_attempts = 100LL * count;
    long long attempts = 0;
    while (static_cast<int>(out.size()) < count) {
        if (attempts++ >= max_attempts)
            throw SamplingError("no valid patch locations in " + vol.id + " after " +
                                std::to_string(max_attempts) + " attempts");
        const int z = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(vol.nz)));
        const int r = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(vol.ny - size + 1)));
        const int c = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(vol.nx - size + 1)));
        int inside = 0;
        for (int i = 0; i < size; ++i)
            for (int j = 0; j < size; ++j) inside += mask.at(c + j, r + i, z) ? 1 : 0;
        if (inside < min_inside) continue;
        PatchSample ps;
        ps.patch = ImagePatch(size, size);
        for (int i = 0; i < size; ++i)
            for (int j = 0; j < size; ++j)
                ps.patch.at(i, j) = std::clamp(vol.at(c + j, r + i, z), -1.0, 1.0);
        ps.volume_id = vol.id;
        ps.slice_index = z;
        ps.row = r;
        ps.col = c;
        ps.modality = vol.modality;
        out.push_back(std::move(ps));
    }
    return out;
}

void save_patch_cache(const std::vector<PatchSample>& patches, const std::string& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["count"] = patches.size();
    auto& list = manifest["patches"] = nlohmann::json::array();
    char name[32];
    for (size_t i = 0; i < patches.size(); ++i) {
        const auto& p = patches[i];
        std::snprintf(name, sizeof(name), "patch_%06zu.bin", i);
        std::vector<float> buf(p.patch.data.begin(), p.patch.data.end());
        std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
        if (!out) throw IoError("cannot write patch file in " + dir);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
        list.push_back({{"file", name},
                        {"volume_id", p.volume_id},
                        {"slice", p.slice_index},
                        {"row", p.row},
                        {"col", p.col},
                        {"modality", modality_name(p.modality)},
                        {"height", p.patch.height},
                        {"width", p.patch.width}});
    }
    std::ofstream mf(std::filesystem::path(dir) / "manifest.json");
    mf << manifest.dump(2) << "\n";
}

std::vector<PatchSample> load_patch_cache(const std::string& dir) {
    const auto mpath = std::filesystem::path(dir) / "manifest.json";
    if (!std::filesystem::exists(mpath)) throw ParseError("missing patch manifest in " + dir);
    nlohmann::json manifest;
    try {
        std::ifstream in(mpath);
        in >> manifest;
    } catch (const std::exception& e) {
        throw ParseError(std::string("bad patch manifest: ") + e.what());
    }
    std::vector<PatchSample> out;
    for (const auto& e : manifest.at("patches")) {
        PatchSample p;
        const int h = e.at("height").get<int>(), w = e.at("width").get<int>();
        p.patch = ImagePatch(h, w);
        p.volume_id = e.at("volume_id").get<std::string>();
        p.slice_index = e.at("slice").get<int>();
        p.row = e.at("row").get<int>();
        p.col = e.at("col").get<int>();
        p.modality = modality_from_name(e.at("modality").get<std::string>());
        std::ifstream in(std::filesystem::path(dir) / e.at("file").get<std::string>(),
                         std::ios::binary);
        std::vector<float> buf(static_cast<size_t>(h) * w);
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (static_cast<size_t>(in.gcount()) != buf.size() * sizeof(float))
            throw ParseError("truncated patch file in " + dir);
        for (size_t i = 0; i < buf.size(); ++i) p.patch.data[i] = buf[i];
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace mmsr
