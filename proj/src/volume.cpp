#include "mmsr/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "mmsr/nifti.hpp"

namespace mmsr {

std::string modality_name(Modality m) {
    switch (m) {
        case Modality::clinical: return "clinical";
        case Modality::micro: return "micro";
        case Modality::synthetic_micro: return "synthetic-micro";
    }
    return "clinical";
}

Modality modality_from_name(const std::string& s) {
    if (s == "clinical") return Modality::clinical;
    if (s == "micro") return Modality::micro;
    if (s == "synthetic-micro") return Modality::synthetic_micro;
    throw ParseError("unknown modality: " + s);
}

void CTVolume::allocate(int x, int y, int z, double fill) {
    if (x <= 0 || y <= 0 || z <= 0) throw ShapeError("non-positive volume dimension");
    nx = x;
    ny = y;
    nz = z;
    voxels.assign(static_cast<size_t>(x) * y * z, fill);
}

ImagePatch CTVolume::axial_slice(int z) const {
    if (z < 0 || z >= nz) throw ShapeError("slice index out of range");
    ImagePatch p(ny, nx);
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) p.at(y, x) = at(x, y, z);
    return p;
}

void CTVolume::set_axial_slice(int z, const ImagePatch& p) {
    if (z < 0 || z >= nz || p.height != ny || p.width != nx)
        throw ShapeError("slice does not fit volume");
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) at(x, y, z) = p.at(y, x);
}

void CTVolume::validate() const {
    if (voxels.empty()) throw ShapeError("empty volume");
    if (voxels.size() != static_cast<size_t>(nx) * ny * nz)
        throw ShapeError("volume buffer does not match dimensions");
    if (!(sx > 0 && sy > 0 && sz > 0)) throw ParamError("non-positive voxel spacing");
}

void LungMask::allocate(int x, int y, int z) {
    nx = x;
    ny = y;
    nz = z;
    mask.assign(static_cast<size_t>(x) * y * z, 0);
}

size_t LungMask::count() const {
    size_t n = 0;
    for (auto v : mask) n += v ? 1 : 0;
    return n;
}

double NormParams::to_normalized(double v) const {
    const double c = std::clamp(v, lo, hi);
    return 2.0 * (c - lo) / (hi - lo) - 1.0;
}

double NormParams::to_raw(double v) const { return lo + (v + 1.0) * 0.5 * (hi - lo); }

std::pair<CTVolume, NormParams> normalize(const CTVolume& vol, const LungMask* mask) {
    vol.validate();
    std::vector<double> vals;
    if (mask) {
        if (mask->nx != vol.nx || mask->ny != vol.ny || mask->nz != vol.nz)
            throw ShapeError("mask does not match volume");
        vals.reserve(mask->count());
        for (size_t i = 0; i < vol.voxels.size(); ++i)
            if (mask->mask[i]) vals.push_back(vol.voxels[i]);
        if (vals.empty()) throw NormalizationError("mask selects no voxels");
    } else {
        vals = vol.voxels;
    }
    std::sort(vals.begin(), vals.end());
    auto pct = [&](double p) {
        const double idx = p / 100.0 * (static_cast<double>(vals.size()) - 1.0);
        return vals[static_cast<size_t>(std::llround(idx))];
    };
    NormParams np{pct(0.5), pct(99.5)};
    if (!(np.hi > np.lo)) throw NormalizationError("degenerate intensity range");
    CTVolume out = vol;
    for (auto& v : out.voxels) v = np.to_normalized(v);
    return {out, np};
}

CTVolume denormalize(const CTVolume& vol, const NormParams& p) {
    CTVolume out = vol;
    for (auto& v : out.voxels) v = p.to_raw(v);
    return out;
}

namespace {
bool ends_with(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}
} // namespace

CTVolume load_volume(const std::string& path, Modality modality) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path);
    if (ends_with(path, ".nii") || ends_with(path, ".nii.gz")) {
        CTVolume v = load_nifti(path);
        v.modality = modality;
        if (v.id.empty()) v.id = std::filesystem::path(path).stem().string();
        return v;
    }
    if (ends_with(path, ".raw")) return load_raw_volume(path, modality);
    throw FormatError("unrecognized volume format: " + path);
}

void save_volume(const CTVolume& vol, const std::string& path) {
    if (ends_with(path, ".nii") || ends_with(path, ".nii.gz")) {
        save_nifti(vol, path);
        return;
    }
    if (ends_with(path, ".raw")) {
        save_raw_volume(vol, path);
        return;
    }
    throw FormatError("unrecognized volume format: " + path);
}

CTVolume load_raw_volume(const std::string& raw_path, Modality modality) {
    const std::string sidecar = raw_path.substr(0, raw_path.size() - 4) + ".json";
    if (!std::filesystem::exists(sidecar)) throw ParseError("missing sidecar: " + sidecar);
    nlohmann::json j;
    try {
        std::ifstream in(sidecar);
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError(std::string("bad sidecar: ") + e.what());
    }
    CTVolume v;
    try {
        auto shape = j.at("shape");
        v.allocate(shape.at(0).get<int>(), shape.at(1).get<int>(), shape.at(2).get<int>());
        auto sp = j.at("spacing");
        v.sx = sp.at(0).get<double>();
        v.sy = sp.at(1).get<double>();
        v.sz = sp.at(2).get<double>();
        v.unit = j.value("unit", "mm");
        v.modality = j.contains("modality") ? modality_from_name(j["modality"].get<std::string>())
                                            : modality;
        v.id = j.value("id", std::filesystem::path(raw_path).stem().string());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad sidecar fields: ") + e.what());
    }
    const double slope = j.value("slope", 1.0);
    const double intercept = j.value("intercept", 0.0);

    std::ifstream in(raw_path, std::ios::binary);
    std::vector<std::int16_t> buf(v.voxel_count());
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 2));
    if (static_cast<size_t>(in.gcount()) != buf.size() * 2)
        throw ParseError("raw file shorter than sidecar shape: " + raw_path);
    for (size_t i = 0; i < buf.size(); ++i) v.voxels[i] = buf[i] * slope + intercept;
    v.validate();
    return v;
}

void save_raw_volume(const CTVolume& vol, const std::string& raw_path) {
    vol.validate();
    double lo = vol.voxels[0], hi = vol.voxels[0];
    for (double v : vol.voxels) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    // map the data range onto int16 and record the inverse in the sidecar
    double slope = hi > lo ? (hi - lo) / 65000.0 : 1.0;
    double intercept = (hi + lo) / 2.0;
    std::vector<std::int16_t> buf(vol.voxel_count());
    for (size_t i = 0; i < buf.size(); ++i)
        buf[i] = static_cast<std::int16_t>(std::llround((vol.voxels[i] - intercept) / slope));

    nlohmann::json j;
    j["shape"] = {vol.nx, vol.ny, vol.nz};
    j["spacing"] = {vol.sx, vol.sy, vol.sz};
    j["unit"] = vol.unit;
    j["modality"] = modality_name(vol.modality);
    j["id"] = vol.id;
    j["slope"] = slope;
    j["intercept"] = intercept;

    const std::string sidecar = raw_path.substr(0, raw_path.size() - 4) + ".json";
    std::ofstream out(raw_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + raw_path);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * 2));
    std::ofstream js(sidecar);
    js << j.dump(2) << "\n";
}

} // namespace mmsr
