#include "mmsr/nifti.hpp"

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <vector>

namespace mmsr {

namespace {

#pragma pack(push, 1)
struct Nifti1Header {
    std::int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    std::int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code, sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4], srow_y[4], srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "nifti header must be 348 bytes");

constexpr std::int16_t DT_UINT8 = 2;
constexpr std::int16_t DT_INT16 = 4;
constexpr std::int16_t DT_INT32 = 8;
constexpr std::int16_t DT_FLOAT32 = 16;
constexpr std::int16_t DT_FLOAT64 = 64;
constexpr std::int16_t DT_UINT16 = 512;

struct GzFile {
    gzFile f = nullptr;
    explicit GzFile(const std::string& path, const char* mode) { f = gzopen(path.c_str(), mode); }
    ~GzFile() {
        if (f) gzclose(f);
    }
    bool ok() const { return f != nullptr; }
    void read_exact(void* dst, size_t n, const std::string& what) {
        if (gzread(f, dst, static_cast<unsigned>(n)) != static_cast<int>(n))
            throw ParseError("truncated nifti (" + what + ")");
    }
    void write_exact(const void* src, size_t n) {
        if (gzwrite(f, src, static_cast<unsigned>(n)) != static_cast<int>(n))
            throw IoError("nifti write failed");
    }
};

} // namespace

CTVolume load_nifti(const std::string& path) {
    GzFile gz(path, "rb");
    if (!gz.ok()) throw IoError("cannot open " + path);
    Nifti1Header h{};
    gz.read_exact(&h, sizeof(h), "header");
    if (h.sizeof_hdr != 348 || std::strncmp(h.magic, "n+1", 3) != 0)
        throw ParseError("not a nifti-1 single file: " + path);
    if (h.dim[0] < 3) throw ParseError("nifti with fewer than 3 dims");
    for (int d = 4; d <= h.dim[0]; ++d)
        if (h.dim[d] > 1) throw ParseError("4D+ nifti not supported");

    CTVolume v;
    v.allocate(h.dim[1], h.dim[2], h.dim[3]);
    v.sx = h.pixdim[1] > 0 ? h.pixdim[1] : 1.0;
    v.sy = h.pixdim[2] > 0 ? h.pixdim[2] : 1.0;
    v.sz = h.pixdim[3] > 0 ? h.pixdim[3] : 1.0;
    v.unit = (h.xyzt_units & 0x07) == 3 ? "um" : "mm";
    v.id = std::filesystem::path(path).filename().string();

    const long offset = static_cast<long>(h.vox_offset);
    if (offset < 348) throw ParseError("bad vox_offset");
    std::vector<char> skip(static_cast<size_t>(offset) - sizeof(h));
    if (!skip.empty()) gz.read_exact(skip.data(), skip.size(), "extension");

    const size_t n = v.voxel_count();
    const double slope = h.scl_slope != 0.0f ? h.scl_slope : 1.0;
    const double inter = h.scl_inter;
    auto read_as = [&](auto tag) {
        using T = decltype(tag);
        std::vector<T> buf(n);
        gz.read_exact(buf.data(), n * sizeof(T), "voxels");
        for (size_t i = 0; i < n; ++i) v.voxels[i] = buf[i] * slope + inter;
    };
    switch (h.datatype) {
        case DT_UINT8: read_as(std::uint8_t{}); break;
        case DT_INT16: read_as(std::int16_t{}); break;
        case DT_UINT16: read_as(std::uint16_t{}); break;
        case DT_INT32: read_as(std::int32_t{}); break;
        case DT_FLOAT32: read_as(float{}); break;
        case DT_FLOAT64: read_as(double{}); break;
        default: throw FormatError("unsupported nifti datatype " + std::to_string(h.datatype));
    }
    return v;
}

void save_nifti(const CTVolume& vol, const std::string& path) {
    vol.validate();
    Nifti1Header h{};
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = 3;
    h.dim[1] = static_cast<std::int16_t>(vol.nx);
    h.dim[2] = static_cast<std::int16_t>(vol.ny);
    h.dim[3] = static_cast<std::int16_t>(vol.nz);
    for (int d = 4; d < 8; ++d) h.dim[d] = 1;
    h.datatype = DT_FLOAT32;
    h.bitpix = 32;
    h.pixdim[0] = 1.0f;
    h.pixdim[1] = static_cast<float>(vol.sx);
    h.pixdim[2] = static_cast<float>(vol.sy);
    h.pixdim[3] = static_cast<float>(vol.sz);
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.scl_inter = 0.0f;
    h.xyzt_units = vol.unit == "um" ? 3 : 2;
    std::strncpy(h.descrip, modality_name(vol.modality).c_str(), sizeof(h.descrip) - 1);
    h.sform_code = 0;
    h.qform_code = 0;
    std::memcpy(h.magic, "n+1", 4);

    // write uncompressed unless the name asks for .gz
    const bool gzip = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
    GzFile gz(path, gzip ? "wb" : "wbT");
    if (!gz.ok()) throw IoError("cannot write " + path);
    gz.write_exact(&h, sizeof(h));
    const char pad[4] = {0, 0, 0, 0};
    gz.write_exact(pad, 4);
    std::vector<float> buf(vol.voxel_count());
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(vol.voxels[i]);
    gz.write_exact(buf.data(), buf.size() * sizeof(float));
}

} // namespace mmsr
