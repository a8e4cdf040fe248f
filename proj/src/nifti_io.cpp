#include "mgmt/nifti_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include <Eigen/LU>
#include <zlib.h>

#include "mgmt/version.hpp"

namespace mgmt {
namespace {

// Header field offsets (NIfTI-1).
constexpr std::size_t kOffSizeofHdr = 0;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffDescrip = 148;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffQuatern = 256;
constexpr std::size_t kOffQoffset = 268;
constexpr std::size_t kOffSrow = 280;
constexpr std::size_t kOffMagic = 344;

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
    return std::uint32_t(b[off]) | std::uint32_t(b[off + 1]) << 8 | std::uint32_t(b[off + 2]) << 16 |
           std::uint32_t(b[off + 3]) << 24;
}
std::int32_t get_i32(std::span<const std::uint8_t> b, std::size_t off) {
    return static_cast<std::int32_t>(get_u32(b, off));
}
std::int16_t get_i16(std::span<const std::uint8_t> b, std::size_t off) {
    return static_cast<std::int16_t>(std::uint16_t(b[off]) | std::uint16_t(b[off + 1]) << 8);
}
float get_f32(std::span<const std::uint8_t> b, std::size_t off) {
    const std::uint32_t u = get_u32(b, off);
    float f;
    std::memcpy(&f, &u, sizeof f);
    return f;
}
double get_f64(std::span<const std::uint8_t> b, std::size_t off) {
    const std::uint64_t u = std::uint64_t(get_u32(b, off)) | std::uint64_t(get_u32(b, off + 4)) << 32;
    double d;
    std::memcpy(&d, &u, sizeof d);
    return d;
}

void put_u32(std::vector<std::uint8_t>& b, std::size_t off, std::uint32_t v) {
    for (int n = 0; n < 4; ++n) b[off + n] = static_cast<std::uint8_t>(v >> (8 * n));
}
void put_i16(std::vector<std::uint8_t>& b, std::size_t off, std::int16_t v) {
    const auto u = static_cast<std::uint16_t>(v);
    b[off] = static_cast<std::uint8_t>(u);
    b[off + 1] = static_cast<std::uint8_t>(u >> 8);
}
void put_f32(std::vector<std::uint8_t>& b, std::size_t off, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, sizeof u);
    put_u32(b, off, u);
}
void put_f64(std::vector<std::uint8_t>& b, std::size_t off, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, sizeof u);
    put_u32(b, off, static_cast<std::uint32_t>(u));
    put_u32(b, off + 4, static_cast<std::uint32_t>(u >> 32));
}

int bytes_per_voxel(NiftiDatatype dt) {
    switch (dt) {
    case NiftiDatatype::uint8: return 1;
    case NiftiDatatype::int16: return 2;
    case NiftiDatatype::float32: return 4;
    case NiftiDatatype::float64: return 8;
    }
    return 0;
}

// NIfTI stores RAS+ world coordinates; the library works in LPS+.
Affine flip_ras_lps(const Affine& a) {
    Affine out = a;
    out.row(0) *= -1.0;
    out.row(1) *= -1.0;
    return out;
}

Affine quaternion_affine(std::span<const std::uint8_t> b, const std::array<double, 3>& pixdim, double qfac) {
    const double qb = get_f32(b, kOffQuatern), qc = get_f32(b, kOffQuatern + 4), qd = get_f32(b, kOffQuatern + 8);
    double qa = 1.0 - (qb * qb + qc * qc + qd * qd);
    qa = qa < 1e-7 ? 0.0 : std::sqrt(qa);
    Eigen::Matrix3d r;
    r << qa * qa + qb * qb - qc * qc - qd * qd, 2 * (qb * qc - qa * qd), 2 * (qb * qd + qa * qc),
        2 * (qb * qc + qa * qd), qa * qa + qc * qc - qb * qb - qd * qd, 2 * (qc * qd - qa * qb),
        2 * (qb * qd - qa * qc), 2 * (qc * qd + qa * qb), qa * qa + qd * qd - qc * qc - qb * qb;
    Affine a = Affine::Identity();
    a.block<3, 1>(0, 0) = r.col(0) * pixdim[0];
    a.block<3, 1>(0, 1) = r.col(1) * pixdim[1];
    a.block<3, 1>(0, 2) = r.col(2) * pixdim[2] * qfac;
    a(0, 3) = get_f32(b, kOffQoffset);
    a(1, 3) = get_f32(b, kOffQoffset + 4);
    a(2, 3) = get_f32(b, kOffQoffset + 8);
    return a;
}

bool is_gzip(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

} // namespace

const char* datatype_name(NiftiDatatype dt) {
    switch (dt) {
    case NiftiDatatype::uint8: return "uint8";
    case NiftiDatatype::int16: return "int16";
    case NiftiDatatype::float32: return "float32";
    case NiftiDatatype::float64: return "float64";
    }
    return "unknown";
}

NiftiDatatype parse_datatype(const std::string& name) {
    if (name == "uint8") return NiftiDatatype::uint8;
    if (name == "int16") return NiftiDatatype::int16;
    if (name == "float32") return NiftiDatatype::float32;
    if (name == "float64") return NiftiDatatype::float64;
    throw UnsupportedTypeError("unknown datatype name '" + name + "'");
}

NiftiHeader parse_nifti_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kNiftiHeaderSize)
        throw TruncationError("file holds " + std::to_string(bytes.size()) + " bytes, header needs 348");

    const std::int32_t sizeof_hdr = get_i32(bytes, kOffSizeofHdr);
    if (sizeof_hdr != 348) {
        const std::uint32_t u = get_u32(bytes, kOffSizeofHdr);
        const std::uint32_t swapped = (u >> 24) | ((u >> 8) & 0xff00) | ((u << 8) & 0xff0000) | (u << 24);
        if (swapped == 348) throw FormatError("big-endian NIfTI files are not supported");
        throw FormatError("bad sizeof_hdr " + std::to_string(sizeof_hdr) + " (expected 348)");
    }

    NiftiHeader h;
    std::memcpy(h.magic.data(), bytes.data() + kOffMagic, 4);
    if (std::memcmp(h.magic.data(), "n+1\0", 4) != 0) {
        if (std::memcmp(h.magic.data(), "ni1\0", 4) == 0)
            throw FormatError("two-file (.hdr/.img) NIfTI is not supported");
        throw FormatError("bad magic: not a single-file NIfTI-1 image");
    }

    const int ndim = get_i16(bytes, kOffDim);
    if (ndim < 1 || ndim > 7) throw FormatError("dim[0] = " + std::to_string(ndim) + " outside 1..7");
    for (int n = 1; n <= 7; ++n) {
        const int d = get_i16(bytes, kOffDim + 2 * n);
        if (n <= ndim && d < 1) throw FormatError("dim[" + std::to_string(n) + "] = " + std::to_string(d));
        if (n <= 3) h.dims[n - 1] = n <= ndim ? d : 1;
        else if (n <= ndim && d != 1) throw UnsupportedTypeError("images with more than 3 dimensions are not supported");
    }

    const std::int16_t code = get_i16(bytes, kOffDatatype);
    switch (code) {
    case 2: h.datatype = NiftiDatatype::uint8; break;
    case 4: h.datatype = NiftiDatatype::int16; break;
    case 16: h.datatype = NiftiDatatype::float32; break;
    case 64: h.datatype = NiftiDatatype::float64; break;
    default: throw UnsupportedTypeError("unsupported NIfTI datatype code " + std::to_string(code));
    }

    const double qfac = get_f32(bytes, kOffPixdim) < 0 ? -1.0 : 1.0;
    for (int n = 0; n < 3; ++n) {
        double p = get_f32(bytes, kOffPixdim + 4 * (n + 1));
        // unused trailing axes of 1-2D images commonly carry pixdim 0
        if (n >= ndim && !(p > 0)) p = 1.0;
        if (!(p > 0) || !std::isfinite(p)) throw FormatError("pixdim[" + std::to_string(n + 1) + "] must be > 0");
        h.pixdim[n] = p;
    }

    const double vox_offset = get_f32(bytes, kOffVoxOffset);
    if (!std::isfinite(vox_offset) || vox_offset < static_cast<double>(kNiftiHeaderSize) ||
        vox_offset > static_cast<double>(std::numeric_limits<std::int32_t>::max()))
        throw FormatError("invalid vox_offset");
    h.vox_offset = static_cast<std::int64_t>(vox_offset);

    h.scl_slope = get_f32(bytes, kOffSclSlope);
    h.scl_inter = get_f32(bytes, kOffSclInter);
    if (!std::isfinite(h.scl_slope) || !std::isfinite(h.scl_inter)) throw FormatError("non-finite scl_slope/scl_inter");

    const int qform_code = get_i16(bytes, kOffQformCode);
    const int sform_code = get_i16(bytes, kOffSformCode);
    Affine ras = Affine::Identity();
    if (sform_code > 0) {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c) ras(r, c) = get_f32(bytes, kOffSrow + 16 * r + 4 * c);
    } else if (qform_code > 0) {
        ras = quaternion_affine(bytes, h.pixdim, qfac);
    } else {
        for (int n = 0; n < 3; ++n) ras(n, n) = h.pixdim[n];
    }
    if (!ras.allFinite()) throw FormatError("non-finite orientation matrix");
    const double det = ras.topLeftCorner<3, 3>().determinant();
    if (!std::isfinite(det) || std::abs(det) < 1e-12) throw FormatError("singular orientation matrix");
    h.affine = flip_ras_lps(ras);
    return h;
}

Volume read_nifti(std::span<const std::uint8_t> bytes, bool gzipped) {
    std::vector<std::uint8_t> inflated;
    if (gzipped) {
        inflated = gzip_decompress(bytes);
        bytes = inflated;
    }
    const NiftiHeader h = parse_nifti_header(bytes);

    const std::uint64_t voxels = std::uint64_t(h.dims[0]) * std::uint64_t(h.dims[1]) * std::uint64_t(h.dims[2]);
    const std::uint64_t bpv = bytes_per_voxel(h.datatype);
    const std::uint64_t needed = static_cast<std::uint64_t>(h.vox_offset) + voxels * bpv;
    if (needed > bytes.size())
        throw TruncationError("payload needs " + std::to_string(needed) + " bytes, file has " +
                              std::to_string(bytes.size()));

    Grid3D<float> grid(h.dims);
    const bool scale = h.scl_slope != 0.0;
    const std::size_t base = static_cast<std::size_t>(h.vox_offset);
    bool narrowed = false;
    for (std::size_t n = 0; n < voxels; ++n) {
        const std::size_t off = base + n * bpv;
        double raw = 0.0;
        switch (h.datatype) {
        case NiftiDatatype::uint8: raw = bytes[off]; break;
        case NiftiDatatype::int16: raw = get_i16(bytes, off); break;
        case NiftiDatatype::float32: raw = get_f32(bytes, off); break;
        case NiftiDatatype::float64: raw = get_f64(bytes, off); narrowed = true; break;
        }
        grid.data[n] = static_cast<float>(scale ? h.scl_slope * raw + h.scl_inter : raw);
    }

    Volume vol(std::move(grid), h.affine);
    vol.spacing = h.pixdim;
    vol.downconverted = narrowed;
    return vol;
}

std::vector<std::uint8_t> write_nifti(const Volume& vol, NiftiDatatype datatype) {
    const auto& dims = vol.dims();
    for (int n : dims)
        if (n < 1 || n > std::numeric_limits<std::int16_t>::max())
            throw RangeError("dimension " + std::to_string(n) + " not representable in NIfTI-1");

    const std::size_t bpv = bytes_per_voxel(datatype);
    std::vector<std::uint8_t> out(kNiftiDefaultVoxOffset + vol.data.size() * bpv, 0);

    put_u32(out, kOffSizeofHdr, 348);
    put_i16(out, kOffDim, 3);
    for (int n = 0; n < 3; ++n) put_i16(out, kOffDim + 2 * (n + 1), static_cast<std::int16_t>(dims[n]));
    for (int n = 4; n <= 7; ++n) put_i16(out, kOffDim + 2 * n, 1);
    put_i16(out, kOffDatatype, static_cast<std::int16_t>(datatype));
    put_i16(out, kOffBitpix, static_cast<std::int16_t>(8 * bpv));
    put_f32(out, kOffPixdim, 1.0f);
    for (int n = 0; n < 3; ++n) put_f32(out, kOffPixdim + 4 * (n + 1), static_cast<float>(vol.spacing[n]));
    put_f32(out, kOffVoxOffset, static_cast<float>(kNiftiDefaultVoxOffset));
    const bool integral = datatype == NiftiDatatype::uint8 || datatype == NiftiDatatype::int16;
    put_f32(out, kOffSclSlope, integral ? 1.0f : 0.0f);
    put_f32(out, kOffSclInter, 0.0f);
    out[kOffXyztUnits] = 2; // millimetres

    const std::string descrip = std::string("mgmtview ") + kVersion;
    std::memcpy(out.data() + kOffDescrip, descrip.data(), std::min<std::size_t>(descrip.size(), 79));

    put_i16(out, kOffQformCode, 0);
    put_i16(out, kOffSformCode, 1);
    const Affine ras = flip_ras_lps(vol.affine);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) put_f32(out, kOffSrow + 16 * r + 4 * c, static_cast<float>(ras(r, c)));
    std::memcpy(out.data() + kOffMagic, "n+1\0", 4);

    double lo = 0.0, hi = 0.0;
    if (datatype == NiftiDatatype::uint8) hi = 255.0;
    if (datatype == NiftiDatatype::int16) {
        lo = -32768.0;
        hi = 32767.0;
    }
    for (std::size_t n = 0; n < vol.data.size(); ++n) {
        const float v = vol.data.data[n];
        const std::size_t off = kNiftiDefaultVoxOffset + n * bpv;
        switch (datatype) {
        case NiftiDatatype::uint8:
        case NiftiDatatype::int16: {
            const double r = static_cast<double>(v);
            if (!(r >= lo && r <= hi) || r != std::trunc(r))
                throw RangeError("value " + std::to_string(v) + " does not fit " + datatype_name(datatype));
            if (datatype == NiftiDatatype::uint8) out[off] = static_cast<std::uint8_t>(r);
            else put_i16(out, off, static_cast<std::int16_t>(r));
            break;
        }
        case NiftiDatatype::float32: put_f32(out, off, v); break;
        case NiftiDatatype::float64: put_f64(out, off, v); break;
        }
    }
    return out;
}

std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes) {
    z_stream zs{};
    // windowBits 15 + 16 selects the gzip wrapper; mtime stays 0 so output is reproducible.
    if (deflateInit2(&zs, 6, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw FormatError("deflateInit2 failed");
    std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 32);
    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    const auto produced = zs.total_out;
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw FormatError("gzip compression failed");
    out.resize(produced);
    return out;
}

std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes) {
    if (!is_gzip(bytes)) throw FormatError("not a gzip stream");
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK) throw FormatError("inflateInit2 failed");
    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    std::vector<std::uint8_t> out;
    std::uint8_t chunk[1 << 16];
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = chunk;
        zs.avail_out = sizeof chunk;
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            if (rc == Z_BUF_ERROR) throw TruncationError("gzip stream ends early");
            throw FormatError("corrupt gzip stream");
        }
        out.insert(out.end(), chunk, chunk + (sizeof chunk - zs.avail_out));
    }
    inflateEnd(&zs);
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw FormatError("failed reading " + path.string());
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("failed writing " + path.string());
}

Volume read_nifti_file(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return read_nifti(bytes, is_gzip(bytes));
}

void write_nifti_file(const std::filesystem::path& path, const Volume& vol, NiftiDatatype datatype) {
    auto bytes = write_nifti(vol, datatype);
    if (path.extension() == ".gz") bytes = gzip_compress(bytes);
    write_file_bytes(path, bytes);
}

} // namespace mgmt
