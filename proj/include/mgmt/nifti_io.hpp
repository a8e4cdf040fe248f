#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mgmt/volume.hpp"

namespace mgmt {

/// The voxel storage types the reader accepts. Values are the NIfTI-1 codes.
enum class NiftiDatatype : std::int16_t {
    uint8 = 2,
    int16 = 4,
    float32 = 16,
    float64 = 64,
};

const char* datatype_name(NiftiDatatype dt);
NiftiDatatype parse_datatype(const std::string& name);

/// The subset of the 348-byte NIfTI-1 header this library interprets.
struct NiftiHeader {
    Dims3 dims{1, 1, 1};
    NiftiDatatype datatype = NiftiDatatype::float32;
    std::array<double, 3> pixdim{1.0, 1.0, 1.0};
    /// Voxel -> world, already converted to the library's LPS world frame.
    Affine affine = Affine::Identity();
    double scl_slope = 0.0;
    double scl_inter = 0.0;
    std::array<char, 4> magic{'n', '+', '1', '\0'};
    std::int64_t vox_offset = 352;
};

inline constexpr std::size_t kNiftiHeaderSize = 348;
inline constexpr std::int64_t kNiftiDefaultVoxOffset = 352;

/// Parses and validates the header of an uncompressed single-file image.
NiftiHeader parse_nifti_header(std::span<const std::uint8_t> bytes);

/// Decodes a single-file NIfTI-1 image. Intensities become
/// `scl_slope * raw + scl_inter` unless the slope is 0.
Volume read_nifti(std::span<const std::uint8_t> bytes, bool gzipped);

/// Encodes `vol` as a single-file NIfTI-1 stream (uncompressed).
/// Integer datatypes store rounded values with unit slope; values that do not
/// fit raise RangeError.
std::vector<std::uint8_t> write_nifti(const Volume& vol, NiftiDatatype datatype);

std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes);

/// File helpers: `.gz` suffix (or the gzip magic on read) selects compression.
Volume read_nifti_file(const std::filesystem::path& path);
void write_nifti_file(const std::filesystem::path& path, const Volume& vol, NiftiDatatype datatype);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

} // namespace mgmt
