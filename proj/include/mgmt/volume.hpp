#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "mgmt/grid.hpp"

namespace mgmt {

/// Voxel index (i, j, k, 1) -> world millimetres. World axes follow the LPS
/// convention: +x left, +y posterior, +z superior.
using Affine = Eigen::Matrix4d;

/// Anatomical direction a voxel axis increases towards.
enum class AxisCode : std::uint8_t { L, R, P, A, S, I };

using AxisCodes = std::array<AxisCode, 3>;

char axis_code_char(AxisCode c);
std::string axis_codes_string(const AxisCodes& codes);
AxisCodes parse_axis_codes(const std::string& text);

/// For each voxel axis, the anatomical direction whose world component
/// dominates that affine column. Throws OrientationError when two voxel axes
/// map to the same world axis or the 3x3 block is singular.
AxisCodes orientation_codes(const Affine& affine);

/// Millimetres per voxel along each voxel axis (affine column norms).
std::array<double, 3> affine_spacing(const Affine& affine);

/// Scalar image with its voxel-to-world geometry.
struct Volume {
    Grid3D<float> data;
    Affine affine = Affine::Identity();
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    AxisCodes axis_codes{AxisCode::L, AxisCode::P, AxisCode::S};
    /// Set when the source stored 64-bit reals that were narrowed to float.
    bool downconverted = false;

    Volume() = default;
    /// Spacing and axis codes are derived from the affine.
    Volume(Grid3D<float> grid, const Affine& a);

    const Dims3& dims() const { return data.dims; }
};

/// Tumor label map aligned voxel-for-voxel with a Volume.
/// Labels: 0 background, 1 necrosis, 2 edema, 4 enhancing tumor.
struct SegMask {
    Grid3D<std::uint8_t> labels;
    Affine affine = Affine::Identity();

    const Dims3& dims() const { return labels.dims; }
};

bool is_valid_label(int value);

/// Converts a label image read from disk. Non-integral values or codes
/// outside {0, 1, 2, 4} raise LabelError.
SegMask mask_from_volume(const Volume& vol);
Volume volume_from_mask(const SegMask& mask);

} // namespace mgmt
