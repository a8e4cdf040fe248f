#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "mgmt/grid.hpp"
#include "mgmt/rng.hpp"
#include "mgmt/volume.hpp"

namespace mgmt {

enum class View : std::uint8_t { axial, sagittal, coronal };

inline constexpr std::array<View, 3> kViews{View::axial, View::sagittal, View::coronal};

const char* view_name(View v);
View parse_view(const std::string& name);

/// One plane of a volume.
///
/// In-plane layout: axial (k fixed) spans x = i, y = j; sagittal (i fixed)
/// spans x = j, y = k; coronal (j fixed) spans x = i, y = k. `spacing` is
/// {x, y} in millimetres.
struct Slice2D {
    Grid2D<float> data;
    View view = View::axial;
    int index = 0;
    std::array<double, 2> spacing{1.0, 1.0};
};

/// Training-time augmentation parameters. Draws happen in a fixed order
/// regardless of the probabilities, so the stream position after `augment`
/// depends only on how many times it was called.
struct AugmentConfig {
    double p_hflip = 0.5;
    double p_vflip = 0.5;
    std::array<double, 2> rotation_range_deg{-10.0, 10.0};
    std::array<double, 2> sharpness_range{0.0, 1.0};
    std::uint64_t seed = 0;

    /// Throws ConfigError on probabilities outside [0,1] or bad intervals.
    void validate() const;
};

enum class Interp : std::uint8_t { trilinear, nearest };

/// Default target grid: 240 x 240 x 155 voxels at 1 mm isotropic.
inline constexpr Dims3 kAtlasDims{240, 240, 155};

/// Permutes/flips the voxel axes so the result is (L, P, S). Every voxel keeps
/// its world coordinate.
Volume reorient_to_lps(const Volume& vol);

/// Samples `vol` at the world position of every voxel of the target grid.
/// Points outside the source lattice are 0. Throws GeometryError for a
/// singular target affine.
Volume resample_to_grid(const Volume& vol, const Affine& target_affine, const Dims3& target_dims, Interp mode);

/// Label maps go through nearest-neighbour sampling only.
SegMask resample_mask_to_grid(const SegMask& mask, const Affine& target_affine, const Dims3& target_dims);
SegMask reorient_mask_to_lps(const SegMask& mask);

/// General form: voxel axes end up pointing along `target` (which must name
/// each anatomical axis once).
Volume reorient(const Volume& vol, const AxisCodes& target);
SegMask reorient_mask(const SegMask& mask, const AxisCodes& target);

/// (p - mean) / std with the population std; all-zero output when std == 0.
Slice2D zscore_normalize(const Slice2D& s);

Grid2D<float> flip_horizontal(const Grid2D<float>& g);
Grid2D<float> flip_vertical(const Grid2D<float>& g);
/// Rotation about the grid centre, bilinear, zero fill.
Grid2D<float> rotate_bilinear(const Grid2D<float>& g, double degrees);
/// s + alpha * (s - box3x3(s)); the box filter averages in-bounds neighbours.
Grid2D<float> sharpen(const Grid2D<float>& g, double alpha);

/// Flips, then rotation, then sharpness.
Slice2D augment(const Slice2D& s, const AugmentConfig& cfg, Rng& rng);

} // namespace mgmt
