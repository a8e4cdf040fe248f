#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mgmt/volume.hpp"

namespace mgmt {

/// Synthetic case generator settings. Geometry is in voxels of a 1 mm
/// identity-affine (LPS) grid, so millimetres and voxels coincide.
struct PhantomConfig {
    Dims3 dims{240, 240, 155};
    /// Ellipsoid centre in voxel coordinates; random when unset.
    std::optional<std::array<double, 3>> tumor_center;
    /// Nominal semi-axes; the generated ellipsoid rounds them (after jitter
    /// and growth) to whole voxels.
    std::array<double, 3> semi_axes_mm{20.0, 15.0, 10.0};
    /// Intensity offset added to tumor voxels of label-1 cases; their
    /// semi-axes also grow by a factor (1 + kSizeEffectPerUnit * class_effect).
    double class_effect = 3.0;
    double noise_sigma = 1.0;
    /// Per-case semi-axis scale drawn uniformly from [1 - j, 1 + j].
    double size_jitter = 0.0;
    std::uint64_t seed = 0;
    /// Overrides the drawn label when set.
    std::optional<int> label;

    void validate() const;
};

inline constexpr double kSizeEffectPerUnit = 0.05;

struct PhantomCase {
    Volume image;
    SegMask mask;
    int label = 0;
    std::array<double, 3> center{};
    std::array<double, 3> semi_axes{};  // whole voxels
    std::uint64_t seed = 0;
};

/// Label a case with this seed will receive (fair coin from its own stream).
int phantom_label(std::uint64_t seed);

/// Brain-like background (smooth field plus noise) with a labelled ellipsoid:
/// necrotic core 1, enhancing rim 4, edema shell 2. Throws GeometryError when
/// the ellipsoid does not fit inside the grid.
PhantomCase generate_case(const PhantomConfig& cfg);

struct PhantomManifestRow {
    std::string case_id;
    int label = 0;
    std::uint64_t seed = 0;
};

/// Per-case seeds and labels; each class gets at least min(2, n/2) cases,
/// redrawing the whole seed set when it does not.
std::vector<PhantomManifestRow> plan_dataset(int n, std::uint64_t seed);

struct PhantomDataset {
    std::vector<PhantomCase> cases;
    std::vector<PhantomManifestRow> manifest;
};

PhantomDataset generate_dataset(int n, const PhantomConfig& cfg, std::uint64_t seed);

} // namespace mgmt
