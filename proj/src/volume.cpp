#include "mgmt/volume.hpp"

#include <cctype>
#include <cmath>

#include <Eigen/LU>

namespace mgmt {

char axis_code_char(AxisCode c) {
    switch (c) {
    case AxisCode::L: return 'L';
    case AxisCode::R: return 'R';
    case AxisCode::P: return 'P';
    case AxisCode::A: return 'A';
    case AxisCode::S: return 'S';
    case AxisCode::I: return 'I';
    }
    return '?';
}

std::string axis_codes_string(const AxisCodes& codes) {
    std::string s;
    for (auto c : codes) s.push_back(axis_code_char(c));
    return s;
}

AxisCodes parse_axis_codes(const std::string& text) {
    if (text.size() != 3) throw OrientationError("orientation must be three letters, got '" + text + "'");
    AxisCodes out{};
    bool seen[3] = {false, false, false};
    for (int n = 0; n < 3; ++n) {
        int world = -1;
        switch (std::toupper(static_cast<unsigned char>(text[n]))) {
        case 'L': out[n] = AxisCode::L; world = 0; break;
        case 'R': out[n] = AxisCode::R; world = 0; break;
        case 'P': out[n] = AxisCode::P; world = 1; break;
        case 'A': out[n] = AxisCode::A; world = 1; break;
        case 'S': out[n] = AxisCode::S; world = 2; break;
        case 'I': out[n] = AxisCode::I; world = 2; break;
        default: throw OrientationError("unknown orientation letter in '" + text + "'");
        }
        if (seen[world]) throw OrientationError("orientation '" + text + "' repeats an anatomical axis");
        seen[world] = true;
    }
    return out;
}

AxisCodes orientation_codes(const Affine& affine) {
    const Eigen::Matrix3d m = affine.topLeftCorner<3, 3>();
    const double det = m.determinant();
    if (!std::isfinite(det) || det == 0.0) throw OrientationError("affine 3x3 block is singular");

    static constexpr AxisCode positive[3] = {AxisCode::L, AxisCode::P, AxisCode::S};
    static constexpr AxisCode negative[3] = {AxisCode::R, AxisCode::A, AxisCode::I};

    AxisCodes codes{};
    int used[3] = {-1, -1, -1};
    for (int col = 0; col < 3; ++col) {
        int best = 0;
        for (int row = 1; row < 3; ++row)
            if (std::abs(m(row, col)) > std::abs(m(best, col))) best = row;
        if (used[best] >= 0)
            throw OrientationError("voxel axes " + std::to_string(used[best]) + " and " + std::to_string(col) +
                                   " both map to the same anatomical axis");
        used[best] = col;
        codes[col] = m(best, col) > 0 ? positive[best] : negative[best];
    }
    return codes;
}

std::array<double, 3> affine_spacing(const Affine& affine) {
    return {affine.block<3, 1>(0, 0).norm(), affine.block<3, 1>(0, 1).norm(), affine.block<3, 1>(0, 2).norm()};
}

Volume::Volume(Grid3D<float> grid, const Affine& a)
    : data(std::move(grid)), affine(a), spacing(affine_spacing(a)), axis_codes(orientation_codes(a)) {}

bool is_valid_label(int value) { return value == 0 || value == 1 || value == 2 || value == 4; }

SegMask mask_from_volume(const Volume& vol) {
    SegMask mask;
    mask.affine = vol.affine;
    mask.labels = Grid3D<std::uint8_t>(vol.dims());
    for (std::size_t n = 0; n < vol.data.size(); ++n) {
        const float v = vol.data.data[n];
        const float r = std::nearbyint(v);
        if (!(r == v) || !is_valid_label(static_cast<int>(r)))
            throw LabelError("mask voxel " + std::to_string(n) + " has non-label value " + std::to_string(v));
        mask.labels.data[n] = static_cast<std::uint8_t>(r);
    }
    return mask;
}

Volume volume_from_mask(const SegMask& mask) {
    Grid3D<float> grid(mask.dims());
    for (std::size_t n = 0; n < grid.size(); ++n) grid.data[n] = mask.labels.data[n];
    return Volume(std::move(grid), mask.affine);
}

} // namespace mgmt
