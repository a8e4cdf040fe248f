#include "mgmt/volume_ops.hpp"

#include <cmath>

#include <Eigen/LU>

namespace mgmt {
namespace {

struct AxisMap {
    std::array<int, 3> source_axis{};  // output axis w reads source axis source_axis[w]
    std::array<bool, 3> flipped{};
    bool identity = true;
};

int world_axis(AxisCode c) {
    switch (c) {
    case AxisCode::L: case AxisCode::R: return 0;
    case AxisCode::P: case AxisCode::A: return 1;
    case AxisCode::S: case AxisCode::I: return 2;
    }
    return 0;
}

bool is_positive(AxisCode c) { return c == AxisCode::L || c == AxisCode::P || c == AxisCode::S; }

AxisMap axis_map(const Affine& affine, const AxisCodes& target) {
    const AxisCodes codes = orientation_codes(affine);
    AxisMap m;
    for (int w = 0; w < 3; ++w) {
        for (int c = 0; c < 3; ++c)
            if (world_axis(codes[c]) == world_axis(target[w])) {
                m.source_axis[w] = c;
                m.flipped[w] = is_positive(codes[c]) != is_positive(target[w]);
            }
        if (m.source_axis[w] != w || m.flipped[w]) m.identity = false;
    }
    return m;
}

constexpr AxisCodes kLps{AxisCode::L, AxisCode::P, AxisCode::S};

template <class T>
std::pair<Grid3D<T>, Affine> apply_axis_map(const Grid3D<T>& src, const Affine& affine, const AxisMap& m) {
    Dims3 out_dims{};
    for (int w = 0; w < 3; ++w) out_dims[w] = src.dims[m.source_axis[w]];

    // output voxel -> source voxel
    Affine p = Affine::Zero();
    p(3, 3) = 1.0;
    for (int w = 0; w < 3; ++w) {
        const int c = m.source_axis[w];
        p(c, w) = m.flipped[w] ? -1.0 : 1.0;
        p(c, 3) = m.flipped[w] ? src.dims[c] - 1 : 0.0;
    }

    Grid3D<T> out(out_dims);
    std::array<int, 3> s{};
    for (int k = 0; k < out_dims[2]; ++k)
        for (int j = 0; j < out_dims[1]; ++j)
            for (int i = 0; i < out_dims[0]; ++i) {
                const int o[3] = {i, j, k};
                for (int w = 0; w < 3; ++w) {
                    const int c = m.source_axis[w];
                    s[c] = m.flipped[w] ? src.dims[c] - 1 - o[w] : o[w];
                }
                out.at(i, j, k) = src.at(s[0], s[1], s[2]);
            }
    return {std::move(out), affine * p};
}

Eigen::Matrix4d checked_inverse(const Affine& a, const char* what) {
    const double det = a.topLeftCorner<3, 3>().determinant();
    if (!a.allFinite() || !std::isfinite(det) || std::abs(det) < 1e-12)
        throw GeometryError(std::string(what) + " affine is singular");
    Affine inv = Affine::Identity();
    const Eigen::Matrix3d r = a.topLeftCorner<3, 3>().inverse();
    inv.topLeftCorner<3, 3>() = r;
    inv.block<3, 1>(0, 3) = -r * a.block<3, 1>(0, 3);
    return inv;
}

constexpr double kLatticeTol = 1e-6;

template <class T, class Sampler>
Grid3D<T> resample_grid(const Affine& src_affine, const Affine& target_affine, const Dims3& target_dims,
                        Sampler&& sample) {
    for (int n : target_dims)
        if (n < 1) throw GeometryError("target dims must be positive");
    checked_inverse(target_affine, "target");
    // target voxel -> source voxel
    const Affine m = checked_inverse(src_affine, "source") * target_affine;
    Grid3D<T> out(target_dims);
    for (int k = 0; k < target_dims[2]; ++k)
        for (int j = 0; j < target_dims[1]; ++j) {
            const Eigen::Vector3d row0 = m.block<3, 1>(0, 1) * j + m.block<3, 1>(0, 2) * k + m.block<3, 1>(0, 3);
            for (int i = 0; i < target_dims[0]; ++i) {
                const Eigen::Vector3d p = row0 + m.block<3, 1>(0, 0) * i;
                out.at(i, j, k) = sample(p);
            }
        }
    return out;
}

int nearest_index(double x, int n) {
    const double r = std::floor(x + 0.5);
    if (!(r >= 0.0 && r <= n - 1)) return -1;
    return static_cast<int>(r);
}

// Splits x into a base lattice index and fraction; false when outside [0, n-1].
bool lattice_split(double x, int n, int& i0, double& f) {
    if (!(x >= -kLatticeTol && x <= n - 1 + kLatticeTol)) return false;
    x = std::clamp(x, 0.0, static_cast<double>(n - 1));
    i0 = static_cast<int>(std::floor(x));
    if (i0 >= n - 1) i0 = std::max(n - 2, 0);
    f = x - i0;
    return true;
}

} // namespace

const char* view_name(View v) {
    switch (v) {
    case View::axial: return "axial";
    case View::sagittal: return "sagittal";
    case View::coronal: return "coronal";
    }
    return "?";
}

View parse_view(const std::string& name) {
    if (name == "axial") return View::axial;
    if (name == "sagittal") return View::sagittal;
    if (name == "coronal") return View::coronal;
    throw ConfigError("unknown view '" + name + "'");
}

void AugmentConfig::validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(p_hflip) || !prob(p_vflip)) throw ConfigError("flip probabilities must lie in [0, 1]");
    if (!(rotation_range_deg[0] <= rotation_range_deg[1]) || rotation_range_deg[0] < -180.0 ||
        rotation_range_deg[1] > 180.0)
        throw ConfigError("rotation range must be an interval inside [-180, 180]");
    if (!(sharpness_range[0] <= sharpness_range[1])) throw ConfigError("sharpness range must be an interval");
}

Volume reorient_to_lps(const Volume& vol) { return reorient(vol, kLps); }

SegMask reorient_mask_to_lps(const SegMask& mask) { return reorient_mask(mask, kLps); }

Volume reorient(const Volume& vol, const AxisCodes& target) {
    parse_axis_codes(axis_codes_string(target));
    const AxisMap m = axis_map(vol.affine, target);
    if (m.identity) return vol;
    auto [grid, affine] = apply_axis_map(vol.data, vol.affine, m);
    Volume out(std::move(grid), affine);
    for (int w = 0; w < 3; ++w) out.spacing[w] = vol.spacing[m.source_axis[w]];
    out.downconverted = vol.downconverted;
    return out;
}

SegMask reorient_mask(const SegMask& mask, const AxisCodes& target) {
    parse_axis_codes(axis_codes_string(target));
    const AxisMap m = axis_map(mask.affine, target);
    if (m.identity) return mask;
    auto [grid, affine] = apply_axis_map(mask.labels, mask.affine, m);
    return SegMask{std::move(grid), affine};
}

Volume resample_to_grid(const Volume& vol, const Affine& target_affine, const Dims3& target_dims, Interp mode) {
    const Dims3 d = vol.dims();
    const auto& src = vol.data;
    Grid3D<float> grid;
    if (mode == Interp::nearest) {
        grid = resample_grid<float>(vol.affine, target_affine, target_dims, [&](const Eigen::Vector3d& p) {
            const int i = nearest_index(p.x(), d[0]), j = nearest_index(p.y(), d[1]), k = nearest_index(p.z(), d[2]);
            if (i < 0 || j < 0 || k < 0) return 0.0f;
            return src.at(i, j, k);
        });
    } else {
        grid = resample_grid<float>(vol.affine, target_affine, target_dims, [&](const Eigen::Vector3d& p) {
            int i0, j0, k0;
            double fx, fy, fz;
            if (!lattice_split(p.x(), d[0], i0, fx) || !lattice_split(p.y(), d[1], j0, fy) ||
                !lattice_split(p.z(), d[2], k0, fz))
                return 0.0f;
            const int i1 = std::min(i0 + 1, d[0] - 1), j1 = std::min(j0 + 1, d[1] - 1), k1 = std::min(k0 + 1, d[2] - 1);
            auto v = [&](int i, int j, int k) { return static_cast<double>(src.at(i, j, k)); };
            const double c00 = v(i0, j0, k0) * (1 - fx) + v(i1, j0, k0) * fx;
            const double c10 = v(i0, j1, k0) * (1 - fx) + v(i1, j1, k0) * fx;
            const double c01 = v(i0, j0, k1) * (1 - fx) + v(i1, j0, k1) * fx;
            const double c11 = v(i0, j1, k1) * (1 - fx) + v(i1, j1, k1) * fx;
            const double c0 = c00 * (1 - fy) + c10 * fy;
            const double c1 = c01 * (1 - fy) + c11 * fy;
            return static_cast<float>(c0 * (1 - fz) + c1 * fz);
        });
    }
    Volume out(std::move(grid), target_affine);
    out.downconverted = vol.downconverted;
    return out;
}

SegMask resample_mask_to_grid(const SegMask& mask, const Affine& target_affine, const Dims3& target_dims) {
    const Dims3 d = mask.dims();
    SegMask out;
    out.affine = target_affine;
    out.labels = resample_grid<std::uint8_t>(mask.affine, target_affine, target_dims, [&](const Eigen::Vector3d& p) {
        const int i = nearest_index(p.x(), d[0]), j = nearest_index(p.y(), d[1]), k = nearest_index(p.z(), d[2]);
        if (i < 0 || j < 0 || k < 0) return std::uint8_t{0};
        return mask.labels.at(i, j, k);
    });
    return out;
}

Slice2D zscore_normalize(const Slice2D& s) {
    Slice2D out = s;
    const std::size_t n = s.data.size();
    if (n == 0) return out;
    double sum = 0.0;
    for (float v : s.data.data) sum += v;
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (float v : s.data.data) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (sd == 0.0 || !std::isfinite(sd)) {
        std::fill(out.data.data.begin(), out.data.data.end(), 0.0f);
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) out.data.data[i] = static_cast<float>((s.data.data[i] - mean) / sd);
    return out;
}

Grid2D<float> flip_horizontal(const Grid2D<float>& g) {
    Grid2D<float> out(g.width, g.height);
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) out.at(x, y) = g.at(g.width - 1 - x, y);
    return out;
}

Grid2D<float> flip_vertical(const Grid2D<float>& g) {
    Grid2D<float> out(g.width, g.height);
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) out.at(x, y) = g.at(x, g.height - 1 - y);
    return out;
}

Grid2D<float> rotate_bilinear(const Grid2D<float>& g, double degrees) {
    if (degrees == 0.0) return g;
    const double th = degrees * M_PI / 180.0;
    const double c = std::cos(th), s = std::sin(th);
    const double cx = (g.width - 1) / 2.0, cy = (g.height - 1) / 2.0;
    auto px = [&](int x, int y) -> double { return g.contains(x, y) ? g.at(x, y) : 0.0; };
    Grid2D<float> out(g.width, g.height);
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) {
            // inverse map: rotate the output position by -theta
            const double dx = x - cx, dy = y - cy;
            const double sx = c * dx + s * dy + cx;
            const double sy = -s * dx + c * dy + cy;
            const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
            const double fx = sx - x0, fy = sy - y0;
            const double v = px(x0, y0) * (1 - fx) * (1 - fy) + px(x0 + 1, y0) * fx * (1 - fy) +
                             px(x0, y0 + 1) * (1 - fx) * fy + px(x0 + 1, y0 + 1) * fx * fy;
            out.at(x, y) = static_cast<float>(v);
        }
    return out;
}

Grid2D<float> sharpen(const Grid2D<float>& g, double alpha) {
    if (alpha == 0.0) return g;
    Grid2D<float> out(g.width, g.height);
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) {
            double sum = 0.0;
            int count = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    if (g.contains(x + dx, y + dy)) {
                        sum += g.at(x + dx, y + dy);
                        ++count;
                    }
            const double v = g.at(x, y);
            out.at(x, y) = static_cast<float>(v + alpha * (v - sum / count));
        }
    return out;
}

Slice2D augment(const Slice2D& s, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    const bool hflip = rng.bernoulli(cfg.p_hflip);
    const bool vflip = rng.bernoulli(cfg.p_vflip);
    const double angle = rng.uniform(cfg.rotation_range_deg[0], cfg.rotation_range_deg[1]);
    const double alpha = rng.uniform(cfg.sharpness_range[0], cfg.sharpness_range[1]);

    Slice2D out = s;
    if (hflip) out.data = flip_horizontal(out.data);
    if (vflip) out.data = flip_vertical(out.data);
    out.data = rotate_bilinear(out.data, angle);
    out.data = sharpen(out.data, alpha);
    return out;
}

} // namespace mgmt
