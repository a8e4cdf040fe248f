#include "mgmt/phantom.hpp"

#include <cmath>
#include <cstdio>

#include "mgmt/rng.hpp"

namespace mgmt {
namespace {

enum Stream : std::uint64_t { kGeometry = 1, kLabel = 2, kNoise = 3, kField = 4 };

constexpr double kBrainLevel = 100.0;
constexpr double kFieldAmplitude = 8.0;
constexpr double kNecrosisLevel = 115.0;
constexpr double kEnhancingLevel = 140.0;
constexpr double kEdemaLevel = 130.0;
constexpr double kCoreRadius = 0.35;
constexpr double kRimRadius = 0.6;

struct Wave {
    std::array<double, 3> freq;
    double phase;
};

} // namespace

void PhantomConfig::validate() const {
    for (int d : dims)
        if (d < 1) throw GeometryError("phantom dims must be positive");
    for (double a : semi_axes_mm)
        if (!(a > 0)) throw GeometryError("semi-axes must be positive");
    if (!(noise_sigma >= 0)) throw GeometryError("noise_sigma must be >= 0");
    if (!(size_jitter >= 0 && size_jitter < 1)) throw GeometryError("size_jitter must lie in [0, 1)");
    if (label && *label != 0 && *label != 1) throw GeometryError("label must be 0 or 1");
}

int phantom_label(std::uint64_t seed) {
    Rng rng = Rng::substream(seed, kLabel);
    return rng.bernoulli(0.5) ? 1 : 0;
}

PhantomCase generate_case(const PhantomConfig& cfg) {
    cfg.validate();
    PhantomCase pc;
    pc.seed = cfg.seed;
    pc.label = cfg.label ? *cfg.label : phantom_label(cfg.seed);

    Rng geo = Rng::substream(cfg.seed, kGeometry);
    const double jitter = geo.uniform(1.0 - cfg.size_jitter, 1.0 + cfg.size_jitter);
    const double grow = 1.0 + kSizeEffectPerUnit * std::max(cfg.class_effect, 0.0);
    std::array<double, 3> largest{};
    for (int a = 0; a < 3; ++a) {
        largest[a] = std::round(cfg.semi_axes_mm[a] * (1.0 + cfg.size_jitter) * grow);
        // Whole-voxel semi-axes put the boundary voxels on the central slice only,
        // so the largest cross-section is unique.
        pc.semi_axes[a] = std::max(1.0, std::round(cfg.semi_axes_mm[a] * jitter * (pc.label == 1 ? grow : 1.0)));
    }

    // The centre range is set by the largest possible tumor so that it does
    // not depend on the label.
    for (int a = 0; a < 3; ++a) {
        const double lo = std::max(largest[a], 1.0), hi = cfg.dims[a] - 1 - lo;
        const double u = geo.uniform();
        if (cfg.tumor_center) {
            pc.center[a] = (*cfg.tumor_center)[a];
        } else {
            if (lo > hi) throw GeometryError("tumor does not fit inside the phantom grid");
            pc.center[a] = std::min(hi, lo + std::floor((hi - lo + 1) * u));
        }
        if (pc.center[a] - pc.semi_axes[a] < 0 || pc.center[a] + pc.semi_axes[a] > cfg.dims[a] - 1)
            throw GeometryError("tumor ellipsoid exceeds the phantom grid along axis " + std::to_string(a));
    }

    Rng field_rng = Rng::substream(cfg.seed, kField);
    std::array<Wave, 3> waves{};
    for (auto& w : waves) {
        for (int a = 0; a < 3; ++a) w.freq[a] = field_rng.uniform(0.5, 2.0) * M_PI / cfg.dims[a];
        w.phase = field_rng.uniform(0.0, 2.0 * M_PI);
    }

    const double effect = pc.label == 1 ? cfg.class_effect : 0.0;
    Rng noise = Rng::substream(cfg.seed, kNoise);
    Grid3D<float> img(cfg.dims);
    SegMask mask;
    mask.labels = Grid3D<std::uint8_t>(cfg.dims);
    const std::array<double, 3> brain_center{(cfg.dims[0] - 1) / 2.0, (cfg.dims[1] - 1) / 2.0, (cfg.dims[2] - 1) / 2.0};

    for (int k = 0; k < cfg.dims[2]; ++k)
        for (int j = 0; j < cfg.dims[1]; ++j)
            for (int i = 0; i < cfg.dims[0]; ++i) {
                const double p[3] = {static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)};
                double r2 = 0.0, b2 = 0.0;
                for (int a = 0; a < 3; ++a) {
                    const double t = (p[a] - pc.center[a]) / pc.semi_axes[a];
                    r2 += t * t;
                    const double u = (p[a] - brain_center[a]) / (0.48 * cfg.dims[a]);
                    b2 += u * u;
                }
                const double n = cfg.noise_sigma * noise.normal();
                double v;
                std::uint8_t label = 0;
                if (r2 <= 1.0) {
                    const double r = std::sqrt(r2);
                    if (r < kCoreRadius) {
                        label = 1;
                        v = kNecrosisLevel;
                    } else if (r < kRimRadius) {
                        label = 4;
                        v = kEnhancingLevel;
                    } else {
                        label = 2;
                        v = kEdemaLevel;
                    }
                    v += effect;
                } else if (b2 <= 1.0) {
                    double field = 0.0;
                    for (const auto& w : waves)
                        field += std::cos(w.freq[0] * i + w.freq[1] * j + w.freq[2] * k + w.phase);
                    v = kBrainLevel + kFieldAmplitude * field / 3.0;
                } else {
                    v = 0.0;
                }
                img.at(i, j, k) = static_cast<float>(v + n);
                mask.labels.at(i, j, k) = label;
            }

    pc.image = Volume(std::move(img), Affine::Identity());
    mask.affine = Affine::Identity();
    pc.mask = std::move(mask);
    return pc;
}

std::vector<PhantomManifestRow> plan_dataset(int n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("dataset size must be >= 1");
    const int need = std::min(2, n / 2);
    for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
        std::vector<PhantomManifestRow> rows;
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            PhantomManifestRow row;
            char id[32];
            std::snprintf(id, sizeof id, "case_%04d", i);
            row.case_id = id;
            row.seed = Rng::substream(seed, (attempt << 32) | static_cast<std::uint64_t>(i)).next_u64();
            row.label = phantom_label(row.seed);
            pos += row.label;
            rows.push_back(std::move(row));
        }
        if (pos >= need && n - pos >= need) return rows;
    }
    throw ConfigError("could not draw a label-balanced dataset");
}

PhantomDataset generate_dataset(int n, const PhantomConfig& cfg, std::uint64_t seed) {
    PhantomDataset ds;
    ds.manifest = plan_dataset(n, seed);
    for (const auto& row : ds.manifest) {
        PhantomConfig c = cfg;
        c.seed = row.seed;
        c.label = row.label;
        ds.cases.push_back(generate_case(c));
    }
    return ds;
}

} // namespace mgmt
