#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "mgmt/grid.hpp"
#include "mgmt/rng.hpp"

namespace testing {

/// Raw little-endian NIfTI-1 header written field by field, so reader tests do
/// not depend on the writer.
struct RawHeader {
    std::vector<std::uint8_t> bytes = std::vector<std::uint8_t>(352, 0);

    template <class T>
    void put(std::size_t off, T v) {
        std::memcpy(bytes.data() + off, &v, sizeof v);
    }

    RawHeader(int nx, int ny, int nz, std::int16_t datatype, std::int16_t bitpix) {
        put<std::int32_t>(0, 348);
        const std::int16_t dim[8] = {3, static_cast<std::int16_t>(nx), static_cast<std::int16_t>(ny),
                                     static_cast<std::int16_t>(nz), 1, 1, 1, 1};
        for (int n = 0; n < 8; ++n) put<std::int16_t>(40 + 2 * n, dim[n]);
        put<std::int16_t>(70, datatype);
        put<std::int16_t>(72, bitpix);
        for (int n = 0; n < 8; ++n) put<float>(76 + 4 * n, 1.0f);
        put<float>(108, 352.0f);
        std::memcpy(bytes.data() + 344, "n+1\0", 4);
    }
    void slope(float s, float i) {
        put<float>(112, s);
        put<float>(116, i);
    }
    template <class T>
    void payload(const std::vector<T>& values) {
        const std::size_t off = bytes.size();
        bytes.resize(off + values.size() * sizeof(T));
        std::memcpy(bytes.data() + off, values.data(), values.size() * sizeof(T));
    }
};

inline mgmt::Grid2D<std::uint8_t> random_mask(mgmt::Rng& rng, int max_side, double density) {
    const int w = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_side)));
    const int h = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_side)));
    mgmt::Grid2D<std::uint8_t> m(w, h);
    for (auto& v : m.data) v = rng.bernoulli(density) ? 1 : 0;
    return m;
}

inline mgmt::Grid3D<float> random_grid(mgmt::Rng& rng, mgmt::Dims3 d) {
    mgmt::Grid3D<float> g(d);
    for (auto& v : g.data) v = static_cast<float>(rng.uniform(-100.0, 100.0));
    return g;
}

/// Fresh per-test scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("mgmtview_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testing
