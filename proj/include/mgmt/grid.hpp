#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "mgmt/errors.hpp"

namespace mgmt {

/// Dense 2D array, x fastest. `at(x, y)` addresses column x of row y.
template <class T>
struct Grid2D {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Grid2D() = default;
    Grid2D(int w, int h, T fill = T{})
        : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
        if (w < 0 || h < 0) throw ShapeError("negative 2D grid extent");
    }

    std::size_t size() const { return data.size(); }
    T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

    bool operator==(const Grid2D&) const = default;
};

using Dims3 = std::array<int, 3>;

/// Dense 3D array in NIfTI voxel order: i fastest, then j, then k.
template <class T>
struct Grid3D {
    Dims3 dims{0, 0, 0};
    std::vector<T> data;

    Grid3D() = default;
    explicit Grid3D(Dims3 d, T fill = T{}) : dims(d) {
        for (int n : d)
            if (n < 0) throw ShapeError("negative 3D grid extent");
        data.assign(static_cast<std::size_t>(d[0]) * d[1] * d[2], fill);
    }

    std::size_t size() const { return data.size(); }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
    }
    T& at(int i, int j, int k) { return data[index(i, j, k)]; }
    const T& at(int i, int j, int k) const { return data[index(i, j, k)]; }
    bool contains(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
    }

    bool operator==(const Grid3D&) const = default;
};

} // namespace mgmt
