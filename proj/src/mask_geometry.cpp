#include "mgmt/mask_geometry.hpp"

#include <algorithm>
#include <cmath>

namespace mgmt {
namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double cross_edges(const Point2& a0, const Point2& a1, const Point2& b0, const Point2& b1) {
    return (a1.x - a0.x) * (b1.y - b0.y) - (a1.y - a0.y) * (b1.x - b0.x);
}

double squared_distance(const Point2& a, const Point2& b) {
    const double dx = a.x - b.x, dy = a.y - b.y;
    return dx * dx + dy * dy;
}

} // namespace

const char* strategy_name(SliceStrategy s) {
    switch (s) {
    case SliceStrategy::feret: return "feret";
    case SliceStrategy::martin: return "martin";
    case SliceStrategy::area: return "area";
    }
    return "?";
}

SliceStrategy parse_strategy(const std::string& name) {
    if (name == "feret") return SliceStrategy::feret;
    if (name == "martin") return SliceStrategy::martin;
    if (name == "area") return SliceStrategy::area;
    throw ConfigError("unknown slice strategy '" + name + "' (expected feret, martin or area)");
}

int view_extent(const Dims3& dims, View view) {
    switch (view) {
    case View::axial: return dims[2];
    case View::sagittal: return dims[0];
    case View::coronal: return dims[1];
    }
    return 0;
}

std::array<double, 2> view_spacing(const std::array<double, 3>& s, View view) {
    switch (view) {
    case View::axial: return {s[0], s[1]};
    case View::sagittal: return {s[1], s[2]};
    case View::coronal: return {s[0], s[2]};
    }
    return {1.0, 1.0};
}

template <class T>
Grid2D<T> extract_plane(const Grid3D<T>& grid, View view, int index) {
    const auto& d = grid.dims;
    const int extent = view_extent(d, view);
    if (index < 0 || index >= extent)
        throw BoundsError(std::string(view_name(view)) + " index " + std::to_string(index) + " outside [0, " +
                          std::to_string(extent - 1) + "]");
    switch (view) {
    case View::axial: {
        Grid2D<T> out(d[0], d[1]);
        for (int j = 0; j < d[1]; ++j)
            for (int i = 0; i < d[0]; ++i) out.at(i, j) = grid.at(i, j, index);
        return out;
    }
    case View::sagittal: {
        Grid2D<T> out(d[1], d[2]);
        for (int k = 0; k < d[2]; ++k)
            for (int j = 0; j < d[1]; ++j) out.at(j, k) = grid.at(index, j, k);
        return out;
    }
    case View::coronal: {
        Grid2D<T> out(d[0], d[2]);
        for (int k = 0; k < d[2]; ++k)
            for (int i = 0; i < d[0]; ++i) out.at(i, k) = grid.at(i, index, k);
        return out;
    }
    }
    return {};
}

template Grid2D<float> extract_plane(const Grid3D<float>&, View, int);
template Grid2D<std::uint8_t> extract_plane(const Grid3D<std::uint8_t>&, View, int);

Slice2D extract_slice(const Volume& vol, View view, int index) {
    Slice2D s;
    s.data = extract_plane(vol.data, view, index);
    s.view = view;
    s.index = index;
    s.spacing = view_spacing(vol.spacing, view);
    return s;
}

Grid2D<std::uint8_t> extract_slice(const SegMask& mask, View view, int index) {
    return extract_plane(mask.labels, view, index);
}

BinaryMask binary_tumor(const Grid2D<std::uint8_t>& labels) {
    BinaryMask out(labels.width, labels.height);
    for (std::size_t n = 0; n < labels.size(); ++n) {
        const int v = labels.data[n];
        if (!is_valid_label(v)) throw LabelError("unknown tumor label " + std::to_string(v));
        out.data[n] = v != 0;
    }
    return out;
}

std::vector<Point2> convex_hull(std::vector<Point2> points) {
    if (points.size() < 3) return points;
    std::sort(points.begin(), points.end(),
              [](const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    points.erase(std::unique(points.begin(), points.end()), points.end());
    const std::size_t n = points.size();
    if (n < 3) return points;

    std::vector<Point2> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
        hull[k++] = points[i];
    }
    for (std::size_t i = n - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
        hull[k++] = points[i];
    }
    hull.resize(k - 1);
    return hull;
}

double hull_max_squared_distance(const std::vector<Point2>& hull) {
    const std::size_t m = hull.size();
    if (m < 2) return 0.0;
    if (m == 2) return squared_distance(hull[0], hull[1]);

    double best = 0.0;
    std::size_t j = 1;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t ni = (i + 1) % m;
        // advance j while it moves away from edge (i, ni)
        while (cross_edges(hull[i], hull[ni], hull[j], hull[(j + 1) % m]) > 0) j = (j + 1) % m;
        best = std::max({best, squared_distance(hull[i], hull[j]), squared_distance(hull[ni], hull[j])});
    }
    return best;
}

double feret_diameter(const BinaryMask& mask, std::array<double, 2> spacing) {
    // Only the extreme pixels of each row can be hull vertices.
    std::vector<Point2> points;
    for (int y = 0; y < mask.height; ++y) {
        int first = -1, last = -1;
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y)) {
                if (first < 0) first = x;
                last = x;
            }
        if (first < 0) continue;
        points.push_back({first * spacing[0], y * spacing[1]});
        if (last != first) points.push_back({last * spacing[0], y * spacing[1]});
    }
    return std::sqrt(hull_max_squared_distance(convex_hull(std::move(points))));
}

double martin_diameter(const BinaryMask& mask, std::array<double, 2> spacing, ScanAxis axis) {
    const bool rows = axis == ScanAxis::rows;
    const int lines = rows ? mask.height : mask.width;
    const int length = rows ? mask.width : mask.height;
    std::vector<long> counts(static_cast<std::size_t>(lines), 0);
    long total = 0;
    for (int l = 0; l < lines; ++l) {
        for (int t = 0; t < length; ++t) counts[l] += rows ? (mask.at(t, l) != 0) : (mask.at(l, t) != 0);
        total += counts[l];
    }
    if (total == 0) return 0.0;
    long cumulative = 0;
    for (int l = 0; l < lines; ++l) {
        cumulative += counts[l];
        if (2 * cumulative >= total) return static_cast<double>(counts[l]) * (rows ? spacing[0] : spacing[1]);
    }
    return 0.0;
}

double tumor_area(const BinaryMask& mask, std::array<double, 2> spacing) {
    const auto count = std::count_if(mask.data.begin(), mask.data.end(), [](std::uint8_t v) { return v != 0; });
    return static_cast<double>(count) * spacing[0] * spacing[1];
}

double slice_score(const BinaryMask& mask, std::array<double, 2> spacing, SliceStrategy strategy) {
    switch (strategy) {
    case SliceStrategy::feret: return feret_diameter(mask, spacing);
    case SliceStrategy::martin:
        return std::max(martin_diameter(mask, spacing, ScanAxis::rows), martin_diameter(mask, spacing, ScanAxis::columns));
    case SliceStrategy::area: return tumor_area(mask, spacing);
    }
    return 0.0;
}

SliceChoice select_slice(const SegMask& mask, View view, SliceStrategy strategy, std::array<double, 3> spacing) {
    const int extent = view_extent(mask.dims(), view);
    const auto plane_spacing = view_spacing(spacing, view);
    SliceChoice best{-1, 0.0};
    for (int index = 0; index < extent; ++index) {
        const BinaryMask bin = binary_tumor(extract_slice(mask, view, index));
        if (std::none_of(bin.data.begin(), bin.data.end(), [](std::uint8_t v) { return v != 0; })) continue;
        const double score = slice_score(bin, plane_spacing, strategy);
        if (best.index < 0 || score > best.score) best = {index, score};
    }
    if (best.index < 0) throw NoTumorError("mask contains no tumor voxels");
    return best;
}

SliceChoice select_slice(const SegMask& mask, View view, SliceStrategy strategy) {
    return select_slice(mask, view, strategy, affine_spacing(mask.affine));
}

const SelectedView& ViewTriple::get(View v) const {
    switch (v) {
    case View::axial: return axial;
    case View::sagittal: return sagittal;
    case View::coronal: return coronal;
    }
    return axial;
}

SelectedView& ViewTriple::get(View v) {
    return const_cast<SelectedView&>(std::as_const(*this).get(v));
}

ViewTriple select_multiview(const SegMask& mask, const Volume& vol, SliceStrategy strategy) {
    if (mask.dims() != vol.dims()) throw ShapeError("mask and volume grids differ");
    ViewTriple triple;
    for (View v : kViews) {
        const SliceChoice choice = select_slice(mask, v, strategy, vol.spacing);
        SelectedView& sel = triple.get(v);
        sel.image = extract_slice(vol, v, choice.index);
        sel.index = choice.index;
        sel.score = choice.score;
    }
    return triple;
}

} // namespace mgmt
