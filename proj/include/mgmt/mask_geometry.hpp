#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mgmt/grid.hpp"
#include "mgmt/volume.hpp"
#include "mgmt/volume_ops.hpp"

namespace mgmt {

enum class SliceStrategy : std::uint8_t { feret, martin, area };

const char* strategy_name(SliceStrategy s);
SliceStrategy parse_strategy(const std::string& name);

/// Direction of the scan lines used for the Martin chord.
/// `rows`: lines of constant y, chord measured along x.
/// `columns`: lines of constant x, chord measured along y.
enum class ScanAxis : std::uint8_t { rows, columns };

struct Point2 {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point2&) const = default;
};

using BinaryMask = Grid2D<std::uint8_t>;

/// In-plane slice of a 3D grid; see Slice2D for the axis layout.
/// Throws BoundsError when `index` is outside the view's range.
template <class T>
Grid2D<T> extract_plane(const Grid3D<T>& grid, View view, int index);

int view_extent(const Dims3& dims, View view);
std::array<double, 2> view_spacing(const std::array<double, 3>& spacing, View view);

Slice2D extract_slice(const Volume& vol, View view, int index);
Grid2D<std::uint8_t> extract_slice(const SegMask& mask, View view, int index);

/// 1 where the label is nonzero. Codes outside {0, 1, 2, 4} raise LabelError.
BinaryMask binary_tumor(const Grid2D<std::uint8_t>& labels);

/// Counter-clockwise hull by monotone chain, collinear points dropped.
/// Inputs with fewer than three points are returned unchanged.
std::vector<Point2> convex_hull(std::vector<Point2> points);

/// Largest squared distance between hull vertices, by rotating calipers.
double hull_max_squared_distance(const std::vector<Point2>& hull);

/// Maximum caliper width over true-pixel centres, in mm.
double feret_diameter(const BinaryMask& mask, std::array<double, 2> spacing);

/// Chord length at the first scan line where the cumulative pixel area
/// reaches half the total; pixels are unit squares.
double martin_diameter(const BinaryMask& mask, std::array<double, 2> spacing, ScanAxis axis);

/// Count of true pixels times pixel area, in mm^2.
double tumor_area(const BinaryMask& mask, std::array<double, 2> spacing);

/// Score used to rank slices: feret, max of both Martin chords, or area.
double slice_score(const BinaryMask& mask, std::array<double, 2> spacing, SliceStrategy strategy);

struct SliceChoice {
    int index = 0;
    double score = 0.0;
};

/// Argmax of the strategy score over the non-empty slices of one view;
/// ties go to the lowest index. Throws NoTumorError for an empty mask.
SliceChoice select_slice(const SegMask& mask, View view, SliceStrategy strategy, std::array<double, 3> spacing);
SliceChoice select_slice(const SegMask& mask, View view, SliceStrategy strategy);

struct SelectedView {
    Slice2D image;
    int index = 0;
    double score = 0.0;
};

/// The selected axial, sagittal and coronal image planes.
struct ViewTriple {
    SelectedView axial;
    SelectedView sagittal;
    SelectedView coronal;

    const SelectedView& get(View v) const;
    SelectedView& get(View v);
};

/// Picks a slice per view from the mask and pulls the matching image planes.
ViewTriple select_multiview(const SegMask& mask, const Volume& vol, SliceStrategy strategy);

} // namespace mgmt
