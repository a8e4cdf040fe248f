#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mgmt/mask_geometry.hpp"
#include "support.hpp"

using namespace mgmt;

namespace {

double brute_feret(const BinaryMask& m, std::array<double, 2> sp) {
    std::vector<Point2> pts;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (m.at(x, y)) pts.push_back({x * sp[0], y * sp[1]});
    double best = 0.0;
    for (std::size_t a = 0; a < pts.size(); ++a)
        for (std::size_t b = a + 1; b < pts.size(); ++b) {
            const double dx = pts[a].x - pts[b].x, dy = pts[a].y - pts[b].y;
            best = std::max(best, dx * dx + dy * dy);
        }
    return std::sqrt(best);
}

BinaryMask rect(int w, int h) { return BinaryMask(w, h, 1); }

BinaryMask transpose(const BinaryMask& m) {
    BinaryMask t(m.height, m.width);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) t.at(y, x) = m.at(x, y);
    return t;
}

BinaryMask hflip(const BinaryMask& m) {
    BinaryMask t(m.width, m.height);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) t.at(m.width - 1 - x, y) = m.at(x, y);
    return t;
}

SegMask ellipsoid(Dims3 dims, std::array<double, 3> c, std::array<double, 3> r) {
    SegMask m;
    m.labels = Grid3D<std::uint8_t>(dims);
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i) {
                const double u = (i - c[0]) / r[0], v = (j - c[1]) / r[1], w = (k - c[2]) / r[2];
                if (u * u + v * v + w * w <= 1.0) m.labels.at(i, j, k) = 2;
            }
    return m;
}

bool inside_or_on(const std::vector<Point2>& hull, const Point2& p) {
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const Point2& a = hull[i];
        const Point2& b = hull[(i + 1) % hull.size()];
        if ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) < -1e-12) return false;
    }
    return true;
}

} // namespace

TEST_SUITE("mask_geometry") {

TEST_CASE("binary tumor") {
    Grid2D<std::uint8_t> z(3, 2);
    for (auto v : binary_tumor(z).data) CHECK(v == 0);
    Grid2D<std::uint8_t> l(3, 1);
    l.data = {1, 2, 4};
    CHECK(binary_tumor(l).data == std::vector<std::uint8_t>{1, 1, 1});
    l.data = {0, 3, 0};
    CHECK_THROWS_AS(binary_tumor(l), LabelError);
}

TEST_CASE("convex hull examples") {
    const auto sq = convex_hull({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}});
    CHECK(sq.size() == 4);
    const auto line = convex_hull({{0, 0}, {1, 1}, {2, 2}});
    REQUIRE(line.size() == 2);
    CHECK(line[0] == Point2{0, 0});
    CHECK(line[1] == Point2{2, 2});
    CHECK(convex_hull({}).empty());
    CHECK(convex_hull({{3, 4}}).size() == 1);
    CHECK(convex_hull({{3, 4}, {3, 4}, {3, 4}}).size() == 1);
}

TEST_CASE("hull contains all points and is convex") {
    Rng rng(21);
    for (int t = 0; t < 100; ++t) {
        std::vector<Point2> pts;
        const int n = 3 + static_cast<int>(rng.below(60));
        for (int i = 0; i < n; ++i)
            pts.push_back(rng.bernoulli(0.5) ? Point2{rng.uniform(-5, 5), rng.uniform(-5, 5)}
                                             : Point2{static_cast<double>(rng.below(6)), static_cast<double>(rng.below(6))});
        const auto hull = convex_hull(pts);
        if (hull.size() < 3) continue;
        for (const auto& p : pts) CHECK(inside_or_on(hull, p));
        for (std::size_t i = 0; i < hull.size(); ++i) {
            const Point2 &a = hull[i], &b = hull[(i + 1) % hull.size()], &c = hull[(i + 2) % hull.size()];
            CHECK((b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x) > 0);
        }
    }
}

TEST_CASE("feret examples") {
    BinaryMask one(3, 3);
    one.at(1, 2) = 1;
    CHECK(feret_diameter(one, {1, 1}) == 0.0);
    CHECK(feret_diameter(BinaryMask(4, 4), {1, 1}) == 0.0);
    CHECK(feret_diameter(rect(5, 1), {1, 1}) == 4.0);
    CHECK(feret_diameter(rect(3, 4), {1, 1}) == doctest::Approx(3.60555127546).epsilon(1e-10));
    CHECK(feret_diameter(rect(3, 4), {1, 1}) == std::sqrt(13.0));
}

TEST_CASE("feret matches brute-force pairs exactly") {
    Rng rng(22);
    const std::array<std::array<double, 2>, 4> spacings{{{1, 1}, {0.5, 2}, {2, 0.25}, {1, 1.5}}};
    for (int t = 0; t < 300; ++t) {
        const BinaryMask m = testing::random_mask(rng, 40, rng.uniform(0.01, 0.9));
        const auto sp = spacings[static_cast<std::size_t>(t) % spacings.size()];
        CHECK(feret_diameter(m, sp) == brute_feret(m, sp));
    }
}

TEST_CASE("feret symmetries, scaling and monotonicity") {
    Rng rng(23);
    for (int t = 0; t < 100; ++t) {
        BinaryMask m = testing::random_mask(rng, 30, rng.uniform(0.02, 0.5));
        const double f = feret_diameter(m, {1, 1});
        CHECK(feret_diameter(transpose(m), {1, 1}) == f);
        CHECK(feret_diameter(hflip(m), {1, 1}) == f);
        CHECK(feret_diameter(hflip(transpose(m)), {1, 1}) == f);
        CHECK(feret_diameter(m, {2.5, 2.5}) == doctest::Approx(2.5 * f).epsilon(1e-12));
        const double area = tumor_area(m, {1, 1});
        m.data[rng.below(m.size())] = 1;
        CHECK(feret_diameter(m, {1, 1}) >= f);
        CHECK(tumor_area(m, {1, 1}) >= area);
    }
}

TEST_CASE("martin examples") {
    BinaryMask one(4, 4);
    one.at(2, 1) = 1;
    CHECK(martin_diameter(one, {0.7, 1.3}, ScanAxis::rows) == doctest::Approx(0.7));
    CHECK(martin_diameter(one, {0.7, 1.3}, ScanAxis::columns) == doctest::Approx(1.3));
    CHECK(martin_diameter(rect(3, 4), {1, 1}, ScanAxis::rows) == 3.0);
    CHECK(martin_diameter(rect(3, 4), {1, 1}, ScanAxis::columns) == 4.0);
    CHECK(martin_diameter(BinaryMask(3, 3), {1, 1}, ScanAxis::rows) == 0.0);

    // rows of lengths 1..5: cumulative 1, 3, 6, 10 first reaches 7.5 on the fourth row
    BinaryMask tri(5, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x <= y; ++x) tri.at(x, y) = 1;
    CHECK(martin_diameter(tri, {1, 1}, ScanAxis::rows) == 4.0);
    CHECK(slice_score(tri, {1, 1}, SliceStrategy::martin) == 4.0);
}

TEST_CASE("martin matches cumulative row sums") {
    Rng rng(24);
    for (int t = 0; t < 100; ++t) {
        const BinaryMask m = testing::random_mask(rng, 20, 0.4);
        std::vector<int> rows(static_cast<std::size_t>(m.height), 0);
        int total = 0;
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) {
                rows[y] += m.at(x, y);
                total += m.at(x, y);
            }
        double expect = 0.0;
        int cum = 0;
        for (int y = 0; y < m.height && total > 0; ++y) {
            cum += rows[y];
            if (cum * 2 >= total) {
                expect = rows[y];
                break;
            }
        }
        CHECK(martin_diameter(m, {1, 1}, ScanAxis::rows) == expect);
        CHECK(martin_diameter(transpose(m), {1, 1}, ScanAxis::columns) == expect);
    }
}

TEST_CASE("area") {
    CHECK(tumor_area(BinaryMask(3, 3), {1, 1}) == 0.0);
    CHECK(tumor_area(rect(3, 4), {1, 1}) == 12.0);
    CHECK(tumor_area(rect(3, 4), {0.5, 2}) == 12.0);
    Rng rng(25);
    for (int t = 0; t < 50; ++t) {
        const BinaryMask m = testing::random_mask(rng, 25, 0.3);
        double rows = 0;
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) rows += m.at(x, y);
        CHECK(tumor_area(m, {1, 1}) == rows);
    }
}

TEST_CASE("select_slice on the canonical ellipsoid") {
    const SegMask m = ellipsoid(kAtlasDims, {120, 120, 77}, {20, 15, 10});
    const SliceChoice ax = select_slice(m, View::axial, SliceStrategy::feret);
    CHECK(std::abs(ax.index - 77) <= 1);
    CHECK(std::abs(ax.score - 40.0) <= 1.0);
    // frozen from the exhaustive per-slice oracle
    CHECK(ax.index == 77);
    CHECK(ax.score == 40.0);

    const Volume vol(Grid3D<float>(kAtlasDims), Affine::Identity());
    const ViewTriple t = select_multiview(m, vol, SliceStrategy::feret);
    CHECK(t.axial.index == 77);
    CHECK(t.sagittal.index == 120);
    CHECK(t.coronal.index == 120);
    CHECK(t.sagittal.image.data.width == 240);
    CHECK(t.sagittal.image.data.height == 155);
}

TEST_CASE("select_slice matches a per-slice argmax for every strategy") {
    Rng rng(26);
    for (int t = 0; t < 10; ++t) {
        const Dims3 d{20 + static_cast<int>(rng.below(10)), 20 + static_cast<int>(rng.below(10)), 12 + static_cast<int>(rng.below(6))};
        SegMask m = ellipsoid(d, {rng.uniform(8, 12), rng.uniform(8, 12), rng.uniform(5, 7)},
                              {rng.uniform(2, 7), rng.uniform(2, 7), rng.uniform(2, 5)});
        for (int n = 0; n < 20; ++n) m.labels.data[rng.below(m.labels.size())] = 4;
        for (View v : kViews)
            for (SliceStrategy s : {SliceStrategy::feret, SliceStrategy::martin, SliceStrategy::area}) {
                int best = -1;
                double score = -1;
                for (int i = 0; i < view_extent(d, v); ++i) {
                    const BinaryMask b = binary_tumor(extract_slice(m, v, i));
                    long count = 0;
                    for (auto x : b.data) count += x;
                    if (count == 0) continue;
                    const double sc = s == SliceStrategy::area ? static_cast<double>(count) : slice_score(b, {1, 1}, s);
                    if (sc > score) {
                        score = sc;
                        best = i;
                    }
                }
                const SliceChoice c = select_slice(m, v, s);
                CHECK(c.index == best);
                CHECK(c.score == score);
            }
    }
}

TEST_CASE("select_slice edge cases") {
    SegMask one;
    one.labels = Grid3D<std::uint8_t>({40, 40, 40});
    one.labels.at(10, 20, 30) = 1;
    for (SliceStrategy s : {SliceStrategy::feret, SliceStrategy::martin, SliceStrategy::area})
        CHECK(select_slice(one, View::axial, s).index == 30);
    const ViewTriple t = select_multiview(one, Volume(Grid3D<float>({40, 40, 40}), Affine::Identity()), SliceStrategy::feret);
    CHECK(t.axial.index == 30);
    CHECK(t.sagittal.index == 10);
    CHECK(t.coronal.index == 20);

    SegMask tie;
    tie.labels = Grid3D<std::uint8_t>({8, 8, 8});
    for (int i = 1; i < 5; ++i) {
        tie.labels.at(i, 2, 3) = 2;
        tie.labels.at(i, 2, 6) = 2;
    }
    CHECK(select_slice(tie, View::axial, SliceStrategy::feret).index == 3);

    SegMask empty;
    empty.labels = Grid3D<std::uint8_t>({5, 5, 5});
    CHECK_THROWS_AS(select_slice(empty, View::coronal, SliceStrategy::area), NoTumorError);
    CHECK_THROWS_AS(select_multiview(one, Volume(Grid3D<float>({5, 5, 5}), Affine::Identity()), SliceStrategy::area),
                    ShapeError);
}

TEST_CASE("sphere at the grid center selects central indices") {
    const SegMask m = ellipsoid({41, 41, 41}, {20, 20, 20}, {10, 10, 10});
    for (View v : kViews) CHECK(select_slice(m, v, SliceStrategy::feret).index == 20);
}

TEST_CASE("select_slice honours anisotropic spacing") {
    SegMask m;
    m.labels = Grid3D<std::uint8_t>({10, 10, 4});
    // slice 1: 5 pixels along x; slice 2: 4 pixels along y
    for (int i = 0; i < 5; ++i) m.labels.at(i, 0, 1) = 2;
    for (int j = 0; j < 4; ++j) m.labels.at(0, j, 2) = 2;
    CHECK(select_slice(m, View::axial, SliceStrategy::feret, {1, 1, 1}).index == 1);
    CHECK(select_slice(m, View::axial, SliceStrategy::feret, {1, 3, 1}).index == 2);
}

TEST_CASE("strategy names") {
    for (SliceStrategy s : {SliceStrategy::feret, SliceStrategy::martin, SliceStrategy::area})
        CHECK(parse_strategy(strategy_name(s)) == s);
    CHECK_THROWS_AS(parse_strategy("diameter"), ConfigError);
}

}
