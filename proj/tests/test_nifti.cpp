#include <doctest.h>

#include <cmath>

#include "mgmt/nifti_io.hpp"
#include "mgmt/phantom.hpp"
#include "mgmt/volume_ops.hpp"
#include "support.hpp"

using namespace mgmt;

namespace {

Volume read_raw(const testing::RawHeader& h) { return read_nifti(h.bytes, false); }

Affine random_lattice_affine(Rng& rng) {
    // signed permutation scaled by dyadic spacings, so float32 storage is exact
    int perm[3] = {0, 1, 2};
    rng.shuffle(perm, perm + 3);
    Affine a = Affine::Zero();
    for (int c = 0; c < 3; ++c) {
        const double s = 0.5 * static_cast<double>(1 + rng.below(4));
        a(perm[c], c) = rng.bernoulli(0.5) ? s : -s;
        a(c, 3) = static_cast<double>(static_cast<int>(rng.below(200))) - 100.0;
    }
    a(3, 3) = 1.0;
    return a;
}

} // namespace

TEST_SUITE("nifti_io") {

TEST_CASE("single float32 voxel with slope 0 reads unscaled") {
    testing::RawHeader h(1, 1, 1, 16, 32);
    h.payload(std::vector<float>{7.0f});
    const Volume v = read_raw(h);
    CHECK(v.dims() == Dims3{1, 1, 1});
    CHECK(v.data.data[0] == 7.0f);
}

TEST_CASE("int16 payload is rescaled by slope and intercept") {
    testing::RawHeader h(2, 2, 2, 4, 16);
    h.slope(2.0f, 1.0f);
    h.payload(std::vector<std::int16_t>(8, 3));
    const Volume v = read_raw(h);
    for (float x : v.data.data) CHECK(x == 7.0f);
}

TEST_CASE("uint8 and float64 payloads") {
    testing::RawHeader u(3, 1, 1, 2, 8);
    u.payload(std::vector<std::uint8_t>{0, 128, 255});
    CHECK(read_raw(u).data.data == std::vector<float>{0.0f, 128.0f, 255.0f});

    testing::RawHeader d(2, 1, 1, 64, 64);
    d.payload(std::vector<double>{0.25, -1e300});
    const Volume v = read_raw(d);
    CHECK(v.downconverted);
    CHECK(v.data.data[0] == 0.25f);
}

TEST_CASE("header errors are typed") {
    testing::RawHeader h(2, 2, 2, 16, 32);
    h.payload(std::vector<float>(8, 1.0f));

    SUBCASE("bad magic") {
        h.bytes[345] = 'x';
        CHECK_THROWS_AS(read_raw(h), FormatError);
    }
    SUBCASE("unsupported datatype") {
        h.put<std::int16_t>(70, 8);  // int32
        CHECK_THROWS_AS(read_raw(h), UnsupportedTypeError);
    }
    SUBCASE("truncated payload") {
        h.bytes.resize(h.bytes.size() - 1);
        CHECK_THROWS_AS(read_raw(h), TruncationError);
    }
    SUBCASE("truncated header") {
        h.bytes.resize(100);
        CHECK_THROWS_AS(read_raw(h), TruncationError);
    }
    SUBCASE("big-endian") {
        h.put<std::int32_t>(0, 0x5c010000);
        CHECK_THROWS_AS(read_raw(h), FormatError);
    }
    SUBCASE("zero dimension") {
        h.put<std::int16_t>(42, 0);
        CHECK_THROWS_AS(read_raw(h), Error);
    }
    SUBCASE("non-positive pixdim") {
        h.put<float>(80, -1.0f);
        CHECK_THROWS_AS(read_raw(h), FormatError);
    }
    SUBCASE("4D image") {
        h.put<std::int16_t>(40, 4);
        h.put<std::int16_t>(48, 2);
        CHECK_THROWS_AS(read_raw(h), UnsupportedTypeError);
    }
}

TEST_CASE("zeros write as an all-zero float32 payload") {
    const Volume v(Grid3D<float>({3, 2, 2}), Affine::Identity());
    const auto bytes = write_nifti(v, NiftiDatatype::float32);
    REQUIRE(bytes.size() == 352 + 12 * 4);
    for (std::size_t i = 352; i < bytes.size(); ++i) CHECK(bytes[i] == 0);
}

TEST_CASE("float32 round trip is bit exact") {
    Rng rng(11);
    for (int t = 0; t < 20; ++t) {
        const Dims3 d{1 + static_cast<int>(rng.below(7)), 1 + static_cast<int>(rng.below(7)), 1 + static_cast<int>(rng.below(7))};
        Grid3D<float> g = testing::random_grid(rng, d);
        g.data[0] = -0.0f;
        g.data.back() = std::nextafter(1.0f, 2.0f);
        const Volume v(g, random_lattice_affine(rng));
        const Volume r = read_nifti(write_nifti(v, NiftiDatatype::float32), false);
        CHECK(r.data == v.data);
        CHECK(r.affine == v.affine);
        CHECK(r.spacing == v.spacing);
        CHECK(r.axis_codes == v.axis_codes);
        CHECK(std::signbit(r.data.data[0]));
    }
}

TEST_CASE("int16 round trip of representable integers is exact") {
    Grid3D<float> g({3, 1, 1});
    g.data = {0.0f, 1.0f, 32767.0f};
    const Volume v(g, Affine::Identity());
    CHECK(read_nifti(write_nifti(v, NiftiDatatype::int16), false).data == g);

    g.data = {-32768.0f, 5.0f, -1.0f};
    CHECK(read_nifti(write_nifti(Volume(g, Affine::Identity()), NiftiDatatype::int16), false).data == g);
}

TEST_CASE("integer writes reject unrepresentable values") {
    Grid3D<float> g({2, 1, 1});
    g.data = {0.0f, 32768.0f};
    CHECK_THROWS_AS(write_nifti(Volume(g, Affine::Identity()), NiftiDatatype::int16), RangeError);
    g.data = {0.0f, 256.0f};
    CHECK_THROWS_AS(write_nifti(Volume(g, Affine::Identity()), NiftiDatatype::uint8), RangeError);
    g.data = {0.0f, std::nanf("")};
    CHECK_THROWS_AS(write_nifti(Volume(g, Affine::Identity()), NiftiDatatype::uint8), RangeError);
    g.data = {0.0f, 0.5f};
    CHECK_THROWS_AS(write_nifti(Volume(g, Affine::Identity()), NiftiDatatype::uint8), RangeError);
}

TEST_CASE("phantom file round trip keeps header geometry") {
    PhantomConfig cfg;
    cfg.dims = {24, 20, 16};
    cfg.semi_axes_mm = {5, 4, 3};
    cfg.seed = 3;
    const PhantomCase pc = generate_case(cfg);
    const Volume img = reorient(pc.image, parse_axis_codes("RAS"));
    const auto dir = testing::scratch_dir("nifti_rt");
    write_nifti_file(dir / "img.nii.gz", img, NiftiDatatype::float32);
    write_nifti_file(dir / "mask.nii", volume_from_mask(pc.mask), NiftiDatatype::uint8);

    const auto bytes = read_file_bytes(dir / "img.nii.gz");
    const NiftiHeader h = parse_nifti_header(gzip_decompress(bytes));
    CHECK(h.dims == img.dims());
    CHECK(h.datatype == NiftiDatatype::float32);
    CHECK(h.pixdim == std::array<double, 3>{1.0, 1.0, 1.0});
    CHECK(h.affine == img.affine);

    const Volume back = read_nifti_file(dir / "img.nii.gz");
    CHECK(back.data == img.data);
    CHECK(axis_codes_string(back.axis_codes) == "RAS");
    const auto again = write_nifti(back, NiftiDatatype::float32);
    const auto first = gzip_decompress(bytes);
    CHECK(again == first);

    const SegMask m = mask_from_volume(read_nifti_file(dir / "mask.nii"));
    CHECK(m.labels == pc.mask.labels);
}

TEST_CASE("gzip output is deterministic and reversible") {
    std::vector<std::uint8_t> data(5000);
    Rng rng(1);
    for (auto& b : data) b = static_cast<std::uint8_t>(rng.below(7));
    const auto z1 = gzip_compress(data);
    const auto z2 = gzip_compress(data);
    CHECK(z1 == z2);
    CHECK(gzip_decompress(z1) == data);
    CHECK_THROWS_AS(gzip_decompress(std::vector<std::uint8_t>(z1.begin(), z1.begin() + 20)), Error);
}

TEST_CASE("orientation codes") {
    Affine a = Affine::Identity();
    CHECK(axis_codes_string(orientation_codes(a)) == "LPS");
    a(0, 0) = -1.0;
    CHECK(axis_codes_string(orientation_codes(a)) == "RPS");

    Affine p = Affine::Zero();
    p(2, 0) = 1.0;
    p(1, 1) = 1.0;
    p(0, 2) = 1.0;
    p(3, 3) = 1.0;
    CHECK(axis_codes_string(orientation_codes(p)) == "SPL");

    Affine amb = Affine::Identity();
    amb(0, 1) = 1.0;
    amb(1, 1) = 0.5;
    CHECK_THROWS_AS(orientation_codes(amb), OrientationError);

    Affine sing = Affine::Identity();
    sing(2, 2) = 0.0;
    CHECK_THROWS_AS(orientation_codes(sing), OrientationError);
}

TEST_CASE("orientation codes ignore positive column scaling") {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        Affine a = random_lattice_affine(rng);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) a(r, c) += rng.uniform(-0.1, 0.1);
        const AxisCodes codes = orientation_codes(a);
        for (int c = 0; c < 3; ++c) a.col(c) *= rng.uniform(0.01, 50.0);
        CHECK(orientation_codes(a) == codes);
    }
}

TEST_CASE("axis code strings") {
    CHECK(axis_codes_string(parse_axis_codes("ras")) == "RAS");
    CHECK_THROWS_AS(parse_axis_codes("LRS"), OrientationError);
    CHECK_THROWS_AS(parse_axis_codes("LP"), OrientationError);
}

TEST_CASE("mask conversion validates labels") {
    Grid3D<float> g({2, 1, 1});
    g.data = {0.0f, 3.0f};
    CHECK_THROWS_AS(mask_from_volume(Volume(g, Affine::Identity())), LabelError);
    g.data = {0.0f, 1.5f};
    CHECK_THROWS_AS(mask_from_volume(Volume(g, Affine::Identity())), LabelError);
    g.data = {4.0f, 2.0f};
    CHECK(mask_from_volume(Volume(g, Affine::Identity())).labels.data == std::vector<std::uint8_t>{4, 2});
}

TEST_CASE("byte mutations raise typed errors only") {
    Rng rng(99);
    Grid3D<float> g = testing::random_grid(rng, {4, 3, 2});
    const auto good = write_nifti(Volume(g, Affine::Identity()), NiftiDatatype::float32);
    for (int it = 0; it < 500; ++it) {
        auto b = good;
        const int flips = 1 + static_cast<int>(rng.below(4));
        for (int f = 0; f < flips; ++f) b[rng.below(b.size())] = static_cast<std::uint8_t>(rng.below(256));
        if (rng.bernoulli(0.2)) b.resize(rng.below(b.size()));
        try {
            const Volume v = read_nifti(b, false);
            CHECK(v.data.size() == static_cast<std::size_t>(v.dims()[0]) * v.dims()[1] * v.dims()[2]);
        } catch (const Error&) {
        }
    }
}

}
