#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mgmt/config.hpp"
#include "mgmt/mask_geometry.hpp"
#include "mgmt/metrics.hpp"
#include "mgmt/nifti_io.hpp"
#include "mgmt/phantom.hpp"
#include "mgmt/pipeline.hpp"
#include "mgmt/version.hpp"
#include "mgmt/volume_ops.hpp"

namespace py = pybind11;
using namespace mgmt;

namespace {

using F32Volume = py::array_t<float, py::array::f_style | py::array::forcecast>;
using U8Volume = py::array_t<std::uint8_t, py::array::f_style | py::array::forcecast>;
using F32Plane = py::array_t<float, py::array::c_style | py::array::forcecast>;
using U8Plane = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// 3D arrays are indexed [i, j, k] like the voxel grid (Fortran order in memory).
template <class T, class A>
Grid3D<T> to_grid3(const A& a) {
    if (a.ndim() != 3) throw ShapeError("expected a 3D array");
    Grid3D<T> g({static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))});
    std::copy(a.data(), a.data() + g.size(), g.data.begin());
    return g;
}

template <class T>
py::array_t<T, py::array::f_style> from_grid3(const Grid3D<T>& g) {
    py::array_t<T, py::array::f_style> out({g.dims[0], g.dims[1], g.dims[2]});
    std::copy(g.data.begin(), g.data.end(), out.mutable_data());
    return out;
}

// 2D arrays are indexed [y, x].
template <class T, class A>
Grid2D<T> to_grid2(const A& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2D array");
    Grid2D<T> g(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::copy(a.data(), a.data() + g.size(), g.data.begin());
    return g;
}

template <class T>
py::array_t<T> from_grid2(const Grid2D<T>& g) {
    py::array_t<T> out({g.height, g.width});
    std::copy(g.data.begin(), g.data.end(), out.mutable_data());
    return out;
}

SegMask to_mask(const U8Volume& labels, const Affine& affine) {
    SegMask m;
    m.labels = to_grid3<std::uint8_t>(labels);
    m.affine = affine;
    for (auto v : m.labels.data)
        if (!is_valid_label(v)) throw LabelError("label " + std::to_string(v) + " is not one of 0, 1, 2, 4");
    return m;
}

py::dict volume_dict(const Volume& v) {
    py::dict d;
    d["data"] = from_grid3(v.data);
    d["affine"] = Affine(v.affine);
    d["spacing"] = v.spacing;
    d["axis_codes"] = axis_codes_string(v.axis_codes);
    return d;
}

PipelineConfig make_config(const std::string& config_json, std::optional<std::uint64_t> seed) {
    PipelineConfig cfg = config_json.empty() ? PipelineConfig{} : config_from_json(config_json);
    if (seed) {
        cfg.train.seed = *seed;
        cfg.eval.seed = *seed;
        cfg.phantom.seed = *seed;
    }
    return cfg;
}

template <class Fn>
std::string logged(Fn&& fn) {
    std::ostringstream log;
    {
        py::gil_scoped_release release;
        fn(log);
    }
    return log.str();
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multi-view MRI slice selection and classification core";
    m.attr("__version__") = kVersion;

    auto base = py::register_exception<Error>(m, "MgmtError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<TruncationError>(m, "TruncationError", base.ptr());
    py::register_exception<UnsupportedTypeError>(m, "UnsupportedTypeError", base.ptr());
    py::register_exception<NoTumorError>(m, "NoTumorError", base.ptr());
    py::register_exception<DegenerateLabelsError>(m, "DegenerateLabelsError", base.ptr());

    m.def("read_nifti", [](const fs::path& p) { return volume_dict(read_nifti_file(p)); }, py::arg("path"),
          "Read a .nii or .nii.gz file as {data, affine, spacing, axis_codes}; affine maps to LPS millimetres.");
    m.def(
        "write_nifti",
        [](const fs::path& p, const F32Volume& data, const Affine& affine, const std::string& datatype) {
            write_nifti_file(p, Volume(to_grid3<float>(data), affine), parse_datatype(datatype));
        },
        py::arg("path"), py::arg("data"), py::arg("affine") = Affine(Affine::Identity()),
        py::arg("datatype") = "float32");

    m.def(
        "reorient_to_lps",
        [](const F32Volume& data, const Affine& affine) {
            return volume_dict(reorient_to_lps(Volume(to_grid3<float>(data), affine)));
        },
        py::arg("data"), py::arg("affine"));
    m.def(
        "resample_to_grid",
        [](const F32Volume& data, const Affine& affine, const Affine& target_affine, Dims3 target_dims,
           const std::string& mode) {
            const Interp interp = mode == "nearest" ? Interp::nearest : Interp::trilinear;
            if (mode != "nearest" && mode != "trilinear") throw ConfigError("mode must be 'trilinear' or 'nearest'");
            return volume_dict(resample_to_grid(Volume(to_grid3<float>(data), affine), target_affine, target_dims, interp));
        },
        py::arg("data"), py::arg("affine"), py::arg("target_affine"), py::arg("target_dims"),
        py::arg("mode") = "trilinear");
    m.def(
        "zscore",
        [](const F32Plane& plane) {
            Slice2D s;
            s.data = to_grid2<float>(plane);
            return from_grid2(zscore_normalize(s).data);
        },
        py::arg("plane"));

    m.def(
        "feret_diameter", [](const U8Plane& mask, std::array<double, 2> spacing) {
            return feret_diameter(to_grid2<std::uint8_t>(mask), spacing);
        },
        py::arg("mask"), py::arg("spacing") = std::array<double, 2>{1.0, 1.0});
    m.def(
        "martin_diameter",
        [](const U8Plane& mask, std::array<double, 2> spacing, const std::string& axis) {
            if (axis != "rows" && axis != "columns") throw ConfigError("axis must be 'rows' or 'columns'");
            return martin_diameter(to_grid2<std::uint8_t>(mask), spacing,
                                   axis == "rows" ? ScanAxis::rows : ScanAxis::columns);
        },
        py::arg("mask"), py::arg("spacing") = std::array<double, 2>{1.0, 1.0}, py::arg("axis") = "rows");
    m.def(
        "tumor_area", [](const U8Plane& mask, std::array<double, 2> spacing) {
            return tumor_area(to_grid2<std::uint8_t>(mask), spacing);
        },
        py::arg("mask"), py::arg("spacing") = std::array<double, 2>{1.0, 1.0});
    m.def(
        "select_slice",
        [](const U8Volume& labels, const std::string& view, const std::string& strategy) {
            const SliceChoice c = select_slice(to_mask(labels, Affine::Identity()), parse_view(view), parse_strategy(strategy));
            return std::make_pair(c.index, c.score);
        },
        py::arg("labels"), py::arg("view"), py::arg("strategy") = "feret",
        "Index and score of the best slice of one view of a label volume indexed [i, j, k].");

    m.def(
        "generate_phantom",
        [](const std::string& config_json, std::uint64_t seed, std::optional<int> label) {
            PhantomConfig c = make_config(config_json, std::nullopt).phantom;
            c.seed = seed;
            c.label = label;
            const PhantomCase pc = generate_case(c);
            py::dict d = volume_dict(pc.image);
            d["mask"] = from_grid3(pc.mask.labels);
            d["label"] = pc.label;
            d["center"] = pc.center;
            d["semi_axes"] = pc.semi_axes;
            return d;
        },
        py::arg("config_json") = "", py::arg("seed") = 0, py::arg("label") = py::none(),
        "Synthetic case; config_json may carry a 'phantom' section.");

    m.def(
        "roc_auc", [](const std::vector<double>& s, const std::vector<int>& y) { return roc_auc(s, y); },
        py::arg("scores"), py::arg("labels"));
    m.def(
        "confusion_metrics",
        [](const std::vector<double>& s, const std::vector<int>& y, double threshold) {
            const ConfusionMetrics c = confusion_metrics(s, y, threshold);
            py::dict d;
            d["precision"] = c.precision;
            d["recall"] = c.recall;
            d["specificity"] = c.specificity;
            d["f1"] = c.f1;
            d["tp"] = c.tp;
            d["fp"] = c.fp;
            d["tn"] = c.tn;
            d["fn"] = c.fn;
            d["degenerate"] = c.degenerate;
            return d;
        },
        py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);
    m.def(
        "bootstrap_ci",
        [](const std::vector<double>& s, const std::vector<int>& y, int n_boot, double alpha, std::uint64_t seed) {
            return bootstrap_ci(s, y, {n_boot, alpha, seed, 100});
        },
        py::arg("scores"), py::arg("labels"), py::arg("n_boot") = 2000, py::arg("alpha") = 0.05, py::arg("seed") = 0);
    m.def(
        "permutation_test_auc",
        [](const std::vector<double>& a, const std::vector<double>& b, const std::vector<int>& y, int n_perm,
           std::uint64_t seed) { return permutation_test_auc(a, b, y, n_perm, seed); },
        py::arg("scores_a"), py::arg("scores_b"), py::arg("labels"), py::arg("n_perm") = 10000, py::arg("seed") = 0);

    m.def("resolved_config", [](const std::string& config_json) { return config_to_json(make_config(config_json, {})); },
          py::arg("config_json") = "");

    // Pipeline commands; each returns its log text.
    m.def(
        "gen_phantom",
        [](const fs::path& out_dir, int n, const std::string& config_json, std::optional<std::uint64_t> seed,
           const std::string& orientation, int jobs, bool overwrite) {
            GenPhantomOptions o;
            o.out_dir = out_dir;
            o.n = n;
            o.orientation = orientation;
            const PipelineConfig cfg = make_config(config_json, seed);
            return logged([&](std::ostream& log) { run_gen_phantom(o, cfg, {jobs, overwrite}, log); });
        },
        py::arg("out_dir"), py::arg("n") = 60, py::arg("config_json") = "", py::arg("seed") = py::none(),
        py::arg("orientation") = "LPS", py::arg("jobs") = 1, py::arg("overwrite") = false);
    m.def(
        "preprocess",
        [](const fs::path& manifest, const fs::path& out_dir, Dims3 dims, double spacing, int jobs, bool overwrite) {
            return logged([&](std::ostream& log) {
                run_preprocess({manifest, out_dir, dims, spacing}, {jobs, overwrite}, log);
            });
        },
        py::arg("manifest"), py::arg("out_dir"), py::arg("dims") = kAtlasDims, py::arg("spacing") = 1.0,
        py::arg("jobs") = 1, py::arg("overwrite") = false);
    m.def(
        "extract",
        [](const fs::path& manifest, const fs::path& out_dir, const std::string& strategy, int jobs, bool overwrite) {
            const SliceStrategy s = parse_strategy(strategy);
            return logged([&](std::ostream& log) { run_extract({manifest, out_dir, s}, {jobs, overwrite}, log); });
        },
        py::arg("manifest"), py::arg("out_dir"), py::arg("strategy") = "feret", py::arg("jobs") = 1,
        py::arg("overwrite") = false);
    m.def(
        "train",
        [](const fs::path& manifest, const fs::path& out, const std::string& config_json,
           std::optional<std::uint64_t> seed, bool overwrite) {
            const PipelineConfig cfg = make_config(config_json, seed);
            return logged([&](std::ostream& log) { run_train({manifest, out}, cfg, {1, overwrite}, log); });
        },
        py::arg("manifest"), py::arg("out"), py::arg("config_json") = "", py::arg("seed") = py::none(),
        py::arg("overwrite") = false);
    m.def(
        "evaluate",
        [](const fs::path& manifest, const fs::path& checkpoint, const fs::path& report, const std::string& config_json,
           std::optional<std::uint64_t> seed, bool overwrite) {
            const PipelineConfig cfg = make_config(config_json, seed);
            return logged(
                [&](std::ostream& log) { run_evaluate({manifest, checkpoint, report}, cfg, {1, overwrite}, log); });
        },
        py::arg("manifest"), py::arg("checkpoint"), py::arg("report"), py::arg("config_json") = "",
        py::arg("seed") = py::none(), py::arg("overwrite") = false);
    m.def(
        "compare",
        [](const fs::path& manifest, const fs::path& report, const std::vector<std::string>& strategies,
           const std::string& config_json, std::optional<std::uint64_t> seed) {
            CompareOptions o;
            o.manifest = manifest;
            o.report = report;
            o.strategies.clear();
            for (const auto& s : strategies) o.strategies.push_back(parse_strategy(s));
            const PipelineConfig cfg = make_config(config_json, seed);
            return logged([&](std::ostream& log) { run_compare(o, cfg, {}, log); });
        },
        py::arg("manifest"), py::arg("report"),
        py::arg("strategies") = std::vector<std::string>{"feret", "martin", "area"}, py::arg("config_json") = "",
        py::arg("seed") = py::none());
}
