#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mgmt/config.hpp"
#include "mgmt/manifest.hpp"
#include "mgmt/mask_geometry.hpp"
#include "mgmt/metrics.hpp"

namespace mgmt {

namespace fs = std::filesystem;

/// Flags shared by every subcommand.
struct GlobalOptions {
    int jobs = 1;
    bool overwrite = false;
};

struct GenPhantomOptions {
    fs::path out_dir;
    int n = 60;
    /// Voxel-axis orientation the files are written in; preprocessing brings
    /// them back to LPS.
    std::string orientation = "LPS";
    std::array<double, 3> split_fractions{0.6, 0.2, 0.2};
};

struct PreprocessOptions {
    fs::path manifest;
    fs::path out_dir;
    Dims3 target_dims = kAtlasDims;
    double target_spacing = 1.0;
};

struct ExtractOptions {
    fs::path manifest;
    fs::path out_dir;
    SliceStrategy strategy = SliceStrategy::feret;
};

struct TrainOptions {
    fs::path manifest;
    fs::path model_out;
};

struct EvaluateOptions {
    fs::path manifest;
    fs::path checkpoint;
    fs::path report;
};

struct CompareOptions {
    fs::path manifest;
    std::vector<SliceStrategy> strategies{SliceStrategy::feret, SliceStrategy::martin, SliceStrategy::area};
    fs::path report;
    /// Per-strategy intermediate outputs; defaults to <report dir>/compare_work.
    fs::path work_dir;
};

/// Each command returns 0 when the run completed (possibly with logged
/// per-case skips). Configuration and manifest problems throw ConfigError,
/// which the CLI maps to exit code 2.
int run_gen_phantom(const GenPhantomOptions& opts, const PipelineConfig& cfg, const GlobalOptions& g, std::ostream& log);
int run_preprocess(const PreprocessOptions& opts, const GlobalOptions& g, std::ostream& log);
int run_extract(const ExtractOptions& opts, const GlobalOptions& g, std::ostream& log);
int run_train(const TrainOptions& opts, const PipelineConfig& cfg, const GlobalOptions& g, std::ostream& log);
int run_evaluate(const EvaluateOptions& opts, const PipelineConfig& cfg, const GlobalOptions& g, std::ostream& log);
int run_compare(const CompareOptions& opts, const PipelineConfig& cfg, const GlobalOptions& g, std::ostream& log);

/// Slice bundle written by `extract`: the three z-scored planes of one case.
void write_slice_bundle(const fs::path& dir, const ViewTriple& triple);
ViewImages read_slice_bundle(const fs::path& dir);

/// Loads the bundles of the rows in `split` as model samples.
std::vector<Sample> load_samples(const Manifest& manifest, const std::string& split);

/// FNV-1a, hex encoded; used for the content-hash short-circuit.
std::string content_hash(const std::string& bytes);
std::string file_hash(const fs::path& path);

/// Runs fn(0..n-1) on up to `jobs` threads. fn must not throw.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

} // namespace mgmt
