#include "mgmt/pipeline.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mgmt/nifti_io.hpp"
#include "mgmt/version.hpp"

namespace mgmt {
namespace {

using nlohmann::ordered_json;

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

/// input_hash recorded by a previous run, or empty.
std::string recorded_hash(const fs::path& json_path) {
    if (!fs::exists(json_path)) return {};
    try {
        const auto j = ordered_json::parse(read_text(json_path));
        return j.value("input_hash", std::string{});
    } catch (const std::exception&) {
        return {};
    }
}

bool up_to_date(const fs::path& stamp_file, const std::string& hash, const GlobalOptions& g, std::ostream& log,
                const char* command) {
    if (g.overwrite || recorded_hash(stamp_file) != hash) return false;
    log << command << ": outputs are up to date with their inputs; nothing to do (use --overwrite to rebuild)\n";
    return true;
}

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

fs::path absolute_path(const fs::path& p) { return fs::absolute(p).lexically_normal(); }

ordered_json view_record(const ViewTriple& t) {
    ordered_json views = ordered_json::array();
    for (View v : kViews) {
        const auto& s = t.get(v);
        views.push_back({{"view", view_name(v)}, {"index", s.index}, {"score", s.score}});
    }
    return views;
}

void assign_splits(std::vector<ManifestRow>& rows, const std::array<double, 3>& frac) {
    const double total = frac[0] + frac[1] + frac[2];
    if (!(frac[0] >= 0 && frac[1] >= 0 && frac[2] >= 0 && total > 0)) throw ConfigError("invalid split fractions");
    for (int cls = 0; cls < 2; ++cls) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i].label == cls) idx.push_back(i);
        const auto n = static_cast<long>(idx.size());
        long n_train = std::lround(frac[0] / total * static_cast<double>(n));
        long n_val = std::lround(frac[1] / total * static_cast<double>(n));
        if (n >= 3) {
            // every split gets at least one case of each class when possible
            n_train = std::clamp(n_train, 1L, n - 2);
            n_val = std::clamp(n_val, 1L, n - n_train - 1);
        } else {
            n_train = std::min(n_train, n);
            n_val = std::min(n_val, n - n_train);
        }
        for (long r = 0; r < n; ++r)
            rows[idx[static_cast<std::size_t>(r)]].split = r < n_train ? "train" : r < n_train + n_val ? "val" : "test";
    }
}

} // namespace

std::string content_hash(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_hash(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    return content_hash(std::string(bytes.begin(), bytes.end()));
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

// --- gen-phantom -------------------------------------------------------------

int run_gen_phantom(const GenPhantomOptions& opts, const PipelineConfig& cfg, const GlobalOptions& g, std::ostream& log) {
    if (opts.n < 1) throw ConfigError("--n must be >= 1");
    const AxisCodes orientation = [&] {
        try {
            return parse_axis_codes(opts.orientation);
        } catch (const OrientationError& e) {
            throw ConfigError(e.what());
        }
    }();
    try {
        cfg.phantom.validate();
    } catch (const GeometryError& e) {
        throw ConfigError(e.what());
    }

    ordered_json resolved;
    resolved["config"] = ordered_json::parse(config_to_json(cfg));
    resolved["n"] = opts.n;
    resolved["orientation"] = opts.orientation;
    resolved["split_fractions"] = opts.split_fractions;
    const std::string stamp = content_hash(resolved.dump());
    const fs::path index_path = opts.out_dir / "phantoms.json";
    if (up_to_date(index_path, stamp, g, log, "gen-phantom")) return 0;

    const auto plan = plan_dataset(opts.n, cfg.phantom.seed);
    std::vector<ManifestRow> rows;
    for (const auto& p : plan)
        rows.push_back({p.case_id, "images/" + p.case_id + ".nii.gz", "masks/" + p.case_id + ".nii.gz", p.label, ""});
    assign_splits(rows, opts.split_fractions);

    std::vector<ordered_json> records(plan.size());
    std::vector<std::string> errors(plan.size());
    parallel_for(plan.size(), g.jobs, [&](std::size_t i) {
        try {
            PhantomConfig c = cfg.phantom;
            c.seed = plan[i].seed;
            c.label = plan[i].label;
            const PhantomCase pc = generate_case(c);
            write_nifti_file(opts.out_dir / rows[i].image_path, reorient(pc.image, orientation), NiftiDatatype::float32);
            write_nifti_file(opts.out_dir / rows[i].mask_path,
                             volume_from_mask(reorient_mask(pc.mask, orientation)), NiftiDatatype::uint8);
            records[i] = {{"case_id", plan[i].case_id}, {"label", pc.label},     {"seed", pc.seed},
                          {"center", pc.center},        {"semi_axes_mm", pc.semi_axes}, {"split", rows[i].split}};
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty()) throw ConfigError("phantom " + plan[i].case_id + ": " + errors[i]);

    write_manifest(opts.out_dir / "manifest.csv", rows);
    ordered_json index;
    index["format"] = "mgmtview-phantoms";
    index["tool_version"] = kVersion;
    index["input_hash"] = stamp;
    index["resolved"] = resolved;
    index["cases"] = records;
    write_text(index_path, index.dump(2) + "\n");
    log << "gen-phantom: wrote " << rows.size() << " cases to " << opts.out_dir.string() << "\n";
    return 0;
}

// --- preprocess --------------------------------------------------------------

int run_preprocess(const PreprocessOptions& opts, const GlobalOptions& g, std::ostream& log) {
    const Manifest manifest = read_manifest(opts.manifest);
    for (int d : opts.target_dims)
        if (d < 1) throw ConfigError("target dims must be positive");
    if (!(opts.target_spacing > 0)) throw ConfigError("target spacing must be positive");

    Affine target = Affine::Identity();
    for (int a = 0; a < 3; ++a) target(a, a) = opts.target_spacing;

    ordered_json config;
    config["target_dims"] = opts.target_dims;
    config["target_spacing"] = opts.target_spacing;
    config["image_interpolation"] = "trilinear";
    config["mask_interpolation"] = "nearest";

    std::string stamp_src = config.dump() + read_text(opts.manifest);
    for (const auto& r : manifest.rows) {
        for (const auto& p : {r.image_path, r.mask_path}) {
            const fs::path path = manifest.resolve(p);
            stamp_src += fs::exists(path) ? file_hash(path) : std::string("missing");
        }
    }
    const std::string stamp = content_hash(stamp_src);
    const fs::path log_path = opts.out_dir / "preprocess_log.json";
    if (up_to_date(log_path, stamp, g, log, "preprocess")) return 0;

    const std::size_t n = manifest.rows.size();
    std::vector<std::string> errors(n);
    parallel_for(n, g.jobs, [&](std::size_t i) {
        const ManifestRow& r = manifest.rows[i];
        try {
            const Volume img = reorient_to_lps(read_nifti_file(manifest.resolve(r.image_path)));
            const SegMask mask = reorient_mask_to_lps(mask_from_volume(read_nifti_file(manifest.resolve(r.mask_path))));
            const Volume img_out = resample_to_grid(img, target, opts.target_dims, Interp::trilinear);
            const SegMask mask_out = resample_mask_to_grid(mask, target, opts.target_dims);
            write_nifti_file(opts.out_dir / "images" / (r.case_id + ".nii.gz"), img_out, NiftiDatatype::float32);
            write_nifti_file(opts.out_dir / "masks" / (r.case_id + ".nii.gz"), volume_from_mask(mask_out),
                             NiftiDatatype::uint8);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    std::vector<ManifestRow> out_rows;
    ordered_json cases = ordered_json::array();
    int failed = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const ManifestRow& r = manifest.rows[i];
        if (errors[i].empty()) {
            out_rows.push_back({r.case_id, "images/" + r.case_id + ".nii.gz", "masks/" + r.case_id + ".nii.gz", r.label, r.split});
            cases.push_back({{"case_id", r.case_id}, {"status", "ok"}});
        } else {
            ++failed;
            log << "preprocess: skipping " << r.case_id << ": " << errors[i] << "\n";
            cases.push_back({{"case_id", r.case_id}, {"status", "failed"}, {"message", errors[i]}});
        }
    }
    write_manifest(opts.out_dir / "manifest.csv", out_rows);
    ordered_json report;
    report["format"] = "mgmtview-preprocess-log";
    report["tool_version"] = kVersion;
    report["input_hash"] = stamp;
    report["config"] = config;
    report["processed"] = out_rows.size();
    report["failed"] = failed;
    report["cases"] = cases;
    write_text(log_path, report.dump(2) + "\n");
    log << "preprocess: " << out_rows.size() << " cases written, " << failed << " failed\n";
    return 0;
}

// --- extract -----------------------------------------------------------------

void write_slice_bundle(const fs::path& dir, const ViewTriple& triple) {
    for (View v : kViews) {
        const Slice2D& s = triple.get(v).image;
        Grid3D<float> grid(Dims3{s.data.width, s.data.height, 1});
        grid.data = s.data.data;
        Affine a = Affine::Identity();
        a(0, 0) = s.spacing[0];
        a(1, 1) = s.spacing[1];
        write_nifti_file(dir / (std::string(view_name(v)) + ".nii"), Volume(std::move(grid), a), NiftiDatatype::float32);
    }
}

ViewImages read_slice_bundle(const fs::path& dir) {
    ViewImages images;
    for (int v = 0; v < 3; ++v) {
        const Volume vol = read_nifti_file(dir / (std::string(view_name(kViews[v])) + ".nii"));
        if (vol.dims()[2] != 1) throw ShapeError("slice file " + dir.string() + " is not 2D");
        images[v].width = vol.dims()[0];
        images[v].height = vol.dims()[1];
        images[v].data = vol.data.data;
    }
    return images;
}

int run_extract(const ExtractOptions& opts, const GlobalOptions& g, std::ostream& log) {
    const Manifest manifest = read_manifest(opts.manifest);
    ordered_json config;
    config["strategy"] = strategy_name(opts.strategy);
    config["normalization"] = "per-slice z-score, population std";

    std::string stamp_src = config.dump() + read_text(opts.manifest);
    for (const auto& r : manifest.rows)
        for (const auto& p : {r.image_path, r.mask_path}) {
            const fs::path path = manifest.resolve(p);
            stamp_src += fs::exists(path) ? file_hash(path) : std::string("missing");
        }
    const std::string stamp = content_hash(stamp_src);
    const fs::path records_path = opts.out_dir / "records.json";
    if (up_to_date(records_path, stamp, g, log, "extract")) return 0;

    const std::size_t n = manifest.rows.size();
    std::vector<std::string> errors(n);
    std::vector<ordered_json> views(n);
    parallel_for(n, g.jobs, [&](std::size_t i) {
        const ManifestRow& r = manifest.rows[i];
        try {
            const fs::path mask_path = manifest.resolve(r.mask_path);
            if (!fs::exists(mask_path)) throw FormatError("missing mask " + mask_path.string());
            const Volume img = read_nifti_file(manifest.resolve(r.image_path));
            const SegMask mask = mask_from_volume(read_nifti_file(mask_path));
            ViewTriple t = select_multiview(mask, img, opts.strategy);
            for (View v : kViews) t.get(v).image = zscore_normalize(t.get(v).image);
            const fs::path dir = opts.out_dir / "slices" / r.case_id;
            write_slice_bundle(dir, t);
            views[i] = view_record(t);
            ordered_json rec;
            rec["format"] = "mgmtview-slice-record";
            rec["tool_version"] = kVersion;
            rec["case_id"] = r.case_id;
            rec["strategy"] = strategy_name(opts.strategy);
            rec["views"] = views[i];
            write_text(dir / "record.json", rec.dump(2) + "\n");
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    std::vector<ManifestRow> out_rows;
    ordered_json cases = ordered_json::array();
    int skipped = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const ManifestRow& r = manifest.rows[i];
        if (errors[i].empty()) {
            out_rows.push_back({r.case_id, "slices/" + r.case_id, absolute_path(manifest.resolve(r.mask_path)).string(),
                                r.label, r.split});
            cases.push_back({{"case_id", r.case_id}, {"status", "ok"}, {"strategy", strategy_name(opts.strategy)},
                             {"views", views[i]}});
        } else {
            ++skipped;
            log << "extract: skipping " << r.case_id << ": " << errors[i] << "\n";
            cases.push_back({{"case_id", r.case_id}, {"status", "skipped"}, {"message", errors[i]}});
        }
    }
    write_manifest(opts.out_dir / "manifest.csv", out_rows);
    ordered_json records;
    records["format"] = "mgmtview-extract-records";
    records["tool_version"] = kVersion;
    records["input_hash"] = stamp;
    records["config"] = config;
    records["cases"] = cases;
    write_text(records_path, records.dump(2) + "\n");
    log << "extract(" << strategy_name(opts.strategy) << "): " << out_rows.size() << " cases, " << skipped
        << " skipped\n";
    return 0;
}

// --- train / evaluate --------------------------------------------------------

std::vector<Sample> load_samples(const Manifest& manifest, const std::string& split) {
    std::vector<Sample> out;
    for (const auto& r : manifest.rows) {
        if (r.split != split) continue;
        Sample s;
        s.views = read_slice_bundle(manifest.resolve(r.image_path));
        s.label = r.label;
        s.id = r.case_id;
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

std::string split_hash(const Manifest& manifest, const std::vector<std::string>& splits) {
    std::string src;
    for (const auto& r : manifest.rows) {
        if (std::find(splits.begin(), splits.end(), r.split) == splits.end()) continue;
        src += r.case_id + ',' + std::to_string(r.label) + ',' + r.split + ';';
        const fs::path dir = manifest.resolve(r.image_path);
        for (View v : kViews) {
            const fs::path f = dir / (std::string(view_name(v)) + ".nii");
            src += fs::exists(f) ? file_hash(f) : std::string("missing");
        }
    }
    return content_hash(src);
}

fs::path history_path(const fs::path& model_out) {
    fs::path p = model_out;
    p += ".history.json";
    return p;
}

} // namespace

int run_train(const TrainOptions& opts, const PipelineConfig& cfg, const GlobalOptions& g, std::ostream& log) {
    const Manifest manifest = read_manifest(opts.manifest);
    if (manifest.split("train").empty()) throw ConfigError("manifest has no train cases");
    if (manifest.split("val").empty()) throw ConfigError("manifest has no val cases");

    const std::string stamp = content_hash(config_to_json(cfg) + split_hash(manifest, {"train", "val"}));
    const fs::path hist = history_path(opts.model_out);
    if (fs::exists(opts.model_out) && up_to_date(hist, stamp, g, log, "train")) return 0;

    const auto train_set = load_samples(manifest, "train");
    const auto val_set = load_samples(manifest, "val");
    ModelSpec spec = cfg.model;
    TrainResult result = train(train_set, val_set, cfg.train, spec);

    write_text(opts.model_out, checkpoint_to_string({result.params, result.optimizer, cfg.train}));
    ordered_json h;
    h["format"] = "mgmtview-train-history";
    h["tool_version"] = kVersion;
    h["input_hash"] = stamp;
    h["config"] = ordered_json::parse(config_to_json(cfg));
    h["n_train"] = train_set.size();
    h["n_val"] = val_set.size();
    h["best_epoch"] = result.history.best_epoch;
    h["best_val_accuracy"] = result.history.best_val_accuracy;
    h["stop_epoch"] = result.history.stop_epoch;
    ordered_json epochs = ordered_json::array();
    for (const auto& e : result.history.epochs)
        epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_accuracy", e.val_accuracy}});
    h["epochs"] = epochs;
    write_text(hist, h.dump(2) + "\n");
    log << "train: best validation accuracy " << fmt3(result.history.best_val_accuracy) << " at epoch "
        << result.history.best_epoch << ", stopped at epoch " << result.history.stop_epoch << "\n";
    return 0;
}

namespace {

EvalReport evaluate_checkpoint(const Manifest& manifest, const Checkpoint& ck, const PipelineConfig& cfg) {
    const auto test_set = load_samples(manifest, "test");
    if (test_set.empty()) throw ConfigError("manifest has no test cases");
    long pos = 0;
    for (const auto& s : test_set) pos += s.label;
    if (pos == 0 || pos == static_cast<long>(test_set.size()))
        throw ConfigError("test split holds a single class; AUC is undefined");
    return evaluate(ck.params, test_set, cfg.eval);
}

ordered_json eval_config(const PipelineConfig& cfg) {
    return {{"threshold", cfg.eval.threshold}, {"n_boot", cfg.eval.n_boot}, {"alpha", cfg.eval.alpha},
            {"seed", cfg.eval.seed}};
}

} // namespace

int run_evaluate(const EvaluateOptions& opts, const PipelineConfig& cfg, const GlobalOptions& g, std::ostream& log) {
    const Manifest manifest = read_manifest(opts.manifest);
    if (!fs::exists(opts.checkpoint)) throw ConfigError("checkpoint not found: " + opts.checkpoint.string());
    const std::string ckpt_text = read_text(opts.checkpoint);
    const std::string stamp =
        content_hash(eval_config(cfg).dump() + content_hash(ckpt_text) + split_hash(manifest, {"test"}));
    if (fs::exists(opts.report) && up_to_date(opts.report, stamp, g, log, "evaluate")) return 0;

    Checkpoint ck;
    try {
        ck = checkpoint_from_string(ckpt_text);
    } catch (const FormatError& e) {
        throw ConfigError(e.what());
    }
    const EvalReport report = evaluate_checkpoint(manifest, ck, cfg);

    ordered_json extra = eval_config(cfg);
    extra["checkpoint_hash"] = content_hash(ckpt_text);
    auto j = ordered_json::parse(report_to_string(report, extra.dump()));
    j["input_hash"] = stamp;
    write_text(opts.report, j.dump(2) + "\n");
    log << "evaluate: AUC " << fmt3(report.auc) << " (95% CI " << fmt3(report.ci_low) << "-" << fmt3(report.ci_high)
        << "), F1 " << fmt3(report.f1) << "\n";
    return 0;
}

// --- compare -----------------------------------------------------------------

int run_compare(const CompareOptions& opts, const PipelineConfig& cfg, const GlobalOptions& g, std::ostream& log) {
    if (opts.strategies.empty()) throw ConfigError("no strategies to compare");
    const Manifest manifest = read_manifest(opts.manifest);
    const fs::path work = opts.work_dir.empty()
                              ? (opts.report.has_parent_path() ? opts.report.parent_path() : fs::path(".")) / "compare_work"
                              : opts.work_dir;

    std::vector<std::string> names;
    for (auto s : opts.strategies) names.push_back(strategy_name(s));

    struct Outcome {
        std::string name;
        std::optional<EvalReport> report;
        TrainHistory history;
        std::string error;
    };
    std::vector<Outcome> outcomes;
    for (std::size_t i = 0; i < opts.strategies.size(); ++i) {
        Outcome o;
        o.name = names[i];
        const fs::path dir = work / (std::to_string(i) + "_" + o.name);
        try {
            run_extract({opts.manifest, dir, opts.strategies[i]}, g, log);
            const Manifest extracted = read_manifest(dir / "manifest.csv");
            const auto train_set = load_samples(extracted, "train");
            const auto val_set = load_samples(extracted, "val");
            const TrainResult tr = train(train_set, val_set, cfg.train, cfg.model);
            o.history = tr.history;
            o.report = evaluate_checkpoint(extracted, {tr.params, tr.optimizer, cfg.train}, cfg);
            log << "compare: " << o.name << " AUC " << fmt3(o.report->auc) << "\n";
        } catch (const std::exception& e) {
            o.error = e.what();
            log << "compare: strategy " << o.name << " failed: " << e.what() << "\n";
        }
        outcomes.push_back(std::move(o));
    }

    ordered_json table;
    table["columns"] = {"Slice extraction method", "AUC", "F1 Score", "Recall", "95% CI"};
    ordered_json rows = ordered_json::array();
    ordered_json details = ordered_json::array();
    for (const auto& o : outcomes) {
        if (!o.report) continue;
        const EvalReport& r = *o.report;
        rows.push_back({o.name, r.auc, r.f1, r.recall, fmt3(r.ci_low) + "--" + fmt3(r.ci_high)});
        details.push_back({{"strategy", o.name},
                           {"auc", r.auc},
                           {"f1", r.f1},
                           {"recall", r.recall},
                           {"precision", r.precision},
                           {"specificity", r.specificity},
                           {"ci_low", r.ci_low},
                           {"ci_high", r.ci_high},
                           {"n_pos", r.n_pos},
                           {"n_neg", r.n_neg},
                           {"best_epoch", o.history.best_epoch},
                           {"stop_epoch", o.history.stop_epoch}});
    }
    table["rows"] = rows;

    ordered_json pairwise = ordered_json::array();
    for (std::size_t a = 0; a < outcomes.size(); ++a)
        for (std::size_t b = a + 1; b < outcomes.size(); ++b) {
            if (!outcomes[a].report || !outcomes[b].report) continue;
            const EvalReport& ra = *outcomes[a].report;
            const EvalReport& rb = *outcomes[b].report;
            std::map<std::string, std::size_t> bpos;
            for (std::size_t i = 0; i < rb.case_ids.size(); ++i) bpos[rb.case_ids[i]] = i;
            std::vector<double> sa, sb;
            std::vector<int> labels;
            for (std::size_t i = 0; i < ra.case_ids.size(); ++i) {
                const auto it = bpos.find(ra.case_ids[i]);
                if (it == bpos.end()) continue;
                sa.push_back(ra.scores[i]);
                sb.push_back(rb.scores[it->second]);
                labels.push_back(ra.labels[i]);
            }
            ordered_json entry = {{"a", outcomes[a].name}, {"b", outcomes[b].name}, {"n_cases", labels.size()}};
            try {
                entry["delta_auc"] = roc_auc(sa, labels) - roc_auc(sb, labels);
                entry["p_value"] = permutation_test_auc(sa, sb, labels, cfg.n_perm, cfg.eval.seed);
                entry["p_value_reverse"] = permutation_test_auc(sb, sa, labels, cfg.n_perm, cfg.eval.seed);
            } catch (const Error& e) {
                entry["error"] = e.what();
            }
            pairwise.push_back(entry);
        }

    ordered_json errors = ordered_json::array();
    for (const auto& o : outcomes)
        if (!o.error.empty()) errors.push_back({{"strategy", o.name}, {"message", o.error}});

    ordered_json out;
    out["format"] = "mgmtview-strategy-comparison";
    out["tool_version"] = kVersion;
    out["strategies"] = names;
    out["config"] = ordered_json::parse(config_to_json(cfg));
    out["permutation_test"] = {{"scheme", "paired per-subject swap, one-sided, add-one smoothed"},
                               {"n_perm", cfg.n_perm},
                               {"seed", cfg.eval.seed}};
    out["table"] = table;
    out["details"] = details;
    out["pairwise"] = pairwise;
    out["errors"] = errors;
    write_text(opts.report, out.dump(2) + "\n");

    std::ostringstream md;
    md << "| Slice extraction method | AUC | F1 Score | Recall | 95% CI |\n|---|---|---|---|---|\n";
    for (const auto& o : outcomes)
        if (o.report)
            md << "| " << o.name << " | " << fmt3(o.report->auc) << " | " << fmt3(o.report->f1) << " | "
               << fmt3(o.report->recall) << " | " << fmt3(o.report->ci_low) << "--" << fmt3(o.report->ci_high) << " |\n";
    fs::path md_path = opts.report;
    md_path.replace_extension(".md");
    write_text(md_path, md.str());
    log << "compare: wrote " << opts.report.string() << "\n";
    return 0;
}

} // namespace mgmt
