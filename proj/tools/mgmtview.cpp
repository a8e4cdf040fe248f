// mgmtview command-line front end.
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "mgmt/pipeline.hpp"
#include "mgmt/version.hpp"

namespace {

using namespace mgmt;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> lr;
    std::optional<int> max_epochs, patience, batch_size, n_boot, n_perm;
    std::optional<double> threshold;
    fs::path config;
};

void add_train_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--lr", o.lr, "Learning rate");
    cmd->add_option("--max-epochs", o.max_epochs, "Maximum number of epochs");
    cmd->add_option("--patience", o.patience, "Early-stopping patience in epochs");
    cmd->add_option("--batch-size", o.batch_size, "Mini-batch size");
}

void add_eval_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--n-boot", o.n_boot, "Bootstrap replicates for the AUC interval");
    cmd->add_option("--threshold", o.threshold, "Decision threshold for F1/recall/precision");
}

PipelineConfig resolve_config(const Overrides& o) {
    PipelineConfig cfg = o.config.empty() ? PipelineConfig{} : load_config(o.config);
    if (o.seed) cfg.train.seed = cfg.eval.seed = cfg.phantom.seed = *o.seed;
    if (o.lr) cfg.train.learning_rate = *o.lr;
    if (o.max_epochs) cfg.train.max_epochs = *o.max_epochs;
    if (o.patience) cfg.train.patience_epochs = *o.patience;
    if (o.batch_size) cfg.train.batch_size = *o.batch_size;
    if (o.n_boot) cfg.eval.n_boot = *o.n_boot;
    if (o.threshold) cfg.eval.threshold = *o.threshold;
    if (o.n_perm) cfg.n_perm = *o.n_perm;
    // re-run the strict validation after overrides
    return config_from_json(config_to_json(cfg));
}

SliceStrategy strategy_flag(const std::string& s) {
    try {
        return parse_strategy(s);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-view MGMT classification pipeline"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    Overrides o;
    app.add_option("--seed", o.seed, "Seed for phantoms, training and bootstrap");
    app.add_option("--jobs", g.jobs, "Worker threads for per-case stages")->check(CLI::PositiveNumber);
    app.add_flag("--overwrite", g.overwrite, "Rebuild outputs even when inputs are unchanged");

    GenPhantomOptions gen;
    std::optional<double> class_effect, noise;
    std::optional<std::vector<int>> gen_dims;
    auto* c_gen = app.add_subcommand("gen-phantom", "Generate a synthetic labelled dataset");
    c_gen->add_option("--out", gen.out_dir, "Output directory")->required();
    c_gen->add_option("--n", gen.n, "Number of cases");
    c_gen->add_option("--dims", gen_dims, "Volume dimensions")->expected(3);
    c_gen->add_option("--class-effect", class_effect, "Tumor intensity shift of label-1 cases (same units as --noise)");
    c_gen->add_option("--noise", noise, "Noise standard deviation");
    c_gen->add_option("--orientation", gen.orientation, "Voxel axis orientation of the written files, e.g. LPS or RAS");
    c_gen->add_option("--split", gen.split_fractions, "Train/val/test fractions")->expected(3);
    c_gen->add_option("--config", o.config, "Configuration file");

    PreprocessOptions pre;
    std::vector<int> pre_dims;
    auto* c_pre = app.add_subcommand("preprocess", "Reorient to LPS and resample onto a common grid");
    c_pre->add_option("--manifest", pre.manifest, "Input manifest")->required();
    c_pre->add_option("--out", pre.out_dir, "Output directory")->required();
    c_pre->add_option("--dims", pre_dims, "Target grid dimensions (default 240 240 155)")->expected(3);
    c_pre->add_option("--spacing", pre.target_spacing, "Target isotropic spacing in mm");

    ExtractOptions ext;
    std::string ext_strategy = "feret";
    auto* c_ext = app.add_subcommand("extract", "Select and normalize one slice per view");
    c_ext->add_option("--manifest", ext.manifest, "Preprocessed manifest")->required();
    c_ext->add_option("--out", ext.out_dir, "Output directory")->required();
    c_ext->add_option("--strategy", ext_strategy, "feret, martin or area");

    TrainOptions tr;
    auto* c_train = app.add_subcommand("train", "Train the multi-view classifier");
    c_train->add_option("--manifest", tr.manifest, "Extracted manifest")->required();
    c_train->add_option("--out", tr.model_out, "Checkpoint path")->required();
    c_train->add_option("--config", o.config, "Configuration file");
    add_train_flags(c_train, o);

    EvaluateOptions ev;
    auto* c_eval = app.add_subcommand("evaluate", "Score the test split and write a report");
    c_eval->add_option("--manifest", ev.manifest, "Extracted manifest")->required();
    c_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint path")->required();
    c_eval->add_option("--report", ev.report, "Report path")->required();
    c_eval->add_option("--config", o.config, "Configuration file");
    add_eval_flags(c_eval, o);

    CompareOptions cmp;
    std::vector<std::string> cmp_strategies{"feret", "martin", "area"};
    auto* c_cmp = app.add_subcommand("compare", "Train and evaluate one model per slice strategy");
    c_cmp->add_option("--manifest", cmp.manifest, "Preprocessed manifest")->required();
    c_cmp->add_option("--report", cmp.report, "Report path (a .md table is written next to it)")->required();
    c_cmp->add_option("--strategies", cmp_strategies, "Strategies to compare");
    c_cmp->add_option("--work-dir", cmp.work_dir, "Directory for per-strategy outputs");
    c_cmp->add_option("--config", o.config, "Configuration file");
    c_cmp->add_option("--n-perm", o.n_perm, "Permutations per pairwise test");
    add_train_flags(c_cmp, o);
    add_eval_flags(c_cmp, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*c_gen) {
            PipelineConfig cfg = resolve_config(o);
            if (gen_dims) cfg.phantom.dims = {(*gen_dims)[0], (*gen_dims)[1], (*gen_dims)[2]};
            if (class_effect) cfg.phantom.class_effect = *class_effect;
            if (noise) cfg.phantom.noise_sigma = *noise;
            return run_gen_phantom(gen, cfg, g, std::cout);
        }
        if (*c_pre) {
            if (!pre_dims.empty()) pre.target_dims = {pre_dims[0], pre_dims[1], pre_dims[2]};
            return run_preprocess(pre, g, std::cout);
        }
        if (*c_ext) {
            ext.strategy = strategy_flag(ext_strategy);
            return run_extract(ext, g, std::cout);
        }
        if (*c_train) return run_train(tr, resolve_config(o), g, std::cout);
        if (*c_eval) return run_evaluate(ev, resolve_config(o), g, std::cout);
        if (*c_cmp) {
            cmp.strategies.clear();
            for (const auto& s : cmp_strategies) cmp.strategies.push_back(strategy_flag(s));
            return run_compare(cmp, resolve_config(o), g, std::cout);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
