#include "mgmt/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mgmt {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void reject_unknown(const json& obj, const std::string& section, std::initializer_list<const char*> known) {
    if (!obj.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw ConfigError("unknown config key '" + section + "." + key + "'");
}

template <class T>
void read(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

} // namespace

PipelineConfig config_from_json(const std::string& text) {
    PipelineConfig cfg;
    try {
        const json root = json::parse(text);
        reject_unknown(root, "<root>", {"train", "model", "phantom", "eval"});

        if (root.contains("train")) {
            const json& t = root["train"];
            reject_unknown(t, "train", {"learning_rate", "batch_size", "optimizer", "patience_epochs", "max_epochs",
                                        "seed", "augment", "augment_config"});
            read(t, "learning_rate", cfg.train.learning_rate);
            read(t, "batch_size", cfg.train.batch_size);
            if (t.contains("optimizer")) cfg.train.optimizer = parse_optimizer(t["optimizer"].get<std::string>());
            read(t, "patience_epochs", cfg.train.patience_epochs);
            read(t, "max_epochs", cfg.train.max_epochs);
            read(t, "seed", cfg.train.seed);
            read(t, "augment", cfg.train.augment);
            if (t.contains("augment_config")) {
                const json& a = t["augment_config"];
                reject_unknown(a, "train.augment_config", {"p_hflip", "p_vflip", "rotation_range_deg", "sharpness_range", "seed"});
                auto& ac = cfg.train.augment_cfg;
                read(a, "p_hflip", ac.p_hflip);
                read(a, "p_vflip", ac.p_vflip);
                read(a, "rotation_range_deg", ac.rotation_range_deg);
                read(a, "sharpness_range", ac.sharpness_range);
                read(a, "seed", ac.seed);
            }
        }
        if (root.contains("model")) {
            const json& m = root["model"];
            reject_unknown(m, "model", {"conv_filters", "feature_dim", "hidden1", "hidden2"});
            read(m, "conv_filters", cfg.model.branch.conv_filters);
            read(m, "feature_dim", cfg.model.branch.feature_dim);
            read(m, "hidden1", cfg.model.hidden1);
            read(m, "hidden2", cfg.model.hidden2);
        }
        if (root.contains("phantom")) {
            const json& p = root["phantom"];
            reject_unknown(p, "phantom", {"dims", "tumor_center", "semi_axes_mm", "class_effect", "noise_sigma",
                                          "size_jitter", "seed"});
            read(p, "dims", cfg.phantom.dims);
            if (p.contains("tumor_center")) {
                if (p["tumor_center"].is_string()) {
                    if (p["tumor_center"].get<std::string>() != "random")
                        throw ConfigError("phantom.tumor_center must be \"random\" or [x, y, z]");
                    cfg.phantom.tumor_center.reset();
                } else {
                    cfg.phantom.tumor_center = p["tumor_center"].get<std::array<double, 3>>();
                }
            }
            read(p, "semi_axes_mm", cfg.phantom.semi_axes_mm);
            read(p, "class_effect", cfg.phantom.class_effect);
            read(p, "noise_sigma", cfg.phantom.noise_sigma);
            read(p, "size_jitter", cfg.phantom.size_jitter);
            read(p, "seed", cfg.phantom.seed);
        }
        if (root.contains("eval")) {
            const json& e = root["eval"];
            reject_unknown(e, "eval", {"threshold", "n_boot", "alpha", "seed", "n_perm"});
            read(e, "threshold", cfg.eval.threshold);
            read(e, "n_boot", cfg.eval.n_boot);
            read(e, "alpha", cfg.eval.alpha);
            read(e, "seed", cfg.eval.seed);
            read(e, "n_perm", cfg.n_perm);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    cfg.train.validate();
    cfg.model.branch.validate();
    if (cfg.model.hidden1 < 1 || cfg.model.hidden2 < 1) throw ConfigError("hidden layer widths must be positive");
    if (cfg.eval.n_boot < 1) throw ConfigError("eval.n_boot must be >= 1");
    if (!(cfg.eval.alpha > 0 && cfg.eval.alpha < 1)) throw ConfigError("eval.alpha must lie in (0, 1)");
    if (cfg.n_perm < 0) throw ConfigError("eval.n_perm must be >= 0");
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

std::string config_to_json(const PipelineConfig& cfg, int indent) {
    ordered_json j;
    const auto& t = cfg.train;
    j["train"] = {{"learning_rate", t.learning_rate},
                  {"batch_size", t.batch_size},
                  {"optimizer", optimizer_name(t.optimizer)},
                  {"patience_epochs", t.patience_epochs},
                  {"max_epochs", t.max_epochs},
                  {"seed", t.seed},
                  {"augment", t.augment},
                  {"augment_config",
                   {{"p_hflip", t.augment_cfg.p_hflip},
                    {"p_vflip", t.augment_cfg.p_vflip},
                    {"rotation_range_deg", t.augment_cfg.rotation_range_deg},
                    {"sharpness_range", t.augment_cfg.sharpness_range},
                    {"seed", t.augment_cfg.seed}}}};
    j["model"] = {{"conv_filters", cfg.model.branch.conv_filters},
                  {"feature_dim", cfg.model.branch.feature_dim},
                  {"hidden1", cfg.model.hidden1},
                  {"hidden2", cfg.model.hidden2}};
    const auto& p = cfg.phantom;
    ordered_json center = p.tumor_center ? ordered_json(*p.tumor_center) : ordered_json("random");
    j["phantom"] = {{"dims", p.dims},
                    {"tumor_center", center},
                    {"semi_axes_mm", p.semi_axes_mm},
                    {"class_effect", p.class_effect},
                    {"noise_sigma", p.noise_sigma},
                    {"size_jitter", p.size_jitter},
                    {"seed", p.seed}};
    j["eval"] = {{"threshold", cfg.eval.threshold},
                 {"n_boot", cfg.eval.n_boot},
                 {"alpha", cfg.eval.alpha},
                 {"seed", cfg.eval.seed},
                 {"n_perm", cfg.n_perm}};
    return j.dump(indent);
}

} // namespace mgmt
