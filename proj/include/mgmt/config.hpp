#pragma once

#include <filesystem>
#include <string>

#include "mgmt/metrics.hpp"
#include "mgmt/multiview_model.hpp"
#include "mgmt/phantom.hpp"

namespace mgmt {

/// Everything a pipeline run can be configured with. Serialized as JSON with
/// sections "train", "model", "phantom" and "eval"; absent keys keep their
/// defaults and unknown keys are rejected.
struct PipelineConfig {
    TrainConfig train;
    ModelSpec model;
    PhantomConfig phantom;
    EvalOptions eval;
    int n_perm = 10000;
};

PipelineConfig config_from_json(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);
/// Fully resolved configuration, stable key order.
std::string config_to_json(const PipelineConfig& cfg, int indent = 2);

} // namespace mgmt
