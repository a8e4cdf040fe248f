#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mgmt/multiview_model.hpp"

namespace mgmt {

/// Mann-Whitney form of the ROC area: concordant pairs plus half the ties,
/// over n_pos * n_neg. Throws DegenerateLabelsError for single-class input.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct ConfusionMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double specificity = 0.0;
    double f1 = 0.0;
    long tp = 0, fp = 0, tn = 0, fn = 0;
    /// Set when any ratio had a zero denominator and was reported as 0.
    bool degenerate = false;
};

/// Predicted positive iff score >= threshold.
ConfusionMetrics confusion_metrics(std::span<const double> scores, std::span<const int> labels,
                                   double threshold = 0.5);

using Statistic = std::function<double(std::span<const double>, std::span<const int>)>;

struct BootstrapOptions {
    int n_boot = 2000;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    /// Redraws allowed per replicate when a resample holds one class only.
    int max_retries = 100;
};

/// Percentile bootstrap interval of `statistic` (roc_auc when empty).
/// Replicate b draws from its own stream (seed, b).
std::pair<double, double> bootstrap_ci(std::span<const double> scores, std::span<const int> labels,
                                       const BootstrapOptions& opts = {}, const Statistic& statistic = {});

/// One-sided paired permutation test of auc(a) > auc(b): each subject's
/// (a, b) pair is swapped with probability 1/2; p = (1 + #{d >= d_obs}) / (1 + n_perm).
double permutation_test_auc(std::span<const double> scores_a, std::span<const double> scores_b,
                            std::span<const int> labels, int n_perm = 10000, std::uint64_t seed = 0);

struct EvalOptions {
    double threshold = 0.5;
    int n_boot = 2000;
    double alpha = 0.05;
    std::uint64_t seed = 0;
};

struct EvalReport {
    double auc = 0.0;
    double f1 = 0.0, recall = 0.0, precision = 0.0, specificity = 0.0;
    double ci_low = 0.0, ci_high = 0.0;
    double threshold = 0.5;
    long n_pos = 0, n_neg = 0;
    bool degenerate = false;
    int n_boot = 0;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    std::vector<std::string> case_ids;
    std::vector<double> scores;
    std::vector<int> labels;
};

/// Report from raw scores; `evaluate` runs the model first.
EvalReport evaluate_scores(std::vector<double> scores, std::vector<int> labels, const EvalOptions& opts = {},
                           std::vector<std::string> case_ids = {});

EvalReport evaluate(const ModelParams<float>& params, const std::vector<Sample>& test_set,
                    const EvalOptions& opts = {});

/// Serialized report with stable key order.
std::string report_to_string(const EvalReport& report, const std::string& extra_config_json = "{}");

} // namespace mgmt
