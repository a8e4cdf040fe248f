#include "mgmt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "mgmt/rng.hpp"
#include "mgmt/version.hpp"

namespace mgmt {
namespace {

double ratio(long num, long den, bool& degenerate) {
    if (den == 0) {
        degenerate = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

// Linear interpolation between order statistics (the common "type 7" rule).
double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + (v[hi] - v[lo]) * frac;
}

void check_sizes(std::size_t a, std::size_t b) {
    if (a != b) throw DataError("scores and labels differ in length");
}

} // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    check_sizes(scores.size(), labels.size());
    const std::size_t n = scores.size();
    long n_pos = 0;
    for (int y : labels) n_pos += y == 1;
    const long n_neg = static_cast<long>(n) - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DegenerateLabelsError("AUC needs at least one positive and one negative");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks (1-based) summed over positives
    double pos_rank_sum = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t)
            if (labels[order[t]] == 1) pos_rank_sum += midrank;
        i = j + 1;
    }
    const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

ConfusionMetrics confusion_metrics(std::span<const double> scores, std::span<const int> labels, double threshold) {
    check_sizes(scores.size(), labels.size());
    ConfusionMetrics m;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        const bool truth = labels[i] == 1;
        if (pred && truth) ++m.tp;
        else if (pred) ++m.fp;
        else if (truth) ++m.fn;
        else ++m.tn;
    }
    m.precision = ratio(m.tp, m.tp + m.fp, m.degenerate);
    m.recall = ratio(m.tp, m.tp + m.fn, m.degenerate);
    m.specificity = ratio(m.tn, m.tn + m.fp, m.degenerate);
    if (m.precision + m.recall == 0.0) {
        m.degenerate = true;
        m.f1 = 0.0;
    } else {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    return m;
}

std::pair<double, double> bootstrap_ci(std::span<const double> scores, std::span<const int> labels,
                                       const BootstrapOptions& opts, const Statistic& statistic) {
    check_sizes(scores.size(), labels.size());
    if (scores.empty()) throw DataError("bootstrap needs at least one sample");
    if (opts.n_boot < 1) throw ConfigError("n_boot must be >= 1");
    if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    const Statistic stat = statistic ? statistic : Statistic([](auto s, auto l) { return roc_auc(s, l); });

    const std::size_t n = scores.size();
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(opts.n_boot));
    std::vector<double> rs(n);
    std::vector<int> rl(n);
    for (int b = 0; b < opts.n_boot; ++b) {
        Rng rng = Rng::substream(opts.seed, static_cast<std::uint64_t>(b));
        bool ok = false;
        for (int attempt = 0; attempt <= opts.max_retries && !ok; ++attempt) {
            long pos = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto k = static_cast<std::size_t>(rng.below(n));
                rs[i] = scores[k];
                rl[i] = labels[k];
                pos += rl[i] == 1;
            }
            ok = pos > 0 && pos < static_cast<long>(n);
        }
        if (!ok)
            throw BootstrapDegenerateError("replicate " + std::to_string(b) + " drew a single class " +
                                           std::to_string(opts.max_retries + 1) + " times");
        values.push_back(stat(rs, rl));
    }
    return {percentile(values, opts.alpha / 2.0), percentile(values, 1.0 - opts.alpha / 2.0)};
}

double permutation_test_auc(std::span<const double> scores_a, std::span<const double> scores_b,
                            std::span<const int> labels, int n_perm, std::uint64_t seed) {
    check_sizes(scores_a.size(), labels.size());
    check_sizes(scores_b.size(), labels.size());
    if (n_perm < 0) throw ConfigError("n_perm must be >= 0");
    const double observed = roc_auc(scores_a, labels) - roc_auc(scores_b, labels);
    // absorbs summation-order rounding between algebraically equal deltas
    constexpr double kTieTol = 1e-12;

    const std::size_t n = labels.size();
    std::vector<double> pa(n), pb(n);
    long at_least = 0;
    for (int p = 0; p < n_perm; ++p) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(p));
        for (std::size_t i = 0; i < n; ++i) {
            const bool swap = rng.bernoulli(0.5);
            pa[i] = swap ? scores_b[i] : scores_a[i];
            pb[i] = swap ? scores_a[i] : scores_b[i];
        }
        const double delta = roc_auc(pa, labels) - roc_auc(pb, labels);
        if (delta >= observed - kTieTol) ++at_least;
    }
    return static_cast<double>(1 + at_least) / static_cast<double>(1 + n_perm);
}

EvalReport evaluate_scores(std::vector<double> scores, std::vector<int> labels, const EvalOptions& opts,
                           std::vector<std::string> case_ids) {
    EvalReport r;
    r.auc = roc_auc(scores, labels);
    const ConfusionMetrics cm = confusion_metrics(scores, labels, opts.threshold);
    r.f1 = cm.f1;
    r.recall = cm.recall;
    r.precision = cm.precision;
    r.specificity = cm.specificity;
    r.degenerate = cm.degenerate;
    const auto [lo, hi] = bootstrap_ci(scores, labels, {opts.n_boot, opts.alpha, opts.seed, 100});
    r.ci_low = lo;
    r.ci_high = hi;
    r.threshold = opts.threshold;
    r.n_pos = cm.tp + cm.fn;
    r.n_neg = cm.tn + cm.fp;
    r.n_boot = opts.n_boot;
    r.alpha = opts.alpha;
    r.seed = opts.seed;
    r.case_ids = std::move(case_ids);
    r.scores = std::move(scores);
    r.labels = std::move(labels);
    return r;
}

EvalReport evaluate(const ModelParams<float>& params, const std::vector<Sample>& test_set, const EvalOptions& opts) {
    if (test_set.empty()) throw DataError("test set is empty");
    std::vector<int> labels;
    std::vector<std::string> ids;
    for (const auto& s : test_set) {
        labels.push_back(s.label);
        ids.push_back(s.id);
    }
    return evaluate_scores(predict(params, test_set), std::move(labels), opts, std::move(ids));
}

std::string report_to_string(const EvalReport& r, const std::string& extra_config_json) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["format"] = "mgmtview-eval-report";
    j["tool_version"] = kVersion;
    j["metrics"] = {{"auc", r.auc},
                    {"f1", r.f1},
                    {"recall", r.recall},
                    {"precision", r.precision},
                    {"specificity", r.specificity},
                    {"ci_low", r.ci_low},
                    {"ci_high", r.ci_high}};
    j["counts"] = {{"n_pos", r.n_pos}, {"n_neg", r.n_neg}};
    j["degenerate"] = r.degenerate;
    j["method"] = {{"auc", "Mann-Whitney U with half credit for ties"},
                   {"threshold_rule", "positive iff score >= threshold"},
                   {"threshold", r.threshold},
                   {"ci", "percentile bootstrap on AUC, single-class resamples redrawn"},
                   {"n_boot", r.n_boot},
                   {"alpha", r.alpha},
                   {"seed", r.seed}};
    j["config"] = ordered_json::parse(extra_config_json);
    ordered_json cases = ordered_json::array();
    for (std::size_t i = 0; i < r.scores.size(); ++i) {
        ordered_json c;
        c["case_id"] = i < r.case_ids.size() ? r.case_ids[i] : std::to_string(i);
        c["score"] = r.scores[i];
        c["label"] = r.labels[i];
        cases.push_back(c);
    }
    j["cases"] = cases;
    return j.dump(2) + "\n";
}

} // namespace mgmt
