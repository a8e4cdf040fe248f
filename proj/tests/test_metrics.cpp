#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "mgmt/metrics.hpp"
#include "support.hpp"

using namespace mgmt;

namespace {

double pair_count_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double num = 0.0;
    long np = 0, nn = 0;
    for (int v : y) (v ? np : nn)++;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (y[i] == 1 && y[j] == 0) num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    return num / (static_cast<double>(np) * static_cast<double>(nn));
}

void random_instance(Rng& rng, int n, std::vector<double>& s, std::vector<int>& y, bool ties) {
    s.assign(static_cast<std::size_t>(n), 0.0);
    y.assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        s[i] = ties ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform();
        y[i] = rng.bernoulli(0.5);
    }
    y[0] = 1;
    y[1] = 0;
}

} // namespace

TEST_SUITE("metrics") {

TEST_CASE("auc examples") {
    CHECK(roc_auc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}) == 1.0);
    CHECK(roc_auc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0}) == 0.0);
    CHECK(roc_auc(std::vector<double>{0.8, 0.4, 0.6, 0.2}, std::vector<int>{1, 1, 0, 0}) == 0.75);
    CHECK(roc_auc(std::vector<double>{0.3, 0.3, 0.3}, std::vector<int>{1, 0, 1}) == 0.5);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{0.3, 0.4}, std::vector<int>{1, 1}), DegenerateLabelsError);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{0.3}, std::vector<int>{1, 0}), DataError);
}

TEST_CASE("auc matches pair counting") {
    Rng rng(31);
    for (int t = 0; t < 500; ++t) {
        std::vector<double> s;
        std::vector<int> y;
        random_instance(rng, 2 + static_cast<int>(rng.below(49)), s, y, t % 2 == 0);
        CHECK(std::abs(roc_auc(s, y) - pair_count_auc(s, y)) <= 1e-12);
    }
}

TEST_CASE("auc invariances") {
    Rng rng(32);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> s;
        std::vector<int> y;
        random_instance(rng, 30, s, y, false);
        const double a = roc_auc(s, y);
        std::vector<double> m = s;
        for (auto& v : m) v = std::exp(3.0 * v) - 7.0;
        CHECK(roc_auc(m, y) == doctest::Approx(a).epsilon(1e-12));
        std::vector<int> flipped = y;
        for (auto& v : flipped) v = 1 - v;
        CHECK(roc_auc(s, y) + roc_auc(s, flipped) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("confusion metrics") {
    const auto ok = confusion_metrics(std::vector<double>{0.7, 0.3}, std::vector<int>{1, 0});
    CHECK(ok.precision == 1.0);
    CHECK(ok.recall == 1.0);
    CHECK(ok.specificity == 1.0);
    CHECK(ok.f1 == 1.0);
    CHECK_FALSE(ok.degenerate);

    const auto all_pos = confusion_metrics(std::vector<double>{0.9, 0.8, 0.7, 0.6}, std::vector<int>{1, 0, 1, 0});
    CHECK(all_pos.recall == 1.0);
    CHECK(all_pos.specificity == 0.0);
    CHECK(all_pos.precision == 0.5);

    const auto none = confusion_metrics(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 0});
    CHECK(none.precision == 0.0);
    CHECK(none.f1 == 0.0);
    CHECK(none.degenerate);

    const auto edge = confusion_metrics(std::vector<double>{0.5, 0.49}, std::vector<int>{1, 0});
    CHECK(edge.tp == 1);
    CHECK(edge.tn == 1);
}

TEST_CASE("f1 agrees with precision and recall") {
    Rng rng(33);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> s;
        std::vector<int> y;
        random_instance(rng, 20, s, y, false);
        const auto m = confusion_metrics(s, y, rng.uniform());
        const double pr = m.precision + m.recall;
        CHECK(std::abs(m.f1 - (pr > 0 ? 2 * m.precision * m.recall / pr : 0.0)) <= 1e-9);
        for (double v : {m.precision, m.recall, m.specificity, m.f1}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("bootstrap") {
    const std::vector<double> sep{0.9, 0.8, 0.7, 0.3, 0.2, 0.1};
    const std::vector<int> lab{1, 1, 1, 0, 0, 0};
    const auto [lo, hi] = bootstrap_ci(sep, lab);
    CHECK(lo == 1.0);
    CHECK(hi == 1.0);

    Rng rng(34);
    std::vector<double> s;
    std::vector<int> y;
    random_instance(rng, 40, s, y, false);
    BootstrapOptions one;
    one.n_boot = 1;
    const auto ci1 = bootstrap_ci(s, y, one);
    CHECK(ci1.first == ci1.second);

    BootstrapOptions o;
    o.seed = 5;
    o.n_boot = 300;
    const auto a = bootstrap_ci(s, y, o);
    CHECK(a == bootstrap_ci(s, y, o));
    CHECK(a.first <= a.second);

    std::vector<double> lonely(30, 0.5);
    std::vector<int> imbalanced(30, 0);
    imbalanced[0] = 1;
    BootstrapOptions strict;
    strict.max_retries = 0;
    CHECK_THROWS_AS(bootstrap_ci(lonely, imbalanced, strict), BootstrapDegenerateError);
}

TEST_CASE("bootstrap interval narrows with more data") {
    Rng rng(35);
    auto draw = [&](int n, std::vector<double>& s, std::vector<int>& y) {
        s.resize(static_cast<std::size_t>(n));
        y.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            y[i] = i % 2;
            s[i] = rng.normal() + (y[i] ? 1.0 : 0.0);
        }
    };
    int narrower = 0;
    for (int t = 0; t < 50; ++t) {
        std::vector<double> s1, s2;
        std::vector<int> y1, y2;
        draw(50, s1, y1);
        draw(400, s2, y2);
        BootstrapOptions o;
        o.n_boot = 200;
        o.seed = static_cast<std::uint64_t>(t);
        const auto c1 = bootstrap_ci(s1, y1, o), c2 = bootstrap_ci(s2, y2, o);
        narrower += (c2.second - c2.first) < (c1.second - c1.first);
    }
    CHECK(narrower >= 45);
}

TEST_CASE("permutation test examples") {
    Rng rng(36);
    std::vector<double> s;
    std::vector<int> y;
    random_instance(rng, 30, s, y, false);
    CHECK(permutation_test_auc(s, s, y, 2000, 1) >= 0.5);
    CHECK(permutation_test_auc(s, s, y, 0, 1) == 1.0);
    CHECK(permutation_test_auc(s, s, y, 500, 9) == permutation_test_auc(s, s, y, 500, 9));

    std::vector<double> perfect(40), noise(40);
    std::vector<int> lab(40);
    for (int i = 0; i < 40; ++i) {
        lab[i] = i % 2;
        perfect[i] = lab[i] + 0.01 * i;
        noise[i] = rng.uniform();
    }
    CHECK(permutation_test_auc(perfect, noise, lab, 2000, 3) <= 0.01);
    CHECK_THROWS_AS(permutation_test_auc(s, std::vector<double>(3, 0.0), y), DataError);
}

TEST_CASE("evaluate scores and report") {
    const EvalReport r = evaluate_scores({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}, {}, {"a", "b", "c", "d"});
    CHECK(r.auc == 1.0);
    CHECK(r.f1 == 1.0);
    CHECK(r.ci_low == 1.0);
    CHECK(r.ci_high == 1.0);
    CHECK(r.n_pos == 2);
    CHECK(r.n_neg == 2);

    const EvalReport flat = evaluate_scores({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0});
    CHECK(flat.auc == 0.5);

    const std::string text = report_to_string(r, "{\"note\":1}");
    CHECK(text == report_to_string(r, "{\"note\":1}"));
    const auto j = nlohmann::json::parse(text);
    CHECK(j.at("metrics").at("auc").get<double>() == 1.0);
    CHECK(j.contains("tool_version"));
    CHECK(j.at("config").at("note").get<int>() == 1);
    CHECK(j.at("cases").size() == 4);
    CHECK_THROWS_AS(evaluate_scores({0.1, 0.2}, {1, 1}), DegenerateLabelsError);
}

}
