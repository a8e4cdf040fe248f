#include <doctest.h>

#include <cmath>

#include "mgmt/multiview_model.hpp"
#include "support.hpp"

using namespace mgmt;

namespace {

ModelSpec spec_for(int w, int h) {
    ModelSpec s;
    for (auto& shape : s.input_shapes) shape = {w, h};
    return s;
}

ModelSpec small_spec(int w, int h) {
    ModelSpec s = spec_for(w, h);
    s.branch.conv_filters = {4, 6};
    s.branch.feature_dim = 8;
    s.hidden1 = 8;
    s.hidden2 = 4;
    return s;
}

ViewImages random_images(Rng& rng, int w, int h) {
    ViewImages im;
    for (auto& g : im) {
        g = Grid2D<float>(w, h);
        for (auto& v : g.data) v = static_cast<float>(rng.normal());
    }
    return im;
}

// Bright centered square whose side depends on the label, plus noise, z-scored.
Sample blob_sample(Rng& rng, int label, int side) {
    Sample s;
    s.label = label;
    const int half = label ? 5 : 2;
    for (auto& g : s.views) {
        Slice2D sl;
        sl.data = Grid2D<float>(side, side);
        const int cx = side / 2 + static_cast<int>(rng.below(3)) - 1, cy = side / 2 + static_cast<int>(rng.below(3)) - 1;
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) {
                const bool in = std::abs(x - cx) <= half && std::abs(y - cy) <= half;
                sl.data.at(x, y) = static_cast<float>((in ? 3.0 : 0.0) + 0.3 * rng.normal());
            }
        g = zscore_normalize(sl).data;
    }
    return s;
}

std::vector<Sample> blob_set(std::uint64_t seed, int n, int side) {
    Rng rng(seed);
    std::vector<Sample> out;
    for (int i = 0; i < n; ++i) out.push_back(blob_sample(rng, i % 2, side));
    return out;
}

double batch_loss(const ModelParams<double>& p, const std::vector<Sample>& batch) {
    double s = 0.0;
    for (const auto& x : batch) s += bce_loss(forward(x.views, p), x.label);
    return s / static_cast<double>(batch.size());
}

} // namespace

TEST_SUITE("multiview_model") {

TEST_CASE("zero weights give probability one half") {
    ModelParams<float> p(spec_for(8, 8));
    Rng rng(1);
    CHECK(forward(random_images(rng, 8, 8), p) == 0.5f);
}

TEST_CASE("branches are view specific") {
    Rng rng(2);
    const auto p = init_params<double>(spec_for(12, 12), 7);
    ViewImages im = random_images(rng, 12, 12);
    const double base = forward(im, p);
    std::swap(im[0], im[2]);
    CHECK(forward(im, p) != base);
}

TEST_CASE("forward is deterministic and rejects wrong shapes") {
    Rng rng(3);
    const auto p = init_params<float>(spec_for(8, 12), 1);
    const ViewImages im = random_images(rng, 8, 12);
    CHECK(forward(im, p) == forward(im, p));
    const ViewImages bad = random_images(rng, 12, 8);
    CHECK_THROWS_AS(forward(bad, p), ShapeError);
}

TEST_CASE("loss") {
    CHECK(bce_loss(0.5, 0) == doctest::Approx(0.6931471805599453));
    CHECK(bce_loss(0.5, 1) == doctest::Approx(0.6931471805599453));
    CHECK(bce_loss(1.0, 1) < 1e-6);
    CHECK(bce_loss(1.0, 0) == doctest::Approx(-std::log(1e-7)));
    CHECK(std::isfinite(bce_loss(0.0, 1)));
}

TEST_CASE("zero input: first-layer weight gradients vanish, bias gradients do not") {
    ModelSpec spec = spec_for(8, 8);
    auto p = init_params<double>(spec, 4);
    const auto& c0 = p.layout.branches[0].conv[0];
    for (int o = 0; o < c0.out_channels; ++o) p.values[c0.bias + o] = 0.1;
    ViewImages im;
    for (auto& g : im) g = Grid2D<float>(8, 8);
    ForwardCache<double> cache;
    forward(im, p, &cache);
    const auto g = backward(cache, p, 1);
    for (std::size_t i = 0; i < static_cast<std::size_t>(c0.out_channels) * 9; ++i) CHECK(g.values[c0.weight + i] == 0.0);
    double bias_norm = 0.0;
    for (int o = 0; o < c0.out_channels; ++o) bias_norm += std::abs(g.values[c0.bias + o]);
    CHECK(bias_norm > 0.0);
}

TEST_CASE("gradient check, default spec") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Rng rng(seed + 50);
        const auto p = init_params<double>(spec_for(16, 16), seed);
        GradCheckOptions opts;
        opts.max_params = 500;
        opts.seed = seed;
        CHECK(grad_check(p, random_images(rng, 16, 16), static_cast<int>(seed % 2), opts) < 1e-4);
    }
}

TEST_CASE("gradient check over every parameter") {
    Rng rng(60);
    const auto p = init_params<double>(small_spec(8, 8), 9);
    CHECK(grad_check(p, random_images(rng, 8, 8), 1) < 1e-4);
}

TEST_CASE("gradient check with an identity-activation classifier") {
    Rng rng(61);
    ModelSpec spec = spec_for(16, 16);
    spec.classifier_activation = Activation::identity;
    const auto p = init_params<double>(spec, 3);
    const ViewImages im = random_images(rng, 16, 16);
    GradCheckOptions opts;
    opts.max_params = 500;
    const double fine = grad_check(p, im, 0, opts);
    CHECK(fine < 1e-6);
    opts.eps = 1e-2;
    CHECK(grad_check(p, im, 0, opts) > fine);
}

TEST_CASE("adagrad step") {
    std::vector<double> p{1.0}, g{2.0}, acc{0.0};
    adagrad_step(std::span<double>(p), std::span<const double>(g), std::span<double>(acc), 0.1);
    CHECK(acc[0] == 4.0);
    const double expected = 1.0 - 0.1 * 2.0 / (2.0 + 1e-10);
    CHECK(p[0] == doctest::Approx(expected).epsilon(1e-15));
    CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-9));

    std::vector<double> z{0.0};
    adagrad_step(std::span<double>(p), std::span<const double>(z), std::span<double>(acc), 0.1);
    CHECK(acc[0] == 4.0);
    CHECK(p[0] == doctest::Approx(expected).epsilon(1e-15));

    std::vector<double> q{0.0}, a2{0.0}, gg{0.5};
    adagrad_step(std::span<double>(q), std::span<const double>(gg), std::span<double>(a2), 0.1);
    const double first = -q[0];
    adagrad_step(std::span<double>(q), std::span<const double>(gg), std::span<double>(a2), 0.1);
    const double second = -q[0] - first;
    CHECK(second < first);
    CHECK(second == doctest::Approx(0.1 * 0.5 / std::sqrt(0.5)).epsilon(1e-9));

    std::vector<double> short_acc;
    CHECK_THROWS_AS(adagrad_step(std::span<double>(p), std::span<const double>(g), std::span<double>(short_acc), 0.1),
                    ShapeError);
}

TEST_CASE("sgd and adam steps") {
    auto sgd = OptimizerState<double>::make(OptimizerKind::sgd, 1);
    std::vector<double> p{1.0};
    optimizer_step(p, {2.0}, sgd, 0.1);
    CHECK(p[0] == doctest::Approx(0.8));

    auto adam = OptimizerState<double>::make(OptimizerKind::adam, 1);
    std::vector<double> q{1.0};
    optimizer_step(q, {2.0}, adam, 0.1);
    // bias-corrected first step moves by lr in the gradient's sign
    CHECK(q[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(adam.step == 1);
}

TEST_CASE("one small adagrad step lowers the batch loss") {
    for (std::uint64_t t = 0; t < 20; ++t) {
        const auto batch = blob_set(100 + t, 4, 8);
        auto p = init_params<double>(small_spec(8, 8), t);
        const double before = batch_loss(p, batch);
        std::vector<double> grad(p.values.size(), 0.0);
        for (const auto& s : batch) {
            ForwardCache<double> c;
            forward(s.views, p, &c);
            const auto g = backward(c, p, s.label);
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g.values[i] / 4.0;
        }
        std::vector<double> acc(grad.size(), 0.0);
        adagrad_step(std::span<double>(p.values), std::span<const double>(grad), std::span<double>(acc), 1e-4);
        CHECK(batch_loss(p, batch) < before);
    }
}

TEST_CASE("training: patience zero stops after the first epoch") {
    const auto tr = blob_set(1, 8, 8), va = blob_set(2, 4, 8);
    TrainConfig cfg;
    cfg.patience_epochs = 0;
    const TrainResult r = train(tr, va, cfg, small_spec(8, 8));
    CHECK(r.history.stop_epoch == 1);
    CHECK(r.history.epochs.size() == 1);
    CHECK(r.history.best_epoch == 1);
}

TEST_CASE("training is bit reproducible") {
    const auto tr = blob_set(3, 10, 8), va = blob_set(4, 4, 8);
    TrainConfig cfg;
    cfg.max_epochs = 5;
    cfg.patience_epochs = 5;
    cfg.batch_size = 3;
    cfg.seed = 42;
    cfg.augment = true;
    const TrainResult a = train(tr, va, cfg, small_spec(8, 8));
    const TrainResult b = train(tr, va, cfg, small_spec(8, 8));
    CHECK(a.params.values == b.params.values);
    REQUIRE(a.history.epochs.size() == b.history.epochs.size());
    for (std::size_t e = 0; e < a.history.epochs.size(); ++e) {
        CHECK(a.history.epochs[e].train_loss == b.history.epochs[e].train_loss);
        CHECK(a.history.epochs[e].val_accuracy == b.history.epochs[e].val_accuracy);
    }
    cfg.seed = 43;
    CHECK(train(tr, va, cfg, small_spec(8, 8)).params.values != a.params.values);
}

TEST_CASE("separable data reaches high validation accuracy quickly") {
    const auto tr = blob_set(5, 40, 16), va = blob_set(6, 20, 16);
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::adam;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 4;
    cfg.max_epochs = 50;
    cfg.patience_epochs = 50;
    const TrainResult r = train(tr, va, cfg);
    CHECK(r.history.best_val_accuracy >= 0.95);
    CHECK(r.history.best_epoch <= 50);
    // the returned weights are those of the best epoch
    double best = 0.0;
    for (const auto& e : r.history.epochs) best = std::max(best, e.val_accuracy);
    CHECK(accuracy_at(predict(r.params, va), va) == best);
}

TEST_CASE("training input validation") {
    const auto tr = blob_set(7, 4, 8);
    CHECK_THROWS_AS(train({}, tr, {}), DataError);
    CHECK_THROWS_AS(train(tr, {}, {}), DataError);
    TrainConfig bad;
    bad.batch_size = 0;
    CHECK_THROWS_AS(train(tr, tr, bad), ConfigError);
    bad = {};
    bad.patience_epochs = 500;
    CHECK_THROWS_AS(train(tr, tr, bad), ConfigError);
    CHECK_THROWS_AS(train(blob_set(8, 2, 2), tr, {}), ShapeError);
}

TEST_CASE("predict matches forward") {
    const auto set = blob_set(9, 6, 8);
    const auto p = init_params<float>(small_spec(8, 8), 2);
    auto dup = set;
    dup.push_back(set[0]);
    const auto probs = predict(p, dup);
    for (std::size_t i = 0; i < set.size(); ++i) {
        CHECK(probs[i] == static_cast<double>(forward(set[i].views, p)));
        CHECK(probs[i] > 0.0);
        CHECK(probs[i] < 1.0);
    }
    CHECK(probs.back() == probs.front());
}

TEST_CASE("checkpoint round trip restores predictions") {
    const auto tr = blob_set(10, 6, 8), va = blob_set(11, 4, 8);
    TrainConfig cfg;
    cfg.max_epochs = 3;
    cfg.patience_epochs = 3;
    cfg.optimizer = OptimizerKind::adam;
    const TrainResult r = train(tr, va, cfg, small_spec(8, 8));
    const std::string text = checkpoint_to_string({r.params, r.optimizer, cfg});
    const Checkpoint back = checkpoint_from_string(text);
    CHECK(back.params.values == r.params.values);
    CHECK(back.optimizer.accum == r.optimizer.accum);
    CHECK(back.optimizer.moment == r.optimizer.moment);
    CHECK(back.config.seed == cfg.seed);
    CHECK(predict(back.params, va) == predict(r.params, va));
    CHECK(checkpoint_to_string(back) == text);

    CHECK_THROWS_AS(checkpoint_from_string("{"), FormatError);
    CHECK_THROWS_AS(checkpoint_from_string("{\"format\":\"other\"}"), FormatError);
    std::string truncated = text;
    truncated.replace(truncated.find("\"weights\""), 9, "\"weightz\"");
    CHECK_THROWS_AS(checkpoint_from_string(truncated), FormatError);
}

TEST_CASE("spec validation") {
    ModelSpec s = spec_for(8, 8);
    s.branch.conv_filters.clear();
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = spec_for(8, 8);
    s.branch.feature_dim = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = spec_for(3, 8);
    CHECK_THROWS_AS(s.validate(), ShapeError);
    CHECK(ParamLayout::build(spec_for(8, 8)).classifier[0].in == 3 * 64);
}

}
