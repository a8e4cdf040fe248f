#include "mgmt/multiview_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "mgmt/rng.hpp"
#include "mgmt/version.hpp"

namespace mgmt {
namespace {

template <class T>
T act(T x, Activation a) {
    return a == Activation::relu ? std::max(x, T{0}) : x;
}

template <class T>
T act_grad(T pre, Activation a) {
    return a == Activation::relu ? (pre > T{0} ? T{1} : T{0}) : T{1};
}

template <class T>
T sigmoid(T x) {
    if (x >= 0) return T{1} / (T{1} + std::exp(-x));
    const T e = std::exp(x);
    return e / (T{1} + e);
}

// out[co] = b[co] + sum_ci w[co][ci] (*) in[ci], zero padding, same size.
template <class T>
void conv3x3_forward(const Tensor<T>& in, const T* w, const T* b, int cout, Tensor<T>& out) {
    const int h = in.height, wd = in.width, cin = in.channels;
    out = Tensor<T>(cout, h, wd);
    for (int co = 0; co < cout; ++co) {
        T* o = out.plane(co);
        std::fill(o, o + static_cast<std::size_t>(h) * wd, b[co]);
        for (int ci = 0; ci < cin; ++ci) {
            const T* src = in.plane(ci);
            const T* k = w + (static_cast<std::size_t>(co) * cin + ci) * 9;
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const T wv = k[ky * 3 + kx];
                    const int dy = ky - 1, dx = kx - 1;
                    const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                    const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
                    for (int y = y0; y < y1; ++y) {
                        T* orow = o + static_cast<std::size_t>(y) * wd;
                        const T* irow = src + static_cast<std::size_t>(y + dy) * wd + dx;
                        for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x];
                    }
                }
        }
    }
}

// Accumulates weight/bias gradients and (optionally) the input gradient.
template <class T>
void conv3x3_backward(const Tensor<T>& in, const Tensor<T>& dout, const T* w, T* dw, T* db, Tensor<T>* din) {
    const int h = in.height, wd = in.width, cin = in.channels, cout = dout.channels;
    if (din) *din = Tensor<T>(cin, h, wd);
    for (int co = 0; co < cout; ++co) {
        const T* g = dout.plane(co);
        T bsum = 0;
        for (std::size_t n = 0; n < static_cast<std::size_t>(h) * wd; ++n) bsum += g[n];
        db[co] += bsum;
        for (int ci = 0; ci < cin; ++ci) {
            const T* src = in.plane(ci);
            T* dsrc = din ? din->plane(ci) : nullptr;
            const std::size_t base = (static_cast<std::size_t>(co) * cin + ci) * 9;
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const int dy = ky - 1, dx = kx - 1;
                    const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                    const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
                    const T wv = w[base + ky * 3 + kx];
                    T acc = 0;
                    for (int y = y0; y < y1; ++y) {
                        const T* grow = g + static_cast<std::size_t>(y) * wd;
                        const std::size_t off = static_cast<std::size_t>(y + dy) * wd + dx;
                        const T* irow = src + off;
                        for (int x = x0; x < x1; ++x) acc += grow[x] * irow[x];
                        if (dsrc) {
                            T* drow = dsrc + off;
                            for (int x = x0; x < x1; ++x) drow[x] += wv * grow[x];
                        }
                    }
                    dw[base + ky * 3 + kx] += acc;
                }
        }
    }
}

// ReLU followed by 2x2 max-pool (floor). Records the winning cell per output.
template <class T>
void relu_maxpool(const Tensor<T>& pre, Tensor<T>& pooled, std::vector<std::uint32_t>& argmax) {
    const int ph = pre.height / 2, pw = pre.width / 2;
    pooled = Tensor<T>(pre.channels, ph, pw);
    argmax.assign(pooled.data.size(), 0);
    for (int c = 0; c < pre.channels; ++c) {
        const T* p = pre.plane(c);
        T* o = pooled.plane(c);
        for (int y = 0; y < ph; ++y)
            for (int x = 0; x < pw; ++x) {
                std::uint32_t best = static_cast<std::uint32_t>(2 * y * pre.width + 2 * x);
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const auto idx = static_cast<std::uint32_t>((2 * y + dy) * pre.width + 2 * x + dx);
                        if (p[idx] > p[best]) best = idx;
                    }
                const std::size_t out_idx = static_cast<std::size_t>(y) * pw + x;
                o[out_idx] = std::max(p[best], T{0});
                argmax[static_cast<std::size_t>(c) * ph * pw + out_idx] = best;
            }
    }
}

template <class T>
void dense_forward(const T* w, const T* b, int in, int out, const std::vector<T>& x, std::vector<T>& z) {
    z.assign(static_cast<std::size_t>(out), T{});
    for (int o = 0; o < out; ++o) {
        T acc = b[o];
        const T* row = w + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) acc += row[i] * x[i];
        z[o] = acc;
    }
}

// dz -> dw, db, dx
template <class T>
void dense_backward(const T* w, int in, int out, const std::vector<T>& x, const std::vector<T>& dz, T* dw, T* db,
                    std::vector<T>& dx) {
    dx.assign(static_cast<std::size_t>(in), T{});
    for (int o = 0; o < out; ++o) {
        const T g = dz[o];
        db[o] += g;
        const T* row = w + static_cast<std::size_t>(o) * in;
        T* drow = dw + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) {
            drow[i] += g * x[i];
            dx[i] += g * row[i];
        }
    }
}

int min_input_extent(const ModelSpec& spec) { return 1 << spec.branch.conv_filters.size(); }

} // namespace

const char* optimizer_name(OptimizerKind k) {
    switch (k) {
    case OptimizerKind::adagrad: return "adagrad";
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adam: return "adam";
    }
    return "?";
}

OptimizerKind parse_optimizer(const std::string& name) {
    if (name == "adagrad") return OptimizerKind::adagrad;
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + name + "'");
}

void BranchSpec::validate() const {
    if (conv_filters.empty()) throw ConfigError("branch needs at least one conv layer");
    for (int f : conv_filters)
        if (f < 1) throw ConfigError("conv filter counts must be positive");
    if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
}

void ModelSpec::validate() const {
    branch.validate();
    if (hidden1 < 1 || hidden2 < 1) throw ConfigError("hidden layer widths must be positive");
    const int need = min_input_extent(*this);
    for (const auto& s : input_shapes)
        if (s[0] < need || s[1] < need)
            throw ShapeError("input planes must be at least " + std::to_string(need) + " pixels per side");
}

ParamLayout ParamLayout::build(const ModelSpec& spec) {
    ParamLayout l;
    std::size_t off = 0;
    auto take = [&](std::size_t n) {
        const std::size_t at = off;
        off += n;
        return at;
    };
    for (auto& br : l.branches) {
        int cin = 1;
        for (int f : spec.branch.conv_filters) {
            Conv c;
            c.in_channels = cin;
            c.out_channels = f;
            c.weight = take(static_cast<std::size_t>(f) * cin * 9);
            c.bias = take(static_cast<std::size_t>(f));
            br.conv.push_back(c);
            cin = f;
        }
        br.proj_in = cin;
        br.proj_weight = take(static_cast<std::size_t>(spec.branch.feature_dim) * cin);
        br.proj_bias = take(static_cast<std::size_t>(spec.branch.feature_dim));
    }
    const int widths[4] = {3 * spec.branch.feature_dim, spec.hidden1, spec.hidden2, 1};
    for (int n = 0; n < 3; ++n) {
        Dense& d = l.classifier[n];
        d.in = widths[n];
        d.out = widths[n + 1];
        d.weight = take(static_cast<std::size_t>(d.in) * d.out);
        d.bias = take(static_cast<std::size_t>(d.out));
    }
    l.total = off;
    return l;
}

template <class T>
ModelParams<T>::ModelParams(const ModelSpec& s) : spec(s), layout(ParamLayout::build(s)), values(layout.total, T{}) {}

template <class T>
ModelParams<T> init_params(const ModelSpec& spec, std::uint64_t seed) {
    spec.branch.validate();
    ModelParams<T> p(spec);
    Rng rng = Rng::substream(seed, 0x1417);
    auto fill = [&](std::size_t off, std::size_t n, double fan_in, double fan_out) {
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (std::size_t i = 0; i < n; ++i) p.values[off + i] = static_cast<T>(rng.uniform(-limit, limit));
    };
    for (const auto& br : p.layout.branches) {
        for (const auto& c : br.conv)
            fill(c.weight, static_cast<std::size_t>(c.in_channels) * c.out_channels * 9, c.in_channels * 9.0,
                 c.out_channels * 9.0);
        fill(br.proj_weight, static_cast<std::size_t>(spec.branch.feature_dim) * br.proj_in, br.proj_in,
             spec.branch.feature_dim);
    }
    for (const auto& d : p.layout.classifier)
        fill(d.weight, static_cast<std::size_t>(d.in) * d.out, d.in, d.out);
    return p;
}

ViewImages images_of(const ViewTriple& triple) {
    return {triple.axial.image.data, triple.sagittal.image.data, triple.coronal.image.data};
}

template <class T>
T forward(const ViewImages& images, const ModelParams<T>& params, ForwardCache<T>* cache) {
    const ModelSpec& spec = params.spec;
    const ParamLayout& L = params.layout;
    const T* w = params.values.data();
    ForwardCache<T> local;
    ForwardCache<T>& c = cache ? *cache : local;

    const int feat = spec.branch.feature_dim;
    c.fused.assign(static_cast<std::size_t>(3 * feat), T{});
    for (int v = 0; v < 3; ++v) {
        const Grid2D<float>& img = images[v];
        const Shape2D want = spec.input_shapes[v];
        if (img.width != want[0] || img.height != want[1])
            throw ShapeError(std::string(view_name(kViews[v])) + " input is " + std::to_string(img.width) + "x" +
                             std::to_string(img.height) + ", model expects " + std::to_string(want[0]) + "x" +
                             std::to_string(want[1]));
        const auto& br = L.branches[v];
        auto& bc = c.branches[v];
        bc.stages.resize(br.conv.size());

        Tensor<T> x(1, img.height, img.width);
        for (std::size_t n = 0; n < img.size(); ++n) x.data[n] = static_cast<T>(img.data[n]);
        for (std::size_t s = 0; s < br.conv.size(); ++s) {
            auto& st = bc.stages[s];
            st.input = std::move(x);
            conv3x3_forward(st.input, w + br.conv[s].weight, w + br.conv[s].bias, br.conv[s].out_channels, st.pre);
            relu_maxpool(st.pre, st.pooled, st.argmax);
            x = st.pooled;
        }
        const int channels = x.channels;
        const std::size_t area = static_cast<std::size_t>(x.height) * x.width;
        bc.pooled_mean.assign(static_cast<std::size_t>(channels), T{});
        for (int ch = 0; ch < channels; ++ch) {
            const T* p = x.plane(ch);
            T sum = 0;
            for (std::size_t n = 0; n < area; ++n) sum += p[n];
            bc.pooled_mean[ch] = sum / static_cast<T>(area);
        }
        dense_forward(w + br.proj_weight, w + br.proj_bias, channels, feat, bc.pooled_mean, bc.feature);
        std::copy(bc.feature.begin(), bc.feature.end(), c.fused.begin() + static_cast<std::ptrdiff_t>(v) * feat);
    }

    const Activation a = spec.classifier_activation;
    const auto& d = L.classifier;
    dense_forward(w + d[0].weight, w + d[0].bias, d[0].in, d[0].out, c.fused, c.z1);
    c.a1 = c.z1;
    for (auto& z : c.a1) z = act(z, a);
    dense_forward(w + d[1].weight, w + d[1].bias, d[1].in, d[1].out, c.a1, c.z2);
    c.a2 = c.z2;
    for (auto& z : c.a2) z = act(z, a);
    std::vector<T> out;
    dense_forward(w + d[2].weight, w + d[2].bias, d[2].in, d[2].out, c.a2, out);
    c.logit = out[0];
    c.probability = sigmoid(c.logit);
    return c.probability;
}

double bce_loss(double probability, int label) {
    const double p = std::clamp(probability, kProbabilityClamp, 1.0 - kProbabilityClamp);
    return label ? -std::log(p) : -std::log(1.0 - p);
}

template <class T>
ModelParams<T> backward(const ForwardCache<T>& c, const ModelParams<T>& params, int label) {
    ModelParams<T> g(params.spec);
    const ParamLayout& L = params.layout;
    const T* w = params.values.data();
    T* gw = g.values.data();
    const Activation a = params.spec.classifier_activation;
    const auto& d = L.classifier;

    // d(BCE)/d(logit) for a sigmoid output
    std::vector<T> dz3{c.probability - static_cast<T>(label)};
    std::vector<T> da2, da1, dfused;
    dense_backward(w + d[2].weight, d[2].in, d[2].out, c.a2, dz3, gw + d[2].weight, gw + d[2].bias, da2);
    for (std::size_t i = 0; i < da2.size(); ++i) da2[i] *= act_grad(c.z2[i], a);
    dense_backward(w + d[1].weight, d[1].in, d[1].out, c.a1, da2, gw + d[1].weight, gw + d[1].bias, da1);
    for (std::size_t i = 0; i < da1.size(); ++i) da1[i] *= act_grad(c.z1[i], a);
    dense_backward(w + d[0].weight, d[0].in, d[0].out, c.fused, da1, gw + d[0].weight, gw + d[0].bias, dfused);

    const int feat = params.spec.branch.feature_dim;
    for (int v = 0; v < 3; ++v) {
        const auto& br = L.branches[v];
        const auto& bc = c.branches[v];
        std::vector<T> dfeat(dfused.begin() + static_cast<std::ptrdiff_t>(v) * feat,
                             dfused.begin() + static_cast<std::ptrdiff_t>(v + 1) * feat);
        std::vector<T> dmean;
        dense_backward(w + br.proj_weight, br.proj_in, feat, bc.pooled_mean, dfeat, gw + br.proj_weight,
                       gw + br.proj_bias, dmean);

        const Tensor<T>& last = bc.stages.back().pooled;
        Tensor<T> dpooled(last.channels, last.height, last.width);
        const T inv_area = T{1} / static_cast<T>(static_cast<std::size_t>(last.height) * last.width);
        for (int ch = 0; ch < last.channels; ++ch) {
            T* p = dpooled.plane(ch);
            std::fill(p, p + static_cast<std::size_t>(last.height) * last.width, dmean[ch] * inv_area);
        }

        for (std::size_t s = bc.stages.size(); s-- > 0;) {
            const auto& st = bc.stages[s];
            // route through max-pool and ReLU
            Tensor<T> dpre(st.pre.channels, st.pre.height, st.pre.width);
            const std::size_t pooled_area = static_cast<std::size_t>(st.pooled.height) * st.pooled.width;
            for (int ch = 0; ch < st.pre.channels; ++ch) {
                const T* pre = st.pre.plane(ch);
                T* dp = dpre.plane(ch);
                const T* gp = dpooled.plane(ch);
                for (std::size_t n = 0; n < pooled_area; ++n) {
                    const std::uint32_t idx = st.argmax[static_cast<std::size_t>(ch) * pooled_area + n];
                    if (pre[idx] > T{0}) dp[idx] += gp[n];
                }
            }
            const auto& conv = br.conv[s];
            Tensor<T> dinput;
            conv3x3_backward(st.input, dpre, w + conv.weight, gw + conv.weight, gw + conv.bias,
                             s > 0 ? &dinput : nullptr);
            if (s > 0) dpooled = std::move(dinput);
        }
    }
    return g;
}

namespace {

using Ext = long double;

Ext bce_loss_ext(Ext probability, int label) {
    const Ext eps = static_cast<Ext>(kProbabilityClamp);
    const Ext p = std::clamp(probability, eps, Ext{1} - eps);
    return label ? -std::log(p) : -std::log(Ext{1} - p);
}

// Which piece of the piecewise-linear network a forward pass landed on.
std::vector<std::uint32_t> activation_pattern(const ForwardCache<Ext>& c, Activation a) {
    std::vector<std::uint32_t> out;
    for (const auto& bc : c.branches)
        for (const auto& st : bc.stages) {
            out.insert(out.end(), st.argmax.begin(), st.argmax.end());
            for (Ext v : st.pooled.data) out.push_back(v > 0);
        }
    if (a == Activation::relu) {
        for (Ext z : c.z1) out.push_back(z > 0);
        for (Ext z : c.z2) out.push_back(z > 0);
    }
    return out;
}

} // namespace

double grad_check(const ModelParams<double>& params, const ViewImages& images, int label,
                  const GradCheckOptions& opts) {
    ForwardCache<double> cache;
    forward(images, params, &cache);
    const ModelParams<double> analytic = backward(cache, params, label);

    std::vector<std::size_t> probe(params.values.size());
    std::iota(probe.begin(), probe.end(), std::size_t{0});
    if (opts.max_params > 0 && opts.max_params < probe.size()) {
        Rng rng = Rng::substream(opts.seed, 0x6c);
        rng.shuffle(probe.begin(), probe.end());
        probe.resize(opts.max_params);
        std::sort(probe.begin(), probe.end());
    }

    // The numeric reference runs in extended precision so that cancellation in
    // (up - down) does not swamp small gradients. When a step crosses a ReLU or
    // max-pool switch the difference quotient is meaningless, so the step
    // shrinks until both probes stay on the base point's linear piece.
    const Activation act_kind = params.spec.classifier_activation;
    ModelParams<Ext> work = params.cast<Ext>();
    ForwardCache<Ext> base_cache, probe_cache;
    forward(images, work, &base_cache);
    const auto base_pattern = activation_pattern(base_cache, act_kind);

    double worst = 0.0;
    for (std::size_t idx : probe) {
        const Ext orig = work.values[idx];
        Ext step = static_cast<Ext>(opts.eps);
        Ext numeric = 0;
        for (int attempt = 0; attempt < 6; ++attempt) {
            work.values[idx] = orig + step;
            const Ext up = bce_loss_ext(forward(images, work, &probe_cache), label);
            bool same = activation_pattern(probe_cache, act_kind) == base_pattern;
            work.values[idx] = orig - step;
            const Ext down = bce_loss_ext(forward(images, work, &probe_cache), label);
            same = same && activation_pattern(probe_cache, act_kind) == base_pattern;
            numeric = (up - down) / (2 * step);
            if (same) break;
            step /= 10;
        }
        work.values[idx] = orig;
        const double gn = static_cast<double>(numeric);
        const double ga = analytic.values[idx];
        const double rel = std::abs(ga - gn) / std::max({std::abs(ga), std::abs(gn), 1e-8});
        worst = std::max(worst, rel);
    }
    return worst;
}

template <class T>
OptimizerState<T> OptimizerState<T>::make(OptimizerKind kind, std::size_t n) {
    OptimizerState s;
    s.kind = kind;
    if (kind != OptimizerKind::sgd) s.accum.assign(n, T{});
    if (kind == OptimizerKind::adam) s.moment.assign(n, T{});
    return s;
}

template <class T>
void adagrad_step(std::span<T> params, std::span<const T> grads, std::span<T> accum, double lr, double eps) {
    if (params.size() != grads.size() || params.size() != accum.size())
        throw ShapeError("adagrad_step: parameter, gradient and accumulator sizes differ");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const T g = grads[i];
        accum[i] += g * g;
        params[i] -= static_cast<T>(lr * g / (std::sqrt(static_cast<double>(accum[i])) + eps));
    }
}

template <class T>
void optimizer_step(std::vector<T>& params, const std::vector<T>& grads, OptimizerState<T>& state, double lr) {
    ++state.step;
    switch (state.kind) {
    case OptimizerKind::adagrad:
        adagrad_step(std::span<T>(params), std::span<const T>(grads), std::span<T>(state.accum), lr);
        break;
    case OptimizerKind::sgd:
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= static_cast<T>(lr * grads[i]);
        break;
    case OptimizerKind::adam: {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = grads[i];
            state.moment[i] = static_cast<T>(b1 * state.moment[i] + (1 - b1) * g);
            state.accum[i] = static_cast<T>(b2 * state.accum[i] + (1 - b2) * g * g);
            const double mh = state.moment[i] / c1, vh = state.accum[i] / c2;
            params[i] -= static_cast<T>(lr * mh / (std::sqrt(vh) + eps));
        }
        break;
    }
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
    if (patience_epochs < 0 || patience_epochs > max_epochs)
        throw ConfigError("patience_epochs must lie in [0, max_epochs]");
    if (augment) augment_cfg.validate();
}

template <class T>
std::vector<double> predict(const ModelParams<T>& params, const std::vector<Sample>& samples) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(static_cast<double>(forward(s.views, params)));
    return out;
}

double accuracy_at(const std::vector<double>& probabilities, const std::vector<Sample>& samples, double threshold) {
    if (samples.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) correct += ((probabilities[i] >= threshold) == (samples[i].label == 1));
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set, const TrainConfig& cfg,
                  ModelSpec spec) {
    if (train_set.empty()) throw DataError("training split is empty");
    if (val_set.empty()) throw DataError("validation split is empty");
    cfg.validate();
    for (int v = 0; v < 3; ++v)
        if (spec.input_shapes[v][0] == 0 && spec.input_shapes[v][1] == 0)
            spec.input_shapes[v] = {train_set.front().views[v].width, train_set.front().views[v].height};
    spec.validate();

    ModelParams<float> params = init_params<float>(spec, cfg.seed);
    OptimizerState<float> opt = OptimizerState<float>::make(cfg.optimizer, params.values.size());

    TrainResult result{params, opt, {}};
    double best_acc = -1.0;
    int since_best = 0;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<float> grad_sum(params.values.size());
    ForwardCache<float> cache;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng shuffle_rng = Rng::substream(cfg.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(order.begin(), order.end());

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::fill(grad_sum.begin(), grad_sum.end(), 0.0f);
            for (std::size_t b = start; b < stop; ++b) {
                const Sample& s = train_set[order[b]];
                const ViewImages* input = &s.views;
                ViewImages augmented;
                if (cfg.augment) {
                    Rng aug_rng = Rng::substream(cfg.augment_cfg.seed ^ cfg.seed,
                                                 static_cast<std::uint64_t>(epoch) << 32 | order[b]);
                    for (int v = 0; v < 3; ++v) {
                        Slice2D sl;
                        sl.data = s.views[v];
                        augmented[v] = augment(sl, cfg.augment_cfg, aug_rng).data;
                    }
                    input = &augmented;
                }
                const float p = forward(*input, params, &cache);
                loss_sum += bce_loss(p, s.label);
                const ModelParams<float> g = backward(cache, params, s.label);
                for (std::size_t i = 0; i < grad_sum.size(); ++i) grad_sum[i] += g.values[i];
            }
            const float inv = 1.0f / static_cast<float>(stop - start);
            for (auto& g : grad_sum) g *= inv;
            optimizer_step(params.values, grad_sum, opt, cfg.learning_rate);
        }

        const double acc = accuracy_at(predict(params, val_set), val_set);
        result.history.epochs.push_back({epoch, loss_sum / static_cast<double>(train_set.size()), acc});
        result.history.stop_epoch = epoch;
        if (acc > best_acc) {
            best_acc = acc;
            since_best = 0;
            result.params = params;
            result.optimizer = opt;
            result.history.best_epoch = epoch;
            result.history.best_val_accuracy = acc;
        } else {
            ++since_best;
        }
        if (since_best >= cfg.patience_epochs) break;
    }
    return result;
}

namespace {

using nlohmann::ordered_json;

ordered_json spec_to_json(const ModelSpec& s) {
    ordered_json j;
    j["conv_filters"] = s.branch.conv_filters;
    j["feature_dim"] = s.branch.feature_dim;
    j["hidden1"] = s.hidden1;
    j["hidden2"] = s.hidden2;
    j["classifier_activation"] = s.classifier_activation == Activation::relu ? "relu" : "identity";
    ordered_json shapes = ordered_json::object();
    for (int v = 0; v < 3; ++v) shapes[view_name(kViews[v])] = {s.input_shapes[v][0], s.input_shapes[v][1]};
    j["input_shapes"] = shapes;
    return j;
}

ModelSpec spec_from_json(const ordered_json& j) {
    ModelSpec s;
    s.branch.conv_filters = j.at("conv_filters").get<std::vector<int>>();
    s.branch.feature_dim = j.at("feature_dim").get<int>();
    s.hidden1 = j.at("hidden1").get<int>();
    s.hidden2 = j.at("hidden2").get<int>();
    const auto act_name = j.at("classifier_activation").get<std::string>();
    if (act_name != "relu" && act_name != "identity") throw FormatError("unknown activation " + act_name);
    s.classifier_activation = act_name == "relu" ? Activation::relu : Activation::identity;
    for (int v = 0; v < 3; ++v) {
        const auto arr = j.at("input_shapes").at(view_name(kViews[v])).get<std::vector<int>>();
        if (arr.size() != 2) throw FormatError("input shape needs two entries");
        s.input_shapes[v] = {arr[0], arr[1]};
    }
    return s;
}

template <class T>
std::vector<double> widen(const std::vector<T>& v) {
    return std::vector<double>(v.begin(), v.end());
}

template <class T>
std::vector<T> narrow(const std::vector<double>& v) {
    return std::vector<T>(v.begin(), v.end());
}

} // namespace

std::string checkpoint_to_string(const Checkpoint& ckpt) {
    ordered_json j;
    j["format"] = "mgmtview-checkpoint";
    j["version"] = 1;
    j["tool_version"] = kVersion;
    j["spec"] = spec_to_json(ckpt.params.spec);
    const TrainConfig& c = ckpt.config;
    j["train_config"] = {{"learning_rate", c.learning_rate},
                         {"batch_size", c.batch_size},
                         {"optimizer", optimizer_name(c.optimizer)},
                         {"patience_epochs", c.patience_epochs},
                         {"max_epochs", c.max_epochs},
                         {"seed", c.seed},
                         {"augment", c.augment},
                         {"augment_config",
                          {{"p_hflip", c.augment_cfg.p_hflip},
                           {"p_vflip", c.augment_cfg.p_vflip},
                           {"rotation_range_deg", c.augment_cfg.rotation_range_deg},
                           {"sharpness_range", c.augment_cfg.sharpness_range},
                           {"seed", c.augment_cfg.seed}}}};
    j["optimizer"] = {{"kind", optimizer_name(ckpt.optimizer.kind)},
                      {"step", ckpt.optimizer.step},
                      {"accum", widen(ckpt.optimizer.accum)},
                      {"moment", widen(ckpt.optimizer.moment)}};
    j["weights"] = widen(ckpt.params.values);
    return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
    try {
        const ordered_json j = ordered_json::parse(text);
        if (j.at("format").get<std::string>() != "mgmtview-checkpoint") throw FormatError("not a model checkpoint");
        if (j.at("version").get<int>() != 1) throw FormatError("unsupported checkpoint version");
        Checkpoint ck;
        ck.params = ModelParams<float>(spec_from_json(j.at("spec")));
        const auto weights = j.at("weights").get<std::vector<double>>();
        if (weights.size() != ck.params.values.size())
            throw FormatError("checkpoint holds " + std::to_string(weights.size()) + " weights, spec needs " +
                              std::to_string(ck.params.values.size()));
        ck.params.values = narrow<float>(weights);

        const auto& tc = j.at("train_config");
        ck.config.learning_rate = tc.at("learning_rate").get<double>();
        ck.config.batch_size = tc.at("batch_size").get<int>();
        ck.config.optimizer = parse_optimizer(tc.at("optimizer").get<std::string>());
        ck.config.patience_epochs = tc.at("patience_epochs").get<int>();
        ck.config.max_epochs = tc.at("max_epochs").get<int>();
        ck.config.seed = tc.at("seed").get<std::uint64_t>();
        ck.config.augment = tc.at("augment").get<bool>();
        const auto& ac = tc.at("augment_config");
        ck.config.augment_cfg.p_hflip = ac.at("p_hflip").get<double>();
        ck.config.augment_cfg.p_vflip = ac.at("p_vflip").get<double>();
        ck.config.augment_cfg.rotation_range_deg = ac.at("rotation_range_deg").get<std::array<double, 2>>();
        ck.config.augment_cfg.sharpness_range = ac.at("sharpness_range").get<std::array<double, 2>>();
        ck.config.augment_cfg.seed = ac.at("seed").get<std::uint64_t>();

        const auto& oj = j.at("optimizer");
        ck.optimizer.kind = parse_optimizer(oj.at("kind").get<std::string>());
        ck.optimizer.step = oj.at("step").get<std::int64_t>();
        ck.optimizer.accum = narrow<float>(oj.at("accum").get<std::vector<double>>());
        ck.optimizer.moment = narrow<float>(oj.at("moment").get<std::vector<double>>());
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("malformed checkpoint: ") + e.what());
    }
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<float> init_params(const ModelSpec&, std::uint64_t);
template ModelParams<double> init_params(const ModelSpec&, std::uint64_t);
template float forward(const ViewImages&, const ModelParams<float>&, ForwardCache<float>*);
template double forward(const ViewImages&, const ModelParams<double>&, ForwardCache<double>*);
template ModelParams<float> backward(const ForwardCache<float>&, const ModelParams<float>&, int);
template ModelParams<double> backward(const ForwardCache<double>&, const ModelParams<double>&, int);
template struct OptimizerState<float>;
template struct OptimizerState<double>;
template void adagrad_step(std::span<float>, std::span<const float>, std::span<float>, double, double);
template void adagrad_step(std::span<double>, std::span<const double>, std::span<double>, double, double);
template void optimizer_step(std::vector<float>&, const std::vector<float>&, OptimizerState<float>&, double);
template void optimizer_step(std::vector<double>&, const std::vector<double>&, OptimizerState<double>&, double);
template std::vector<double> predict(const ModelParams<float>&, const std::vector<Sample>&);
template std::vector<double> predict(const ModelParams<double>&, const std::vector<Sample>&);

} // namespace mgmt
