#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mgmt/grid.hpp"
#include "mgmt/mask_geometry.hpp"
#include "mgmt/volume_ops.hpp"

namespace mgmt {

enum class OptimizerKind : std::uint8_t { adagrad, sgd, adam };
enum class Activation : std::uint8_t { relu, identity };

const char* optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& name);

/// Per-view feature extractor: [3x3 conv, ReLU, 2x2 max-pool] per entry of
/// `conv_filters`, then global average pooling and a linear projection to
/// `feature_dim`.
struct BranchSpec {
    std::vector<int> conv_filters{8, 16};
    int feature_dim = 64;

    void validate() const;
};

/// Input shape of one view, {width, height}.
using Shape2D = std::array<int, 2>;

struct ModelSpec {
    BranchSpec branch;
    int hidden1 = 64;
    int hidden2 = 16;
    /// Activation between the fully connected layers (identity only for tests).
    Activation classifier_activation = Activation::relu;
    /// Expected input shapes, indexed by View (axial, sagittal, coronal).
    std::array<Shape2D, 3> input_shapes{};

    void validate() const;
};

/// Offsets of every weight tensor inside the flat parameter vector.
struct ParamLayout {
    struct Conv {
        std::size_t weight = 0, bias = 0;  // weight is [out][in][3][3]
        int in_channels = 0, out_channels = 0;
    };
    struct Branch {
        std::vector<Conv> conv;
        std::size_t proj_weight = 0, proj_bias = 0;  // [feature_dim][channels]
        int proj_in = 0;
    };
    struct Dense {
        std::size_t weight = 0, bias = 0;  // [out][in]
        int in = 0, out = 0;
    };
    std::array<Branch, 3> branches;
    std::array<Dense, 3> classifier;
    std::size_t total = 0;

    static ParamLayout build(const ModelSpec& spec);
};

/// Every trainable weight of the three branches and the fused classifier.
/// Gradients use the same type.
template <class T>
struct ModelParams {
    ModelSpec spec;
    ParamLayout layout;
    std::vector<T> values;

    ModelParams() = default;
    explicit ModelParams(const ModelSpec& s);

    template <class U>
    ModelParams<U> cast() const {
        ModelParams<U> out(spec);
        for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = static_cast<U>(values[i]);
        return out;
    }
};

/// Glorot-uniform weights, zero biases.
template <class T>
ModelParams<T> init_params(const ModelSpec& spec, std::uint64_t seed);

/// The three z-scored input planes, ordered axial, sagittal, coronal.
using ViewImages = std::array<Grid2D<float>, 3>;

ViewImages images_of(const ViewTriple& triple);

struct Sample {
    ViewImages views;
    int label = 0;
    std::string id;
};

template <class T>
struct Tensor {
    int channels = 0, height = 0, width = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, T{}) {}
    T* plane(int c) { return data.data() + static_cast<std::size_t>(c) * height * width; }
    const T* plane(int c) const { return data.data() + static_cast<std::size_t>(c) * height * width; }
};

template <class T>
struct ForwardCache {
    struct ConvStage {
        Tensor<T> input;
        Tensor<T> pre;  // conv output before ReLU
        Tensor<T> pooled;
        std::vector<std::uint32_t> argmax;  // index into `pre` plane per pooled cell
    };
    struct BranchCache {
        std::vector<ConvStage> stages;
        std::vector<T> pooled_mean;
        std::vector<T> feature;
    };
    std::array<BranchCache, 3> branches;
    std::vector<T> fused;  // concatenated features
    std::vector<T> z1, a1, z2, a2;
    T logit{};
    T probability{};
};

/// Throws ShapeError when an image does not match spec.input_shapes.
template <class T>
T forward(const ViewImages& images, const ModelParams<T>& params, ForwardCache<T>* cache = nullptr);

inline constexpr double kProbabilityClamp = 1e-7;

/// Binary cross-entropy with the probability clamped to [1e-7, 1 - 1e-7].
double bce_loss(double probability, int label);

/// Gradient of bce_loss(forward(...)) with respect to every parameter.
template <class T>
ModelParams<T> backward(const ForwardCache<T>& cache, const ModelParams<T>& params, int label);

struct GradCheckOptions {
    double eps = 1e-5;
    /// Parameters to probe; 0 means all of them.
    std::size_t max_params = 0;
    std::uint64_t seed = 0;
};

/// Max relative error |ga - gn| / max(|ga|, |gn|, 1e-8) between the 64-bit
/// backward() gradient ga and a central difference gn. The difference is taken
/// in extended precision, with the step shrunk where it would cross a ReLU or
/// max-pool switch.
double grad_check(const ModelParams<double>& params, const ViewImages& images, int label,
                  const GradCheckOptions& opts = {});

template <class T>
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adagrad;
    std::vector<T> accum;  // adagrad: sum g^2; adam: second moment
    std::vector<T> moment; // adam first moment
    std::int64_t step = 0;

    static OptimizerState make(OptimizerKind kind, std::size_t n);
};

/// accum += g^2; param -= lr * g / (sqrt(accum) + eps)
template <class T>
void adagrad_step(std::span<T> params, std::span<const T> grads, std::span<T> accum, double lr, double eps = 1e-10);

template <class T>
void optimizer_step(std::vector<T>& params, const std::vector<T>& grads, OptimizerState<T>& state, double lr);

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 16;
    OptimizerKind optimizer = OptimizerKind::adagrad;
    int patience_epochs = 100;
    int max_epochs = 400;
    std::uint64_t seed = 0;
    bool augment = false;
    AugmentConfig augment_cfg;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_val_accuracy = 0.0;
    int stop_epoch = 0;
};

struct TrainResult {
    ModelParams<float> params;  // weights of the best epoch
    OptimizerState<float> optimizer;
    TrainHistory history;
};

/// Input shapes left at zero in `spec` are taken from the first training
/// sample. Throws DataError when either split is empty.
TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set, const TrainConfig& cfg,
                  ModelSpec spec = {});

template <class T>
std::vector<double> predict(const ModelParams<T>& params, const std::vector<Sample>& samples);

double accuracy_at(const std::vector<double>& probabilities, const std::vector<Sample>& samples, double threshold = 0.5);

/// On-disk model: spec, weights, optimizer state and training config.
struct Checkpoint {
    ModelParams<float> params;
    OptimizerState<float> optimizer;
    TrainConfig config;
};

std::string checkpoint_to_string(const Checkpoint& ckpt);
/// Throws FormatError on malformed or version-mismatched input.
Checkpoint checkpoint_from_string(const std::string& text);

} // namespace mgmt
