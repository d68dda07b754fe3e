#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "spamlens/arch.hpp"
#include "spamlens/dataset.hpp"
#include "spamlens/kernels.hpp"
#include "spamlens/optimizer.hpp"
#include "spamlens/rng.hpp"
#include "spamlens/tensor.hpp"

namespace spamlens {

struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename T>
struct ModelT {
    ArchSpec arch;
    std::vector<LayerParamsT<T>> params;  // parallel to arch.layers; empty tensors for pool/flatten

    std::int64_t param_count() const {
        std::int64_t n = 0;
        for (const auto& p : params) n += p.param_count();
        return n;
    }
};

using Model = ModelT<float>;

namespace rngstream {
constexpr std::uint64_t kInit = 0x494e4954u;      // weight initialization
constexpr std::uint64_t kShuffle = 0x53485546u;   // per-epoch batch shuffle
}  // namespace rngstream

/// Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero biases, one
/// seeded stream consumed in layer order. Draws happen in double so float
/// and double models from the same seed agree to float precision.
template <typename T>
ModelT<T> build_model_for(const ArchSpec& arch, std::uint64_t seed) {
    ModelT<T> m;
    m.arch = arch;
    m.params.resize(arch.layers.size());
    layer_output_shapes(arch);  // validates the chain

    std::mt19937 rng(derive_seed(seed, rngstream::kInit));
    std::vector<int> cur = {arch.input_h, arch.input_w, arch.input_c};
    const auto shapes = layer_output_shapes(arch);
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const LayerSpec& l = arch.layers[i];
        LayerParamsT<T>& p = m.params[i];
        p.kind = l.kind;
        if (l.kind == LayerKind::conv2d) {
            p.kernel_h = p.kernel_w = l.kernel;
            p.weights = TensorT<T>({l.kernel, l.kernel, cur[2], l.filters});
            p.bias = TensorT<T>({l.filters});
            const double fan_in = static_cast<double>(l.kernel) * l.kernel * cur[2];
            const double fan_out = static_cast<double>(l.kernel) * l.kernel * l.filters;
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            for (T& v : p.weights.data) v = static_cast<T>(uniform_double(rng, -limit, limit));
        } else if (l.kind == LayerKind::dense) {
            p.units = l.units;
            p.weights = TensorT<T>({cur[0], l.units});
            p.bias = TensorT<T>({l.units});
            const double limit = std::sqrt(6.0 / (cur[0] + l.units));
            for (T& v : p.weights.data) v = static_cast<T>(uniform_double(rng, -limit, limit));
        } else if (l.kind == LayerKind::maxpool2d) {
            p.pool = l.pool;
        }
        cur = shapes[i];
    }
    return m;
}

inline Model build_model(std::uint64_t seed) { return build_model_for<float>(classifier_arch(), seed); }

template <typename T>
struct ForwardTraceT {
    std::vector<TensorT<T>> inputs;               // what each layer consumed
    std::vector<TensorT<T>> pre_act;              // conv/dense outputs before activation
    std::vector<std::vector<std::int32_t>> argmax;  // per maxpool layer
    T logit = T(0);                               // final dense output before sigmoid
    T prob = T(0);
};

namespace detail {
template <typename T>
void check_model_input(const ModelT<T>& m, const TensorT<T>& image) {
    if (image.rank() != 3 || image.dim(0) != m.arch.input_h || image.dim(1) != m.arch.input_w ||
        image.dim(2) != m.arch.input_c)
        throw ShapeError("model input " + image.shape_str() + " does not match expected " +
                         shape_string({m.arch.input_h, m.arch.input_w, m.arch.input_c}));
}

template <typename T>
TensorT<T> apply_activation(const TensorT<T>& t, Activation a) {
    if (a == Activation::relu) return relu(t);
    return t;  // sigmoid is applied to the scalar logit by the caller
}
}  // namespace detail

/// Forward pass that keeps every intermediate needed by backward().
template <typename T>
ForwardTraceT<T> forward_trace(const ModelT<T>& m, const TensorT<T>& image) {
    detail::check_model_input(m, image);
    ForwardTraceT<T> tr;
    tr.inputs.reserve(m.arch.layers.size());
    tr.pre_act.resize(m.arch.layers.size(), TensorT<T>({1}));
    tr.argmax.resize(m.arch.layers.size());

    TensorT<T> cur = image;
    for (std::size_t i = 0; i < m.arch.layers.size(); ++i) {
        const LayerSpec& l = m.arch.layers[i];
        tr.inputs.push_back(cur);
        switch (l.kind) {
            case LayerKind::conv2d: {
                TensorT<T> pre = conv2d_forward(cur, m.params[i]);
                cur = detail::apply_activation(pre, l.activation);
                tr.pre_act[i] = std::move(pre);
                break;
            }
            case LayerKind::maxpool2d: {
                auto r = maxpool2d_forward(cur, m.params[i].pool);
                cur = std::move(r.output);
                tr.argmax[i] = std::move(r.argmax);
                break;
            }
            case LayerKind::flatten: {
                TensorT<T> flat({static_cast<int>(cur.numel())});
                flat.data = cur.data;
                cur = std::move(flat);
                break;
            }
            case LayerKind::dense: {
                TensorT<T> pre = dense_forward(cur, m.params[i]);
                cur = detail::apply_activation(pre, l.activation);
                tr.pre_act[i] = std::move(pre);
                break;
            }
        }
    }
    if (cur.numel() != 1) throw ShapeError("model must end in a single output, got " + cur.shape_str());
    tr.logit = tr.pre_act.back().data[0];
    tr.prob = sigmoid(tr.logit);
    return tr;
}

/// Raw final-layer output before the sigmoid; lets callers evaluate the
/// sigmoid at higher precision when probabilities saturate. Keeps no
/// intermediates, unlike forward_trace.
template <typename T>
T forward_logit(const ModelT<T>& m, const TensorT<T>& image) {
    detail::check_model_input(m, image);
    TensorT<T> cur = image;
    for (std::size_t i = 0; i < m.arch.layers.size(); ++i) {
        const LayerSpec& l = m.arch.layers[i];
        switch (l.kind) {
            case LayerKind::conv2d:
                cur = detail::apply_activation(conv2d_forward(cur, m.params[i]), l.activation);
                break;
            case LayerKind::maxpool2d:
                cur = maxpool2d_forward(cur, m.params[i].pool).output;
                break;
            case LayerKind::flatten: {
                TensorT<T> flat({static_cast<int>(cur.numel())});
                flat.data = std::move(cur.data);
                cur = std::move(flat);
                break;
            }
            case LayerKind::dense:
                cur = detail::apply_activation(dense_forward(cur, m.params[i]), l.activation);
                break;
        }
    }
    return cur.data[0];
}

/// Probability of the positive (spam) class; pure function of (model, image).
template <typename T>
T forward_prob(const ModelT<T>& m, const TensorT<T>& image) {
    return sigmoid(forward_logit(m, image));
}

template <typename T>
struct LayerGradsT {
    TensorT<T> weights{std::vector<int>{1}};
    TensorT<T> bias{std::vector<int>{1}};
    bool present = false;
};

/// Gradients of a scalar loss with respect to every parameter, given
/// d loss / d logit. The first layer never needs an input gradient.
template <typename T>
std::vector<LayerGradsT<T>> backward(const ModelT<T>& m, const ForwardTraceT<T>& tr, T dloss_dlogit) {
    std::vector<LayerGradsT<T>> grads(m.arch.layers.size());
    TensorT<T> up({1});
    up.data[0] = dloss_dlogit;

    for (std::size_t k = m.arch.layers.size(); k-- > 0;) {
        const LayerSpec& l = m.arch.layers[k];
        switch (l.kind) {
            case LayerKind::dense: {
                if (l.activation == Activation::relu) up = relu_backward(tr.pre_act[k], up);
                auto g = dense_backward(tr.inputs[k], m.params[k], up);
                grads[k].weights = std::move(g.weight_grad);
                grads[k].bias = std::move(g.bias_grad);
                grads[k].present = true;
                up = std::move(g.input_grad);
                break;
            }
            case LayerKind::flatten: {
                TensorT<T> unflat(tr.inputs[k].shape);
                unflat.data = std::move(up.data);
                up = std::move(unflat);
                break;
            }
            case LayerKind::maxpool2d: {
                up = maxpool2d_backward(tr.argmax[k], up, tr.inputs[k].shape, m.params[k].pool);
                break;
            }
            case LayerKind::conv2d: {
                if (l.activation == Activation::relu) up = relu_backward(tr.pre_act[k], up);
                const bool need_input = k > 0;
                auto g = conv2d_backward(tr.inputs[k], m.params[k], up, need_input);
                grads[k].weights = std::move(g.weight_grad);
                grads[k].bias = std::move(g.bias_grad);
                grads[k].present = true;
                if (need_input) up = std::move(g.input_grad);
                break;
            }
        }
    }
    return grads;
}

struct TrainConfig {
    float learning_rate = 1e-4f;
    int epochs = 30;
    int batch_size = 20;
    std::uint64_t seed = 0;
    float rho = 0.9f;
    float epsilon = 1e-8f;
    bool eval_heldout = false;
};

struct EpochStats {
    int epoch = 0;            // 1-based
    double mean_loss = 0.0;   // mean per-sample BCE over the epoch
    double train_accuracy = 0.0;
    double heldout_accuracy = 0.0;
    bool has_heldout = false;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch RMSprop training, deterministic under (seed, data) regardless
/// of the worker-thread count.
TrainHistory train(Model& model, const DatasetSplit& split, const TrainConfig& cfg,
                   const EpochCallback& on_epoch = nullptr);

struct Prediction {
    int label = kLabelNormal;
    float probability = 0.0f;
};

/// spam iff probability >= threshold (boundary inclusive).
Prediction predict(const Model& model, const Tensor& image, float threshold = 0.5f);

}  // namespace spamlens
