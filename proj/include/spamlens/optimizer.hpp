#pragma once

#include <cmath>
#include <vector>

#include "spamlens/tensor.hpp"

namespace spamlens {

struct RmsPropConfig {
    float learning_rate = 1e-4f;
    float rho = 0.9f;
    float epsilon = 1e-8f;
};

/// Per-tensor accumulator of squared gradients. One state per trainable
/// tensor, created zero-filled with the tensor's shape.
template <typename T>
struct OptimizerStateT {
    TensorT<T> sq_avg;

    explicit OptimizerStateT(const std::vector<int>& dims) : sq_avg(dims) {}
};

using OptimizerState = OptimizerStateT<float>;

/// v <- rho v + (1-rho) g^2 ; theta <- theta - lr g / (sqrt(v) + eps)
template <typename T>
void rmsprop_step(TensorT<T>& param, const TensorT<T>& grad, OptimizerStateT<T>& state,
                  const RmsPropConfig& cfg) {
    if (!param.same_shape(grad))
        throw ShapeError("rmsprop: gradient shape " + grad.shape_str() + " does not match parameter shape " +
                         param.shape_str());
    if (!param.same_shape(state.sq_avg))
        throw ShapeError("rmsprop: state shape " + state.sq_avg.shape_str() +
                         " does not match parameter shape " + param.shape_str());
    const T lr = static_cast<T>(cfg.learning_rate);
    const T rho = static_cast<T>(cfg.rho);
    const T eps = static_cast<T>(cfg.epsilon);
    T* p = param.data.data();
    const T* g = grad.data.data();
    T* v = state.sq_avg.data.data();
    const std::size_t n = param.data.size();
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = rho * v[i] + (T(1) - rho) * g[i] * g[i];
        p[i] -= lr * g[i] / (std::sqrt(v[i]) + eps);
    }
}

}  // namespace spamlens
