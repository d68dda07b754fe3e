#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spamlens/model_fn.hpp"
#include "spamlens/segmentation.hpp"

namespace spamlens {

struct ShapError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapConfig {
    int exact_threshold = 12;  // enumerate all coalitions when M <= this
    int num_samples = 2048;    // coalition evaluations in sampled mode
    double ridge = 0.0;
    std::uint64_t seed = 0;
};

struct ShapExplanation {
    double base_value = 0;  // model output with every segment absent
    std::vector<double> phi;
    double fx = 0;  // model output at the full coalition
    bool sampled = false;
    std::int64_t n_coalitions = 0;
    std::uint64_t seed = 0;
};

/// (M-1) / (C(M,s)·s·(M-s)) for interior coalition sizes 0 < s < M. The empty
/// and full coalitions are equality constraints, not weighted samples.
double shapley_kernel_weight(int M, int s);

/// Model output on the image with absent segments flattened to their mean
/// color — the same replacement rule the other explainers use.
double masked_predict(const Tensor& image, const Segmentation& seg, const std::vector<std::uint8_t>& coalition,
                      const ModelFn& model_fn);

/// Kernel-weighted least squares for the additive attribution, with the
/// base value anchored at the empty coalition and attributions constrained to
/// sum to fx - base. Full enumeration up to config.exact_threshold segments,
/// seeded size-stratified pair sampling beyond it.
ShapExplanation kernel_shap(const Tensor& image, const Segmentation& seg, const ModelFn& model_fn,
                            const ShapConfig& config);

using ValueFn = std::function<double(const std::vector<std::uint8_t>&)>;

/// Brute-force Shapley values over every coalition (independent oracle — no
/// regression involved). Returns M+1 values: v(empty) followed by the M
/// per-player attributions. M <= 20.
std::vector<double> exact_shapley(const ValueFn& value_fn, int M);

/// {"method":"shap","base_value":..,"phi":[..],"fx":..,"mode":"exact"|"sampled",
///  "n_coalitions":..,"seed":..}
std::string shap_json(const ShapExplanation& e);

}  // namespace spamlens
