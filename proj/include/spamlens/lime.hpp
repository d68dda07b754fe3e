#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "spamlens/model_fn.hpp"
#include "spamlens/segmentation.hpp"

namespace spamlens {

struct LimeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One perturbed evaluation: which segments stayed on, what the model said,
/// and how near the perturbation is to the unperturbed instance.
struct PerturbationSample {
    std::vector<std::uint8_t> mask;
    double prediction = 0;
    double weight = 0;
};

struct LimeConfig {
    int num_segments = 50;
    int num_samples = 1000;     // includes the injected all-ones sample
    double kernel_width = 0.25;
    double ridge = 1e-3;
    int sparsity = 10;          // keep the K largest-|w| coefficients
    std::uint64_t seed = 0;
};

struct LimeExplanation {
    std::vector<double> segment_weights;  // one per segment, at most `kept` nonzero
    double intercept = 0;
    double fidelity_r2 = 0;  // weighted R^2 of the sparse surrogate on its samples
    int kept = 0;
    std::uint64_t seed = 0;
};

/// exp(-D^2/sigma^2) where D is the cosine distance from the mask to the
/// all-ones vector (an all-zero mask sits at D=1).
double proximity(const std::vector<std::uint8_t>& mask, double sigma);

/// Weighted ridge regression of predictions on masks (intercept unpenalized),
/// then a hard top-K cut with a refit on the surviving support. Requires at
/// least M+1 samples including the all-ones mask.
LimeExplanation fit_surrogate(const std::vector<PerturbationSample>& samples, double ridge, int sparsity);

/// Full pipeline on a prepared segmentation: sample fair-coin masks (all-ones
/// first), evaluate the model on each masked image, weight by proximity, fit.
/// Deterministic under config.seed.
LimeExplanation explain(const Tensor& image, const Segmentation& seg, const ModelFn& model_fn,
                        const LimeConfig& config);

/// Convenience wrapper that segments the image first.
LimeExplanation explain(const Tensor& image, const ModelFn& model_fn, const LimeConfig& config);

/// {"method":"lime","num_segments":M,"kept":K,"intercept":b,"weights":[..],
///  "fidelity_r2":..,"seed":..}
std::string lime_json(const LimeExplanation& e);

}  // namespace spamlens
