#include "spamlens/lime.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "spamlens/jsonio.hpp"
#include "spamlens/rng.hpp"
#include "spamlens/runtime.hpp"

namespace spamlens {

namespace {

constexpr std::uint64_t kStreamLimeMask = 0x4c494d45;

// Weighted ridge on the chosen mask columns plus an unpenalized intercept.
// Returns the support coefficients followed by the intercept.
Eigen::VectorXd solve_wls(const std::vector<PerturbationSample>& samples, const std::vector<int>& support,
                          double ridge) {
    const int n = static_cast<int>(samples.size());
    const int k = static_cast<int>(support.size());
    Eigen::MatrixXd Z(n, k + 1);
    Eigen::VectorXd y(n), w(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) Z(i, j) = samples[i].mask[support[j]];
        Z(i, k) = 1.0;
        y(i) = samples[i].prediction;
        w(i) = samples[i].weight;
    }
    Eigen::MatrixXd A = Z.transpose() * w.asDiagonal() * Z;
    for (int j = 0; j < k; ++j) A(j, j) += ridge;
    const Eigen::VectorXd b = Z.transpose() * (w.array() * y.array()).matrix();
    if (ridge == 0.0) {
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        if (!lu.isInvertible())
            throw LimeError("surrogate system is singular at ridge=0; use ridge>0 or more samples");
        return lu.solve(b);
    }
    return A.ldlt().solve(b);  // positive definite once ridge > 0
}

double weighted_r2(const std::vector<PerturbationSample>& samples, const std::vector<double>& weights,
                   double intercept) {
    double wsum = 0, fbar = 0;
    for (const auto& s : samples) {
        wsum += s.weight;
        fbar += s.weight * s.prediction;
    }
    fbar /= wsum;
    double ss_res = 0, ss_tot = 0;
    for (const auto& s : samples) {
        double pred = intercept;
        for (std::size_t j = 0; j < weights.size(); ++j) pred += weights[j] * s.mask[j];
        ss_res += s.weight * (s.prediction - pred) * (s.prediction - pred);
        ss_tot += s.weight * (s.prediction - fbar) * (s.prediction - fbar);
    }
    // constant response: a surrogate that also lands on the constant is a
    // perfect local fit
    if (ss_tot < 1e-24) return ss_res < 1e-24 ? 1.0 : 0.0;
    return 1.0 - ss_res / ss_tot;
}

}  // namespace

double proximity(const std::vector<std::uint8_t>& mask, double sigma) {
    if (sigma <= 0) throw LimeError("proximity: kernel width must be positive");
    if (mask.empty()) throw LimeError("proximity: empty mask");
    std::int64_t ones = 0;
    for (const auto m : mask) {
        if (m > 1) throw LimeError("proximity: mask entries must be 0 or 1");
        ones += m;
    }
    // cosine similarity to the all-ones vector is sqrt(ones/M); the zero mask
    // has no direction, so its distance is pinned at 1
    const double d =
        ones == 0 ? 1.0 : 1.0 - std::sqrt(static_cast<double>(ones) / static_cast<double>(mask.size()));
    return std::exp(-d * d / (sigma * sigma));
}

LimeExplanation fit_surrogate(const std::vector<PerturbationSample>& samples, double ridge, int sparsity) {
    if (samples.empty()) throw LimeError("fit_surrogate: no samples");
    const int M = static_cast<int>(samples[0].mask.size());
    if (M < 1) throw LimeError("fit_surrogate: empty masks");
    if (ridge < 0) throw LimeError("fit_surrogate: ridge must be >= 0");
    if (sparsity < 1 || sparsity > M)
        throw LimeError("fit_surrogate: sparsity must be in [1, " + std::to_string(M) + "], got " +
                        std::to_string(sparsity));
    if (static_cast<int>(samples.size()) < M + 1)
        throw LimeError("fit_surrogate: need at least " + std::to_string(M + 1) + " samples, got " +
                        std::to_string(samples.size()));
    bool has_full = false;
    for (const auto& s : samples) {
        if (static_cast<int>(s.mask.size()) != M) throw LimeError("fit_surrogate: mixed mask lengths");
        if (!(s.weight > 0)) throw LimeError("fit_surrogate: proximity weights must be positive");
        has_full |= std::all_of(s.mask.begin(), s.mask.end(), [](std::uint8_t b) { return b == 1; });
    }
    if (!has_full) throw LimeError("fit_surrogate: the all-ones mask is required");

    std::vector<int> full(M);
    std::iota(full.begin(), full.end(), 0);
    const Eigen::VectorXd dense = solve_wls(samples, full, ridge);

    // hard sparsity: keep the K largest |coefficient|, then refit on them
    std::vector<int> order = full;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return std::abs(dense(a)) > std::abs(dense(b)); });
    std::vector<int> support(order.begin(), order.begin() + sparsity);
    std::sort(support.begin(), support.end());
    const Eigen::VectorXd sparse = solve_wls(samples, support, ridge);

    LimeExplanation out;
    out.segment_weights.assign(M, 0.0);
    for (std::size_t j = 0; j < support.size(); ++j) out.segment_weights[support[j]] = sparse(j);
    out.intercept = sparse(static_cast<int>(support.size()));
    out.kept = sparsity;
    out.fidelity_r2 = weighted_r2(samples, out.segment_weights, out.intercept);
    return out;
}

LimeExplanation explain(const Tensor& image, const Segmentation& seg, const ModelFn& model_fn,
                        const LimeConfig& config) {
    const int M = seg.num_segments;
    if (config.num_segments != M)
        throw LimeError("explain: config expects " + std::to_string(config.num_segments) +
                        " segments but the segmentation has " + std::to_string(M));
    if (config.num_samples < M + 1)
        throw LimeError("explain: num_samples must be at least M+1 = " + std::to_string(M + 1));
    if (config.kernel_width <= 0) throw LimeError("explain: kernel width must be positive");

    // all masks drawn from one stream before any model evaluation fans out
    std::vector<PerturbationSample> samples(static_cast<std::size_t>(config.num_samples));
    samples[0].mask.assign(static_cast<std::size_t>(M), 1);
    std::mt19937 rng(derive_seed(config.seed, kStreamLimeMask));
    for (std::size_t i = 1; i < samples.size(); ++i) {
        samples[i].mask.resize(static_cast<std::size_t>(M));
        for (int j = 0; j < M; ++j) samples[i].mask[j] = static_cast<std::uint8_t>(uniform_index(rng, 2));
    }

    parallel_for(0, static_cast<std::int64_t>(samples.size()), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            samples[i].prediction = model_fn(apply_mask(image, seg, samples[i].mask));
            samples[i].weight = proximity(samples[i].mask, config.kernel_width);
        }
    });

    LimeExplanation out = fit_surrogate(samples, config.ridge, config.sparsity);
    out.seed = config.seed;
    return out;
}

LimeExplanation explain(const Tensor& image, const ModelFn& model_fn, const LimeConfig& config) {
    return explain(image, segment(image, config.num_segments), model_fn, config);
}

std::string lime_json(const LimeExplanation& e) {
    std::string out = "{\"method\":\"lime\"";
    out += ",\"num_segments\":" + std::to_string(e.segment_weights.size());
    out += ",\"kept\":" + std::to_string(e.kept);
    out += ",\"intercept\":" + json_number(e.intercept);
    out += ",\"weights\":" + json_array(e.segment_weights);
    out += ",\"fidelity_r2\":" + json_number(e.fidelity_r2);
    out += ",\"seed\":" + std::to_string(e.seed);
    out += "}";
    return out;
}

}  // namespace spamlens
