#include "spamlens/shap.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "spamlens/jsonio.hpp"
#include "spamlens/rng.hpp"
#include "spamlens/runtime.hpp"

namespace spamlens {

namespace {

constexpr std::uint64_t kStreamCoalition = 0x53484150;

// One regression row: a coalition, its kernel weight, and the model value.
struct CoalitionRow {
    std::vector<std::uint8_t> mask;
    double weight = 0;
    double value = 0;
};

// Solves the constrained kernel system: phi_0 is pinned to the empty-coalition
// output and the last attribution is eliminated through the efficiency
// constraint, leaving an (M-1)-variable weighted least squares.
std::vector<double> solve_constrained(const std::vector<CoalitionRow>& rows, int M, double base, double fx,
                                      double ridge, const char* underdetermined_hint) {
    if (M == 1) return {fx - base};

    const int n = static_cast<int>(rows.size());
    const int k = M - 1;
    Eigen::MatrixXd X(n, k);
    Eigen::VectorXd y(n), w(n);
    const double excess = fx - base;
    for (int i = 0; i < n; ++i) {
        const auto& r = rows[i];
        const double zm = r.mask[M - 1];
        for (int j = 0; j < k; ++j) X(i, j) = static_cast<double>(r.mask[j]) - zm;
        y(i) = r.value - base - zm * excess;
        w(i) = r.weight;
    }
    Eigen::MatrixXd A = X.transpose() * w.asDiagonal() * X;
    for (int j = 0; j < k; ++j) A(j, j) += ridge;
    const Eigen::VectorXd b = X.transpose() * (w.array() * y.array()).matrix();

    Eigen::VectorXd head;
    if (ridge == 0.0) {
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        if (!lu.isInvertible()) throw ShapError(underdetermined_hint);
        head = lu.solve(b);
    } else {
        head = A.ldlt().solve(b);
    }

    std::vector<double> phi(static_cast<std::size_t>(M));
    double sum = 0;
    for (int j = 0; j < k; ++j) {
        phi[j] = head(j);
        sum += head(j);
    }
    phi[M - 1] = excess - sum;  // efficiency holds by construction
    return phi;
}

std::vector<std::uint8_t> mask_from_bits(std::uint32_t bits, int M) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) mask[j] = (bits >> j) & 1u;
    return mask;
}

}  // namespace

double shapley_kernel_weight(int M, int s) {
    if (M < 2) throw ShapError("shapley_kernel_weight: need at least 2 players");
    if (s <= 0 || s >= M)
        throw ShapError("shapley_kernel_weight: size " + std::to_string(s) +
                        " is an equality constraint, not a weighted sample");
    double binom = 1.0;
    for (int i = 1; i <= s; ++i) binom = binom * (M - s + i) / i;
    return (M - 1.0) / (binom * s * (M - s));
}

double masked_predict(const Tensor& image, const Segmentation& seg, const std::vector<std::uint8_t>& coalition,
                      const ModelFn& model_fn) {
    return model_fn(apply_mask(image, seg, coalition));
}

ShapExplanation kernel_shap(const Tensor& image, const Segmentation& seg, const ModelFn& model_fn,
                            const ShapConfig& config) {
    const int M = seg.num_segments;
    if (M < 1) throw ShapError("kernel_shap: need at least one segment");
    if (config.exact_threshold < 1) throw ShapError("kernel_shap: exact_threshold must be >= 1");
    if (config.ridge < 0) throw ShapError("kernel_shap: ridge must be >= 0");

    ShapExplanation out;
    out.seed = config.seed;

    if (M <= config.exact_threshold) {
        // full enumeration: evaluate the model on every coalition
        const std::uint32_t total = 1u << M;
        std::vector<double> value(total);
        parallel_for(0, static_cast<std::int64_t>(total), [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t bits = lo; bits < hi; ++bits)
                value[static_cast<std::size_t>(bits)] =
                    masked_predict(image, seg, mask_from_bits(static_cast<std::uint32_t>(bits), M), model_fn);
        });
        out.base_value = value[0];
        out.fx = value[total - 1];
        out.n_coalitions = total;
        out.sampled = false;

        if (M == 1) {
            out.phi = {out.fx - out.base_value};
            return out;
        }
        std::vector<CoalitionRow> rows;
        rows.reserve(total - 2);
        for (std::uint32_t bits = 1; bits + 1 < total; ++bits) {
            CoalitionRow r;
            r.mask = mask_from_bits(bits, M);
            r.weight = shapley_kernel_weight(M, std::popcount(bits));
            r.value = value[bits];
            rows.push_back(std::move(r));
        }
        out.phi = solve_constrained(rows, M, out.base_value, out.fx, config.ridge,
                                    "kernel_shap: enumerated system is singular");
        return out;
    }

    // sampled mode: draw coalition sizes from the kernel-induced distribution
    // (so rows carry uniform weights) and always take complement pairs
    const int min_n = 2 * M + 2;
    if (config.num_samples < min_n)
        throw ShapError("kernel_shap: sampled mode needs num_samples >= 2M+2 = " + std::to_string(min_n) +
                        ", got " + std::to_string(config.num_samples));

    // p(s) proportional to (M-1)/(s(M-s)), i.e. kernel weight times the number
    // of size-s coalitions
    std::vector<double> cumulative(static_cast<std::size_t>(M - 1));
    double total_p = 0;
    for (int s = 1; s < M; ++s) {
        total_p += 1.0 / (static_cast<double>(s) * (M - s));
        cumulative[s - 1] = total_p;
    }

    std::mt19937 rng(derive_seed(config.seed, kStreamCoalition));
    const std::int64_t pairs = (config.num_samples - 2) / 2;
    std::vector<std::vector<std::uint8_t>> masks;
    masks.reserve(static_cast<std::size_t>(pairs) * 2);
    std::vector<int> indices(static_cast<std::size_t>(M));
    std::iota(indices.begin(), indices.end(), 0);
    for (std::int64_t p = 0; p < pairs; ++p) {
        const double u = uniform_double(rng) * total_p;
        const int s = 1 + static_cast<int>(std::lower_bound(cumulative.begin(), cumulative.end(), u) -
                                           cumulative.begin());
        fisher_yates_shuffle(indices, rng);
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(M), 0);
        for (int j = 0; j < s; ++j) mask[indices[j]] = 1;
        std::vector<std::uint8_t> complement(static_cast<std::size_t>(M));
        for (int j = 0; j < M; ++j) complement[j] = 1 - mask[j];
        masks.push_back(std::move(mask));
        masks.push_back(std::move(complement));
    }

    // evaluate each distinct coalition once; repeats reuse the cached value
    // but keep their row multiplicity (that is the sampling signal)
    std::map<std::vector<std::uint8_t>, double> cache;
    cache[std::vector<std::uint8_t>(static_cast<std::size_t>(M), 0)] = 0;
    cache[std::vector<std::uint8_t>(static_cast<std::size_t>(M), 1)] = 0;
    for (const auto& m : masks) cache.emplace(m, 0);
    std::vector<std::pair<const std::vector<std::uint8_t>*, double*>> jobs;
    jobs.reserve(cache.size());
    for (auto& [mask, value] : cache) jobs.push_back({&mask, &value});
    parallel_for(0, static_cast<std::int64_t>(jobs.size()), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i)
            *jobs[i].second = masked_predict(image, seg, *jobs[i].first, model_fn);
    });

    out.base_value = cache.at(std::vector<std::uint8_t>(static_cast<std::size_t>(M), 0));
    out.fx = cache.at(std::vector<std::uint8_t>(static_cast<std::size_t>(M), 1));
    out.n_coalitions = 2 + 2 * pairs;
    out.sampled = true;

    std::vector<CoalitionRow> rows;
    rows.reserve(masks.size());
    for (auto& m : masks) {
        CoalitionRow r;
        r.weight = 1.0;
        r.value = cache.at(m);
        r.mask = std::move(m);
        rows.push_back(std::move(r));
    }
    const std::string hint = "kernel_shap: sampled system is underdetermined; increase num_samples (minimum " +
                             std::to_string(min_n) + ")";
    out.phi = solve_constrained(rows, M, out.base_value, out.fx, config.ridge, hint.c_str());
    return out;
}

std::vector<double> exact_shapley(const ValueFn& value_fn, int M) {
    if (M < 1 || M > 20)
        throw ShapError("exact_shapley: supports 1..20 players, got " + std::to_string(M));

    const std::uint32_t total = 1u << M;
    std::vector<double> value(total);
    for (std::uint32_t bits = 0; bits < total; ++bits) value[bits] = value_fn(mask_from_bits(bits, M));

    // ordering weight for a coalition of size s: s!(M-s-1)!/M! = 1/(M*C(M-1,s))
    std::vector<double> weight(static_cast<std::size_t>(M));
    double binom = 1.0;  // C(M-1, s)
    for (int s = 0; s < M; ++s) {
        weight[s] = 1.0 / (M * binom);
        binom = binom * (M - 1 - s) / (s + 1);
    }

    std::vector<double> out(static_cast<std::size_t>(M) + 1, 0.0);
    out[0] = value[0];
    for (int j = 0; j < M; ++j) {
        const std::uint32_t bit = 1u << j;
        double phi = 0;
        for (std::uint32_t s = 0; s < total; ++s) {
            if (s & bit) continue;
            phi += weight[std::popcount(s)] * (value[s | bit] - value[s]);
        }
        out[static_cast<std::size_t>(j) + 1] = phi;
    }
    return out;
}

std::string shap_json(const ShapExplanation& e) {
    std::string out = "{\"method\":\"shap\"";
    out += ",\"base_value\":" + json_number(e.base_value);
    out += ",\"phi\":" + json_array(e.phi);
    out += ",\"fx\":" + json_number(e.fx);
    out += std::string(",\"mode\":\"") + (e.sampled ? "sampled" : "exact") + "\"";
    out += ",\"n_coalitions\":" + std::to_string(e.n_coalitions);
    out += ",\"seed\":" + std::to_string(e.seed);
    out += "}";
    return out;
}

}  // namespace spamlens
