#include "spamlens/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spamlens/runtime.hpp"

namespace spamlens {

namespace {

// Batch gradients are accumulated into a fixed number of shards (sample k
// goes to shard k mod kGradShards, ascending within a shard) and the shards
// are reduced in index order. The result is independent of how many worker
// threads actually ran.
constexpr int kGradShards = 8;

struct GradAccum {
    std::vector<Tensor> weights;
    std::vector<Tensor> bias;
    double loss_sum = 0.0;
    std::int64_t correct = 0;

    explicit GradAccum(const Model& m) {
        weights.reserve(m.params.size());
        bias.reserve(m.params.size());
        for (const auto& p : m.params) {
            const bool has = p.weights.numel() > 0 && (p.kind == LayerKind::conv2d || p.kind == LayerKind::dense);
            weights.emplace_back(has ? p.weights.shape : std::vector<int>{1});
            bias.emplace_back(has ? p.bias.shape : std::vector<int>{1});
        }
    }

    void zero() {
        for (auto& t : weights) t.fill(0.0f);
        for (auto& t : bias) t.fill(0.0f);
        loss_sum = 0.0;
        correct = 0;
    }

    static void axpy(Tensor& dst, const Tensor& src) {
        float* d = dst.data.data();
        const float* s = src.data.data();
        for (std::size_t i = 0; i < dst.data.size(); ++i) d[i] += s[i];
    }

    void add_sample(const std::vector<LayerGradsT<float>>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!g[i].present) continue;
            axpy(weights[i], g[i].weights);
            axpy(bias[i], g[i].bias);
        }
    }

    void add_shard(const GradAccum& other) {
        for (std::size_t i = 0; i < weights.size(); ++i) {
            axpy(weights[i], other.weights[i]);
            axpy(bias[i], other.bias[i]);
        }
        loss_sum += other.loss_sum;
        correct += other.correct;
    }
};

}  // namespace

TrainHistory train(Model& model, const DatasetSplit& split, const TrainConfig& cfg,
                   const EpochCallback& on_epoch) {
    const std::vector<LabeledSample>& items = split.train;
    if (items.empty()) throw TrainError("training set is empty");
    if (cfg.epochs <= 0 || cfg.batch_size <= 0 || cfg.learning_rate <= 0)
        throw TrainError("training configuration values must be positive");
    bool has_spam = false, has_normal = false;
    for (const auto& s : items) (s.label == kLabelSpam ? has_spam : has_normal) = true;
    if (!has_spam || !has_normal)
        throw TrainError("training set must contain both classes; got only " +
                         std::string(has_spam ? "spam" : "normal"));

    RmsPropConfig opt;
    opt.learning_rate = cfg.learning_rate;
    opt.rho = cfg.rho;
    opt.epsilon = cfg.epsilon;

    std::vector<OptimizerState> w_state, b_state;
    w_state.reserve(model.params.size());
    b_state.reserve(model.params.size());
    for (const auto& p : model.params) {
        const bool has = p.kind == LayerKind::conv2d || p.kind == LayerKind::dense;
        w_state.emplace_back(has ? p.weights.shape : std::vector<int>{1});
        b_state.emplace_back(has ? p.bias.shape : std::vector<int>{1});
    }

    std::vector<GradAccum> shards;
    shards.reserve(kGradShards);
    for (int s = 0; s < kGradShards; ++s) shards.emplace_back(model);
    GradAccum total(model);

    const int n = static_cast<int>(items.size());
    std::vector<int> order(items.size());
    std::iota(order.begin(), order.end(), 0);

    TrainHistory history;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937 shuffle_rng(derive_seed(cfg.seed, rngstream::kShuffle, static_cast<std::uint64_t>(epoch)));
        fisher_yates_shuffle(order, shuffle_rng);

        double epoch_loss = 0.0;
        std::int64_t epoch_correct = 0;
        int batch_index = 0;
        for (int start = 0; start < n; start += cfg.batch_size, ++batch_index) {
            const int bs = std::min(cfg.batch_size, n - start);
            for (auto& sh : shards) sh.zero();

            parallel_for(0, kGradShards, [&](std::int64_t lo, std::int64_t hi) {
                for (std::int64_t s = lo; s < hi; ++s) {
                    GradAccum& acc = shards[static_cast<std::size_t>(s)];
                    for (int k = static_cast<int>(s); k < bs; k += kGradShards) {
                        const LabeledSample& sample = items[static_cast<std::size_t>(order[start + k])];
                        ForwardTraceT<float> tr = forward_trace(model, sample.image);
                        const auto bce = bce_loss(tr.prob, sample.label);
                        acc.loss_sum += bce.loss;
                        const int pred = tr.prob >= 0.5f ? kLabelSpam : kLabelNormal;
                        if (pred == sample.label) ++acc.correct;
                        const float dlogit = sigmoid_backward(tr.logit, bce.dloss_dp);
                        acc.add_sample(backward(model, tr, dlogit));
                    }
                }
            });

            total.zero();
            for (const auto& sh : shards) total.add_shard(sh);

            const double batch_mean_loss = total.loss_sum / bs;
            if (!std::isfinite(batch_mean_loss))
                throw TrainError("non-finite training loss in epoch " + std::to_string(epoch + 1) + ", batch " +
                                 std::to_string(batch_index));

            const float inv_bs = 1.0f / static_cast<float>(bs);
            for (std::size_t i = 0; i < model.params.size(); ++i) {
                auto& p = model.params[i];
                if (p.kind != LayerKind::conv2d && p.kind != LayerKind::dense) continue;
                for (float& v : total.weights[i].data) v *= inv_bs;
                for (float& v : total.bias[i].data) v *= inv_bs;
                rmsprop_step(p.weights, total.weights[i], w_state[i], opt);
                rmsprop_step(p.bias, total.bias[i], b_state[i], opt);
            }

            epoch_loss += total.loss_sum;
            epoch_correct += total.correct;
        }

        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.mean_loss = epoch_loss / n;
        stats.train_accuracy = static_cast<double>(epoch_correct) / n;
        if (cfg.eval_heldout && !split.test.empty()) {
            std::vector<char> ok(split.test.size(), 0);
            parallel_for(0, static_cast<std::int64_t>(split.test.size()), [&](std::int64_t lo, std::int64_t hi) {
                for (std::int64_t i = lo; i < hi; ++i) {
                    const auto& s = split.test[static_cast<std::size_t>(i)];
                    const float p = forward_prob(model, s.image);
                    const int pred = p >= 0.5f ? kLabelSpam : kLabelNormal;
                    ok[static_cast<std::size_t>(i)] = pred == s.label ? 1 : 0;
                }
            });
            stats.heldout_accuracy =
                static_cast<double>(std::count(ok.begin(), ok.end(), 1)) / static_cast<double>(ok.size());
            stats.has_heldout = true;
        }
        history.epochs.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }
    return history;
}

Prediction predict(const Model& model, const Tensor& image, float threshold) {
    Prediction p;
    p.probability = forward_prob(model, image);
    p.label = p.probability >= threshold ? kLabelSpam : kLabelNormal;
    return p;
}

}  // namespace spamlens
