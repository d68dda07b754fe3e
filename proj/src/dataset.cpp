#include "spamlens/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "spamlens/rng.hpp"

namespace spamlens {

namespace {
constexpr std::uint64_t kStreamSplit = 0x5350u;  // rng stream id for split shuffles
}

std::string IngestReport::to_json() const {
    std::string s = "{";
    s += "\"decoded\":" + std::to_string(decoded);
    s += ",\"corrupt\":" + std::to_string(corrupt);
    s += ",\"duplicates_removed\":" + std::to_string(duplicates_removed);
    s += ",\"kept\":{\"spam\":" + std::to_string(kept_spam);
    s += ",\"normal\":" + std::to_string(kept_normal) + "}}";
    return s;
}

SplitIndices split_indices(const std::vector<std::string>& content_hashes, const std::vector<int>& labels,
                           std::uint64_t seed) {
    if (content_hashes.size() != labels.size())
        throw DatasetError("split: hash and label lists differ in length");

    SplitIndices out;
    for (int label : {kLabelSpam, kLabelNormal}) {
        std::vector<int> idx;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label) idx.push_back(static_cast<int>(i));
        if (idx.size() < 2)
            throw DatasetError(std::string("split: class '") + label_name(label) +
                               "' has fewer than 2 samples");

        std::sort(idx.begin(), idx.end(),
                  [&](int a, int b) { return content_hashes[static_cast<std::size_t>(a)] <
                                             content_hashes[static_cast<std::size_t>(b)]; });
        std::mt19937 rng(derive_seed(seed, kStreamSplit, static_cast<std::uint64_t>(label)));
        fisher_yates_shuffle(idx, rng);

        const std::size_t n = idx.size();
        std::size_t n_train = (3 * n + 2) / 4;  // round(0.75 n)
        n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
        out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    }
    return out;
}

DatasetSplit split(std::vector<LabeledSample> samples, std::uint64_t seed) {
    std::vector<std::string> hashes;
    std::vector<int> labels;
    hashes.reserve(samples.size());
    labels.reserve(samples.size());
    for (const auto& s : samples) {
        hashes.push_back(s.content_hash);
        labels.push_back(s.label);
    }
    const SplitIndices idx = split_indices(hashes, labels, seed);

    DatasetSplit out;
    out.seed = seed;
    out.train.reserve(idx.train.size());
    out.test.reserve(idx.test.size());
    for (int i : idx.train) out.train.push_back(std::move(samples[static_cast<std::size_t>(i)]));
    for (int i : idx.test) out.test.push_back(std::move(samples[static_cast<std::size_t>(i)]));
    return out;
}

}  // namespace spamlens
