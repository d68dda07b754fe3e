#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "spamlens/image.hpp"
#include "spamlens/tensor.hpp"

namespace spamlens {

struct DatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr int kLabelNormal = 0;
constexpr int kLabelSpam = 1;

inline const char* label_name(int label) { return label == kLabelSpam ? "spam" : "normal"; }

struct LabeledSample {
    Tensor image;              // 128x128x3, values in [0,1]
    int label = kLabelNormal;  // spam=1, normal=0
    std::string source_id;     // origin file path
    std::string content_hash;  // digest of decoded+normalized pixels
};

struct DatasetSplit {
    std::vector<LabeledSample> train;
    std::vector<LabeledSample> test;
    std::uint64_t seed = 0;
};

struct IngestReport {
    std::int64_t decoded = 0;
    std::int64_t corrupt = 0;
    std::int64_t duplicates_removed = 0;
    std::int64_t kept_spam = 0;
    std::int64_t kept_normal = 0;

    std::string to_json() const;
};

struct IngestResult {
    std::vector<LabeledSample> samples;
    IngestReport report;
};

/// Reads `<root>/spam/*` and `<root>/normal/*` (jpg/png/gif), skipping and
/// counting undecodable files, collapsing duplicate content hashes, and
/// normalizing every survivor. Sample order is deterministic: sorted by
/// (label, content_hash).
IngestResult ingest(const std::filesystem::path& root);

/// Writes each sample as `<out>/<label>/<content_hash>.png`. Re-ingesting the
/// output reproduces the same samples (quantization is idempotent).
void write_ingested(const std::vector<LabeledSample>& samples, const std::filesystem::path& out);

struct SplitIndices {
    std::vector<int> train;
    std::vector<int> test;
};

/// Stratified 3:1 assignment over sample indices. Per class, samples are
/// ordered by content_hash (so the split is independent of input order) and
/// shuffled by the seeded generator; the train side takes round(3n/4),
/// clamped so both sides stay nonempty.
SplitIndices split_indices(const std::vector<std::string>& content_hashes, const std::vector<int>& labels,
                           std::uint64_t seed);

DatasetSplit split(std::vector<LabeledSample> samples, std::uint64_t seed);

/// Deterministic synthetic corpus: `spam/` images carry dense high-contrast
/// horizontal bar textures over a gradient background; `normal/` images are
/// smooth low-frequency blob composites. Written as JPEG.
void gen_synthetic(int n_per_class, std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace spamlens
