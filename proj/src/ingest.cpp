#include <algorithm>
#include <cctype>
#include <optional>
#include <tuple>
#include <unordered_set>

#include "spamlens/dataset.hpp"
#include "spamlens/image_io.hpp"
#include "spamlens/runtime.hpp"

namespace spamlens {

namespace {

bool has_image_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".gif";
}

}  // namespace

IngestResult ingest(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root))
        throw DatasetError("ingest root " + root.string() + " is not a directory");

    IngestResult result;
    for (const int label : {kLabelNormal, kLabelSpam}) {
        const std::filesystem::path dir = root / label_name(label);
        if (!std::filesystem::is_directory(dir))
            throw DatasetError("missing class directory " + dir.string());

        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(dir))
            if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path());
        std::sort(files.begin(), files.end());

        std::vector<std::optional<LabeledSample>> slots(files.size());
        parallel_for(0, static_cast<std::int64_t>(files.size()), [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i) {
                const std::optional<RawImage> raw = decode_image_file(files[i]);
                if (!raw) continue;
                LabeledSample s;
                s.image = normalize_image(*raw);
                s.label = label;
                s.source_id = files[i].string();
                s.content_hash = content_digest(s.image);
                slots[i] = std::move(s);
            }
        });

        std::int64_t class_decoded = 0;
        for (auto& slot : slots) {
            if (slot) {
                ++class_decoded;
                result.samples.push_back(std::move(*slot));
            } else {
                ++result.report.corrupt;
            }
        }
        if (class_decoded == 0) throw DatasetError("no decodable images under " + dir.string());
        result.report.decoded += class_decoded;
    }

    // Duplicates collapse to the earliest hit in scan order, across classes
    std::unordered_set<std::string> seen;
    std::vector<LabeledSample> unique;
    unique.reserve(result.samples.size());
    for (auto& s : result.samples) {
        if (seen.insert(s.content_hash).second)
            unique.push_back(std::move(s));
        else
            ++result.report.duplicates_removed;
    }
    result.samples = std::move(unique);

    std::sort(result.samples.begin(), result.samples.end(), [](const LabeledSample& a, const LabeledSample& b) {
        return std::tie(a.label, a.content_hash) < std::tie(b.label, b.content_hash);
    });
    for (const auto& s : result.samples)
        ++(s.label == kLabelSpam ? result.report.kept_spam : result.report.kept_normal);
    return result;
}

void write_ingested(const std::vector<LabeledSample>& samples, const std::filesystem::path& out) {
    std::filesystem::create_directories(out / label_name(kLabelSpam));
    std::filesystem::create_directories(out / label_name(kLabelNormal));
    parallel_for(0, static_cast<std::int64_t>(samples.size()), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const LabeledSample& s = samples[i];
            write_png(out / label_name(s.label) / (s.content_hash + ".png"), to_raw_u8(s.image));
        }
    });
}

}  // namespace spamlens
