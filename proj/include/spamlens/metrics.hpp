#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace spamlens {

/// Raised when a metric's denominator is zero; the message names the metric.
struct UndefinedMetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MetricsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Spam is the positive class: fp counts normal mail flagged as spam, fn
/// counts spam that slipped through.
struct ConfusionMatrix {
    std::int64_t tp = 0;
    std::int64_t tn = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;

    std::int64_t total() const { return tp + tn + fp + fn; }
};

/// Tallies predictions against ground truth. Labels use the dataset encoding
/// (spam=1, normal=0). Errors on empty or mismatched inputs.
ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& labels);

double accuracy(const ConfusionMatrix& cm);   // (tp+tn) / total
double recall(const ConfusionMatrix& cm);     // tp / (tp+fn)
double precision(const ConfusionMatrix& cm);  // tp / (tp+fp)
double f1(const ConfusionMatrix& cm);         // harmonic mean of precision and recall

/// "95.68%" — two decimals, half-away-from-zero, matching report tables.
std::string format_percent(double ratio);

/// {"tp":..,"tn":..,"fp":..,"fn":..,"accuracy":..,"recall":..,"precision":..,"f1":..}
/// Ratios are serialized as unrounded decimals.
std::string metrics_json(const ConfusionMatrix& cm);

/// Human-readable block for terminal output.
std::string metrics_table(const ConfusionMatrix& cm);

}  // namespace spamlens
