#include "spamlens/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace spamlens {

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw MetricsError("confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                           std::to_string(labels.size()) + " labels");
    if (predictions.empty()) throw MetricsError("confusion: empty input");

    ConfusionMatrix cm;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int p = predictions[i], y = labels[i];
        if ((p != 0 && p != 1) || (y != 0 && y != 1))
            throw MetricsError("confusion: values must be 0 (normal) or 1 (spam)");
        if (y == 1)
            ++(p == 1 ? cm.tp : cm.fn);
        else
            ++(p == 1 ? cm.fp : cm.tn);
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw UndefinedMetricError("accuracy is undefined: no samples");
    return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

double recall(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fn == 0) throw UndefinedMetricError("recall is undefined: tp+fn = 0");
    return static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
}

double precision(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fp == 0) throw UndefinedMetricError("precision is undefined: tp+fp = 0");
    return static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
}

double f1(const ConfusionMatrix& cm) {
    const double p = precision(cm);
    const double r = recall(cm);
    if (p + r == 0) throw UndefinedMetricError("f1 is undefined: precision+recall = 0");
    return 2.0 * p * r / (p + r);
}

std::string format_percent(double ratio) {
    const long long centis = std::llround(ratio * 10000.0);  // half away from zero
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld.%02lld%%", centis / 100, centis % 100);
    return buf;
}

namespace {

std::string json_number(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

}  // namespace

std::string metrics_json(const ConfusionMatrix& cm) {
    std::string out = "{";
    out += "\"tp\":" + std::to_string(cm.tp);
    out += ",\"tn\":" + std::to_string(cm.tn);
    out += ",\"fp\":" + std::to_string(cm.fp);
    out += ",\"fn\":" + std::to_string(cm.fn);
    out += ",\"accuracy\":" + json_number(accuracy(cm));
    out += ",\"recall\":" + json_number(recall(cm));
    out += ",\"precision\":" + json_number(precision(cm));
    out += ",\"f1\":" + json_number(f1(cm));
    out += "}";
    return out;
}

std::string metrics_table(const ConfusionMatrix& cm) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "                 predicted spam   predicted normal\n"
                  "  actual spam   %15lld %18lld\n"
                  "  actual normal %15lld %18lld\n",
                  static_cast<long long>(cm.tp), static_cast<long long>(cm.fn),
                  static_cast<long long>(cm.fp), static_cast<long long>(cm.tn));
    std::string out = buf;
    const auto row = [&out, &cm](const char* name, double (*metric)(const ConfusionMatrix&)) {
        out += "  ";
        out += name;
        try {
            out += format_percent(metric(cm));
        } catch (const UndefinedMetricError&) {
            out += "n/a";
        }
        out += "\n";
    };
    row("accuracy   ", accuracy);
    row("recall     ", recall);
    row("precision  ", precision);
    row("f1         ", f1);
    return out;
}

}  // namespace spamlens
