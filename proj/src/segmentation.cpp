#include "spamlens/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace spamlens {

namespace {

constexpr float kCompactness = 10.0f;
constexpr int kIterations = 10;

// sRGB in [0,1] -> CIELAB against D65 white
void rgb_to_lab(float r, float g, float b, float& L, float& A, float& B) {
    const auto lin = [](float c) {
        return c <= 0.04045f ? c / 12.92f : std::pow((c + 0.055f) / 1.055f, 2.4f);
    };
    const float rl = lin(r), gl = lin(g), bl = lin(b);
    const float x = (0.4124564f * rl + 0.3575761f * gl + 0.1804375f * bl) / 0.95047f;
    const float y = 0.2126729f * rl + 0.7151522f * gl + 0.0721750f * bl;
    const float z = (0.0193339f * rl + 0.1191920f * gl + 0.9503041f * bl) / 1.08883f;
    const auto f = [](float t) { return t > 0.008856f ? std::cbrt(t) : 7.787f * t + 16.0f / 116.0f; };
    const float fx = f(x), fy = f(y), fz = f(z);
    L = 116.0f * fy - 16.0f;
    A = 500.0f * (fx - fy);
    B = 200.0f * (fy - fz);
}

struct Center {
    double L, a, b, x, y;
};

struct Components {
    std::vector<int> comp;  // connected-region id per pixel, scan-order numbering
    int count = 0;
};

// 4-connected regions of equal label; region ids follow first-pixel scan order.
Components find_components(const std::vector<int>& labels, int H, int W) {
    const std::size_t hw = labels.size();
    Components out;
    out.comp.assign(hw, -1);
    std::vector<std::size_t> stack;
    for (std::size_t p0 = 0; p0 < hw; ++p0) {
        if (out.comp[p0] != -1) continue;
        const int id = out.count++;
        out.comp[p0] = id;
        stack.assign(1, p0);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            const int y = static_cast<int>(p) / W, x = static_cast<int>(p) % W;
            const std::size_t nbr[4] = {p - W, p + W, p - 1, p + 1};
            const bool ok[4] = {y > 0, y + 1 < H, x > 0, x + 1 < W};
            for (int k = 0; k < 4; ++k) {
                if (!ok[k]) continue;
                const std::size_t q = nbr[k];
                if (out.comp[q] == -1 && labels[q] == labels[p]) {
                    out.comp[q] = id;
                    stack.push_back(q);
                }
            }
        }
    }
    return out;
}

// Splits the largest region in two: a BFS-grown half keeps connectivity of the
// carved part; the remainder is re-identified by the next component pass.
void split_largest(std::vector<int>& labels, int count, int H, int W) {
    std::vector<std::int64_t> size(count, 0), first(count, -1);
    for (std::size_t p = 0; p < labels.size(); ++p) {
        if (first[labels[p]] < 0) first[labels[p]] = static_cast<std::int64_t>(p);
        ++size[labels[p]];
    }
    int target = 0;
    for (int k = 1; k < count; ++k)
        if (size[k] > size[target]) target = k;

    const std::int64_t take = size[target] / 2;  // >= 1: the largest region has >= 2 pixels
    std::vector<std::size_t> queue;
    queue.reserve(static_cast<std::size_t>(take));
    std::vector<std::uint8_t> seen(labels.size(), 0);
    queue.push_back(static_cast<std::size_t>(first[target]));
    seen[queue[0]] = 1;
    for (std::size_t head = 0; head < queue.size() && static_cast<std::int64_t>(queue.size()) < take; ++head) {
        const std::size_t p = queue[head];
        const int y = static_cast<int>(p) / W, x = static_cast<int>(p) % W;
        const std::size_t nbr[4] = {p - W, p + W, p - 1, p + 1};
        const bool ok[4] = {y > 0, y + 1 < H, x > 0, x + 1 < W};
        for (int k = 0; k < 4 && static_cast<std::int64_t>(queue.size()) < take; ++k) {
            if (!ok[k]) continue;
            const std::size_t q = nbr[k];
            if (!seen[q] && labels[q] == target) {
                seen[q] = 1;
                queue.push_back(q);
            }
        }
    }
    for (const std::size_t p : queue) labels[p] = count;  // fresh id
}

// Merges the smallest region into its most similar 4-adjacent neighbour.
void merge_smallest(std::vector<int>& labels, int count, int H, int W, const std::vector<float>& lab) {
    std::vector<std::int64_t> size(count, 0);
    std::vector<double> mean(static_cast<std::size_t>(count) * 3, 0.0);
    for (std::size_t p = 0; p < labels.size(); ++p) {
        const int k = labels[p];
        ++size[k];
        for (int c = 0; c < 3; ++c) mean[k * 3 + c] += lab[p * 3 + c];
    }
    for (int k = 0; k < count; ++k)
        for (int c = 0; c < 3; ++c) mean[k * 3 + c] /= static_cast<double>(size[k]);

    int victim = 0;
    for (int k = 1; k < count; ++k)
        if (size[k] < size[victim]) victim = k;

    int best = -1;
    double best_d = std::numeric_limits<double>::max();
    const auto consider = [&](int other) {
        if (other == victim) return;
        double d = 0;
        for (int c = 0; c < 3; ++c) {
            const double dc = mean[victim * 3 + c] - mean[other * 3 + c];
            d += dc * dc;
        }
        if (d < best_d || (d == best_d && other < best)) {
            best_d = d;
            best = other;
        }
    };
    for (std::size_t p = 0; p < labels.size(); ++p) {
        if (labels[p] != victim) continue;
        const int y = static_cast<int>(p) / W, x = static_cast<int>(p) % W;
        if (y > 0) consider(labels[p - W]);
        if (y + 1 < H) consider(labels[p + W]);
        if (x > 0) consider(labels[p - 1]);
        if (x + 1 < W) consider(labels[p + 1]);
    }
    for (auto& l : labels)
        if (l == victim) l = best;
}

}  // namespace

Segmentation segment(const Tensor& image, int target_segments) {
    if (image.shape.size() != 3 || image.shape[2] != 3)
        throw SegmentationError("segment: expected an HxWx3 image, got " + shape_string(image.shape));
    const int H = image.shape[0], W = image.shape[1];
    const std::int64_t hw = static_cast<std::int64_t>(H) * W;
    if (target_segments < 2 || target_segments > hw)
        throw SegmentationError("segment: target_segments must be in [2, " + std::to_string(hw) +
                                "], got " + std::to_string(target_segments));
    const int M = target_segments;

    std::vector<float> lab(static_cast<std::size_t>(hw) * 3);
    for (std::int64_t p = 0; p < hw; ++p)
        rgb_to_lab(image.data[p * 3], image.data[p * 3 + 1], image.data[p * 3 + 2], lab[p * 3],
                   lab[p * 3 + 1], lab[p * 3 + 2]);

    // Seeds on an aspect-matched grid, M exactly
    int rows = static_cast<int>(std::lround(std::sqrt(static_cast<double>(M) * H / W)));
    rows = std::clamp(rows, 1, M);
    std::vector<Center> centers;
    centers.reserve(static_cast<std::size_t>(M));
    const int base_cols = M / rows, extra = M % rows;
    for (int r = 0; r < rows; ++r) {
        const int cols = base_cols + (r < extra ? 1 : 0);
        for (int c = 0; c < cols; ++c) {
            const int py = std::min(H - 1, static_cast<int>((r + 0.5) * H / rows));
            const int px = std::min(W - 1, static_cast<int>((c + 0.5) * W / cols));
            const std::size_t p = static_cast<std::size_t>(py) * W + px;
            centers.push_back(
                {lab[p * 3], lab[p * 3 + 1], lab[p * 3 + 2], static_cast<double>(px), static_cast<double>(py)});
        }
    }

    const double S = std::sqrt(static_cast<double>(hw) / M);
    const float spatial = static_cast<float>((kCompactness / S) * (kCompactness / S));
    const int reach = std::max(1, static_cast<int>(std::lround(2 * S)));

    std::vector<int> labels(static_cast<std::size_t>(hw), 0);
    std::vector<float> dist(static_cast<std::size_t>(hw));
    for (int iter = 0; iter < kIterations; ++iter) {
        std::fill(dist.begin(), dist.end(), std::numeric_limits<float>::max());
        for (int k = 0; k < static_cast<int>(centers.size()); ++k) {
            const Center& c = centers[k];
            const int y0 = std::max(0, static_cast<int>(c.y) - reach);
            const int y1 = std::min(H - 1, static_cast<int>(c.y) + reach);
            const int x0 = std::max(0, static_cast<int>(c.x) - reach);
            const int x1 = std::min(W - 1, static_cast<int>(c.x) + reach);
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const std::size_t p = static_cast<std::size_t>(y) * W + x;
                    const float dl = lab[p * 3] - static_cast<float>(c.L);
                    const float da = lab[p * 3 + 1] - static_cast<float>(c.a);
                    const float db = lab[p * 3 + 2] - static_cast<float>(c.b);
                    const float dx = static_cast<float>(x) - static_cast<float>(c.x);
                    const float dy = static_cast<float>(y) - static_cast<float>(c.y);
                    const float d = dl * dl + da * da + db * db + spatial * (dx * dx + dy * dy);
                    if (d < dist[p]) {
                        dist[p] = d;
                        labels[p] = k;
                    }
                }
            }
        }
        // pixels outside every search window (possible once centers drift)
        for (std::int64_t p = 0; p < hw; ++p) {
            if (dist[p] != std::numeric_limits<float>::max()) continue;
            const int y = static_cast<int>(p) / W, x = static_cast<int>(p) % W;
            float best = std::numeric_limits<float>::max();
            for (int k = 0; k < static_cast<int>(centers.size()); ++k) {
                const Center& c = centers[k];
                const float dl = lab[p * 3] - static_cast<float>(c.L);
                const float da = lab[p * 3 + 1] - static_cast<float>(c.a);
                const float db = lab[p * 3 + 2] - static_cast<float>(c.b);
                const float dx = static_cast<float>(x) - static_cast<float>(c.x);
                const float dy = static_cast<float>(y) - static_cast<float>(c.y);
                const float d = dl * dl + da * da + db * db + spatial * (dx * dx + dy * dy);
                if (d < best) {
                    best = d;
                    labels[p] = k;
                }
            }
            dist[p] = best;
        }

        std::vector<double> acc(centers.size() * 5, 0.0);
        std::vector<std::int64_t> cnt(centers.size(), 0);
        for (std::int64_t p = 0; p < hw; ++p) {
            const int k = labels[p];
            acc[k * 5 + 0] += lab[p * 3];
            acc[k * 5 + 1] += lab[p * 3 + 1];
            acc[k * 5 + 2] += lab[p * 3 + 2];
            acc[k * 5 + 3] += static_cast<double>(p % W);
            acc[k * 5 + 4] += static_cast<double>(p / W);
            ++cnt[k];
        }
        for (std::size_t k = 0; k < centers.size(); ++k) {
            if (cnt[k] == 0) continue;  // empty cluster keeps its seed
            const double inv = 1.0 / static_cast<double>(cnt[k]);
            centers[k] = {acc[k * 5] * inv, acc[k * 5 + 1] * inv, acc[k * 5 + 2] * inv,
                          acc[k * 5 + 3] * inv, acc[k * 5 + 4] * inv};
        }
    }

    // k-means leaves stray islands and may drop clusters; repair to exactly M
    // nonempty 4-connected regions. Splits only raise the count, merges lower
    // it by exactly one, so the loop lands on M.
    while (true) {
        Components c = find_components(labels, H, W);
        labels = std::move(c.comp);
        if (c.count == M) break;
        if (c.count < M)
            split_largest(labels, c.count, H, W);
        else
            merge_smallest(labels, c.count, H, W, lab);
    }

    Segmentation seg;
    seg.height = H;
    seg.width = W;
    seg.num_segments = M;
    seg.label_map = std::move(labels);
    return seg;
}

std::vector<float> segment_means(const Tensor& image, const Segmentation& seg) {
    if (image.shape.size() != 3 || image.shape[0] != seg.height || image.shape[1] != seg.width)
        throw SegmentationError("segment_means: image " + shape_string(image.shape) + " does not match a " +
                                std::to_string(seg.height) + "x" + std::to_string(seg.width) + " segmentation");
    const int C = image.shape[2];
    const std::size_t hw = seg.label_map.size();
    std::vector<double> acc(static_cast<std::size_t>(seg.num_segments) * C, 0.0);
    std::vector<std::int64_t> cnt(seg.num_segments, 0);
    for (std::size_t p = 0; p < hw; ++p) {
        const int k = seg.label_map[p];
        ++cnt[k];
        for (int c = 0; c < C; ++c) acc[static_cast<std::size_t>(k) * C + c] += image.data[p * C + c];
    }
    std::vector<float> means(acc.size());
    for (int k = 0; k < seg.num_segments; ++k)
        for (int c = 0; c < C; ++c)
            means[static_cast<std::size_t>(k) * C + c] =
                static_cast<float>(acc[static_cast<std::size_t>(k) * C + c] / static_cast<double>(cnt[k]));
    return means;
}

Tensor apply_mask(const Tensor& image, const Segmentation& seg, const std::vector<std::uint8_t>& mask) {
    if (static_cast<int>(mask.size()) != seg.num_segments)
        throw SegmentationError("apply_mask: mask length " + std::to_string(mask.size()) + " vs " +
                                std::to_string(seg.num_segments) + " segments");
    for (const auto m : mask)
        if (m > 1) throw SegmentationError("apply_mask: mask entries must be 0 or 1");
    const std::vector<float> means = segment_means(image, seg);
    const int C = image.shape[2];
    Tensor out = image;
    for (std::size_t p = 0; p < seg.label_map.size(); ++p) {
        const int k = seg.label_map[p];
        if (mask[k]) continue;
        for (int c = 0; c < C; ++c) out.data[p * C + c] = means[static_cast<std::size_t>(k) * C + c];
    }
    return out;
}

}  // namespace spamlens
