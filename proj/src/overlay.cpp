#include "spamlens/overlay.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

namespace spamlens {

Tensor broadcast_attribution(const Segmentation& seg, const std::vector<double>& values) {
    if (static_cast<int>(values.size()) != seg.num_segments)
        throw OverlayError("broadcast_attribution: " + std::to_string(values.size()) + " values vs " +
                           std::to_string(seg.num_segments) + " segments");
    Tensor out({seg.height, seg.width, 1});
    for (std::size_t p = 0; p < seg.label_map.size(); ++p)
        out.data[p] = static_cast<float>(values[seg.label_map[p]]);
    return out;
}

Tensor upsample_attribution(const Heatmap& h, int height, int width) {
    if (h.rows < 1 || h.cols < 1) throw OverlayError("upsample_attribution: empty heatmap");
    Tensor grid({h.rows, h.cols, 1});
    for (std::size_t i = 0; i < h.grid.size(); ++i) grid.data[i] = static_cast<float>(h.grid[i]);
    return bilinear_resize(grid, height, width);
}

RawImage render_overlay(const Tensor& image, const Tensor& attribution) {
    if (image.shape.size() != 3 || image.shape[2] != 3)
        throw OverlayError("render_overlay: expected an HxWx3 image, got " + shape_string(image.shape));
    const int H = image.shape[0], W = image.shape[1];
    const bool flat = attribution.shape.size() == 2;
    if (!(flat || (attribution.shape.size() == 3 && attribution.shape[2] == 1)) ||
        attribution.shape[0] != H || attribution.shape[1] != W)
        throw OverlayError("render_overlay: attribution " + shape_string(attribution.shape) +
                           " does not match a " + std::to_string(H) + "x" + std::to_string(W) + " image");
    if (!all_finite(attribution)) throw OverlayError("render_overlay: non-finite attribution");

    float vmax = 0;
    for (const float v : attribution.data) vmax = std::max(vmax, std::abs(v));

    RawImage out;
    out.height = H;
    out.width = W;
    out.channels = 3;
    out.pixels.resize(static_cast<std::size_t>(H) * W * 3);
    const auto quantize = [](float v) {
        return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0f), 0L, 255L));
    };
    const std::size_t hw = static_cast<std::size_t>(H) * W;
    for (std::size_t p = 0; p < hw; ++p) {
        const float gray = 0.299f * image.data[p * 3] + 0.587f * image.data[p * 3 + 1] +
                           0.114f * image.data[p * 3 + 2];
        const float v = attribution.data[p];
        const float a = vmax > 0 ? 0.5f * std::abs(v) / vmax : 0.0f;
        const float base = (1.0f - a) * gray;
        out.pixels[p * 3 + 0] = quantize(base + (v > 0 ? a : 0.0f));
        out.pixels[p * 3 + 1] = quantize(base);
        out.pixels[p * 3 + 2] = quantize(base + (v < 0 ? a : 0.0f));
    }
    return out;
}

std::vector<std::uint8_t> segmentation_png(const Segmentation& seg) {
    if (seg.num_segments > 65536) throw OverlayError("segmentation_png: more than 65536 segments");
    cv::Mat m(seg.height, seg.width, CV_16UC1);
    for (int y = 0; y < seg.height; ++y) {
        std::uint16_t* row = m.ptr<std::uint16_t>(y);
        for (int x = 0; x < seg.width; ++x)
            row[x] = static_cast<std::uint16_t>(seg.label_map[static_cast<std::size_t>(y) * seg.width + x]);
    }
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", m, out)) throw OverlayError("segmentation_png: encoding failed");
    return out;
}

}  // namespace spamlens
