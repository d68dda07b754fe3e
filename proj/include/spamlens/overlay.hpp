#pragma once

#include <stdexcept>
#include <vector>

#include "spamlens/image.hpp"
#include "spamlens/occlusion.hpp"
#include "spamlens/segmentation.hpp"
#include "spamlens/tensor.hpp"

namespace spamlens {

struct OverlayError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Per-segment attribution broadcast to every member pixel; HxWx1 result.
Tensor broadcast_attribution(const Segmentation& seg, const std::vector<double>& values);

/// Heatmap grid bilinearly upsampled to the given image size; HxWx1 result.
Tensor upsample_attribution(const Heatmap& h, int height, int width);

/// Diverging overlay: the image drops to grayscale, then each pixel blends
/// toward red (positive) or blue (negative) with alpha 0.5*|v|/max|v|.
/// All-zero attribution renders the plain grayscale image. Negating the
/// attribution swaps the red and blue channels exactly.
RawImage render_overlay(const Tensor& image, const Tensor& attribution);

/// Label map as a 16-bit grayscale PNG payload (ids up to 65535).
std::vector<std::uint8_t> segmentation_png(const Segmentation& seg);

}  // namespace spamlens
