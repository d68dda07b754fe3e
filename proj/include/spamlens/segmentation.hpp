#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "spamlens/tensor.hpp"

namespace spamlens {

struct SegmentationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Superpixel partition of an image. Every pixel carries one id in
/// [0,num_segments) and every id names a nonempty 4-connected region.
struct Segmentation {
    int height = 0;
    int width = 0;
    int num_segments = 0;
    std::vector<int> label_map;  // row-major, height*width entries

    int label(int y, int x) const { return label_map[static_cast<std::size_t>(y) * width + x]; }
};

/// SLIC-style superpixels: k-means over (L,a,b,x,y) with spatial compactness
/// 10 for 10 iterations from a grid seeding, then connectivity repair
/// (merge/split) until exactly `target_segments` 4-connected regions remain.
/// Fully deterministic. Requires an H×W×3 image and 2 ≤ M ≤ H·W.
Segmentation segment(const Tensor& image, int target_segments);

/// Segments with mask=1 keep their pixels; segments with mask=0 are flattened
/// to their own mean color. Mask length must equal num_segments.
Tensor apply_mask(const Tensor& image, const Segmentation& seg, const std::vector<std::uint8_t>& mask);

/// Per-segment mean colors, num_segments × channels, row-major.
std::vector<float> segment_means(const Tensor& image, const Segmentation& seg);

}  // namespace spamlens
