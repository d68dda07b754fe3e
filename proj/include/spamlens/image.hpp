#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "spamlens/tensor.hpp"

namespace spamlens {

struct ImageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Decoded 8-bit pixels, row-major, channel-interleaved. channels is 1
/// (gray), 2 (gray+alpha), 3 (RGB) or 4 (RGBA).
struct RawImage {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    bool valid() const {
        return height > 0 && width > 0 && channels > 0 &&
               pixels.size() == static_cast<std::size_t>(height) * width * channels;
    }
};

constexpr int kModelInputSize = 128;

/// Bilinear resample with half-pixel-centred sampling; exact identity when
/// the sizes already match and exact on constant images.
Tensor bilinear_resize(const Tensor& src, int out_h, int out_w);

/// RawImage -> model input: gray replicated to RGB, alpha dropped, bilinear
/// resize to 128x128, intensities scaled to [0,1].
Tensor normalize_image(const RawImage& raw);

/// Digest of the pixel content, not the container: the normalized tensor is
/// quantized back to 8-bit before hashing so the digest survives a
/// write-to-PNG / re-decode roundtrip.
std::string content_digest(const Tensor& normalized);

/// [0,1] tensor -> 8-bit RGB buffer using the same quantization as the digest.
RawImage to_raw_u8(const Tensor& t);

/// 8-bit RGB buffer -> [0,1] tensor without resizing.
Tensor from_raw_u8(const RawImage& raw);

}  // namespace spamlens
