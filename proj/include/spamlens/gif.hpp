#pragma once

#include <cstddef>
#include <cstdint>

#include "spamlens/image.hpp"

namespace spamlens {

/// Decodes the first frame of a GIF87a/GIF89a stream to RGB. Animation
/// compositing and transparency are out of scope: later frames are ignored
/// and the transparent index renders as its palette color. Throws ImageError
/// on malformed or truncated input.
RawImage decode_gif_first_frame(const std::uint8_t* data, std::size_t len);

inline bool looks_like_gif(const std::uint8_t* data, std::size_t len) {
    return len >= 6 && data[0] == 'G' && data[1] == 'I' && data[2] == 'F' && data[3] == '8' &&
           (data[4] == '7' || data[4] == '9') && data[5] == 'a';
}

}  // namespace spamlens
