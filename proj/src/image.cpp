#include "spamlens/image.hpp"

#include <algorithm>
#include <cmath>

#include "spamlens/sha256.hpp"

namespace spamlens {

Tensor bilinear_resize(const Tensor& src, int out_h, int out_w) {
    if (src.rank() != 3) throw ShapeError("resize: expected rank-3 input, got " + src.shape_str());
    if (out_h <= 0 || out_w <= 0) throw ImageError("resize: target dimensions must be positive");
    const int h = src.dim(0), w = src.dim(1), c = src.dim(2);
    if (h == out_h && w == out_w) return src;

    Tensor out({out_h, out_w, c});
    const float sy = static_cast<float>(h) / out_h;
    const float sx = static_cast<float>(w) / out_w;
    for (int i = 0; i < out_h; ++i) {
        float fy = (i + 0.5f) * sy - 0.5f;
        fy = std::clamp(fy, 0.0f, static_cast<float>(h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, h - 1);
        const float wy = fy - y0;
        for (int j = 0; j < out_w; ++j) {
            float fx = (j + 0.5f) * sx - 0.5f;
            fx = std::clamp(fx, 0.0f, static_cast<float>(w - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, w - 1);
            const float wx = fx - x0;
            for (int cc = 0; cc < c; ++cc) {
                const float top = src.at(y0, x0, cc) * (1 - wx) + src.at(y0, x1, cc) * wx;
                const float bot = src.at(y1, x0, cc) * (1 - wx) + src.at(y1, x1, cc) * wx;
                out.at(i, j, cc) = top * (1 - wy) + bot * wy;
            }
        }
    }
    return out;
}

Tensor normalize_image(const RawImage& raw) {
    if (raw.height <= 0 || raw.width <= 0) throw ImageError("normalize: zero-area image");
    if (!raw.valid()) throw ImageError("normalize: pixel buffer does not match declared dimensions");
    if (raw.channels < 1 || raw.channels > 4)
        throw ImageError("normalize: unsupported channel count " + std::to_string(raw.channels));

    // gray / gray+alpha replicate, RGBA drops alpha
    Tensor rgb({raw.height, raw.width, 3});
    const std::uint8_t* px = raw.pixels.data();
    const int ch = raw.channels;
    const std::size_t n = static_cast<std::size_t>(raw.height) * raw.width;
    for (std::size_t k = 0; k < n; ++k) {
        const std::uint8_t* p = px + k * ch;
        float r, g, b;
        if (ch <= 2) {
            r = g = b = static_cast<float>(p[0]);
        } else {
            r = static_cast<float>(p[0]);
            g = static_cast<float>(p[1]);
            b = static_cast<float>(p[2]);
        }
        rgb.data[k * 3 + 0] = r;
        rgb.data[k * 3 + 1] = g;
        rgb.data[k * 3 + 2] = b;
    }

    Tensor resized = bilinear_resize(rgb, kModelInputSize, kModelInputSize);
    for (float& v : resized.data) v /= 255.0f;
    return resized;
}

namespace {
std::uint8_t quantize(float v) {
    const long q = std::lround(v * 255.0f);
    return static_cast<std::uint8_t>(std::clamp(q, 0L, 255L));
}
}  // namespace

std::string content_digest(const Tensor& normalized) {
    if (normalized.rank() != 3)
        throw ShapeError("digest: expected rank-3 tensor, got " + normalized.shape_str());
    std::vector<std::uint8_t> buf;
    buf.reserve(12 + normalized.data.size());
    for (int d = 0; d < 3; ++d) {
        const std::uint32_t v = static_cast<std::uint32_t>(normalized.dim(d));
        buf.push_back(static_cast<std::uint8_t>(v));
        buf.push_back(static_cast<std::uint8_t>(v >> 8));
        buf.push_back(static_cast<std::uint8_t>(v >> 16));
        buf.push_back(static_cast<std::uint8_t>(v >> 24));
    }
    for (float v : normalized.data) buf.push_back(quantize(v));
    return sha256_hex(buf.data(), buf.size());
}

RawImage to_raw_u8(const Tensor& t) {
    if (t.rank() != 3) throw ShapeError("to_raw_u8: expected rank-3 tensor, got " + t.shape_str());
    RawImage raw;
    raw.height = t.dim(0);
    raw.width = t.dim(1);
    raw.channels = t.dim(2);
    raw.pixels.resize(t.data.size());
    for (std::size_t i = 0; i < t.data.size(); ++i) raw.pixels[i] = quantize(t.data[i]);
    return raw;
}

Tensor from_raw_u8(const RawImage& raw) {
    if (!raw.valid()) throw ImageError("from_raw_u8: invalid raw image");
    Tensor t({raw.height, raw.width, raw.channels});
    for (std::size_t i = 0; i < raw.pixels.size(); ++i) t.data[i] = static_cast<float>(raw.pixels[i]) / 255.0f;
    return t;
}

}  // namespace spamlens
