#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "spamlens/dataset.hpp"
#include "spamlens/image_io.hpp"
#include "spamlens/rng.hpp"
#include "spamlens/runtime.hpp"

namespace spamlens {

namespace {

constexpr int kSynthSize = 256;

// Independent per-class seed streams
constexpr std::uint64_t kStreamNormal = 0x4e4f524d;
constexpr std::uint64_t kStreamSpam = 0x5350414d;

float clamp01(float v) { return v < 0.f ? 0.f : (v > 1.f ? 1.f : v); }

// Bright gradient field overprinted with rows of dark word-shaped bars (the
// look of rendered text), then salted with impulse noise.
void draw_spam(std::vector<float>& lum, std::mt19937& rng) {
    const int H = kSynthSize, W = kSynthSize;
    const float top = uniform_float(rng, 0.55f, 0.95f);
    const float bottom = uniform_float(rng, 0.55f, 0.95f);
    for (int y = 0; y < H; ++y) {
        const float v = top + (bottom - top) * (static_cast<float>(y) / (H - 1));
        for (int x = 0; x < W; ++x) lum[y * W + x] = v;
    }

    const int lines = 8 + static_cast<int>(uniform_index(rng, 7));
    int y = 6 + static_cast<int>(uniform_index(rng, 12));
    for (int line = 0; line < lines && y + 12 < H; ++line) {
        const int height = 6 + static_cast<int>(uniform_index(rng, 7));
        const float contrast = uniform_float(rng, 0.3f, 0.9f);
        int x = 6 + static_cast<int>(uniform_index(rng, 14));
        while (x + 8 < W - 6) {
            const int word = 8 + static_cast<int>(uniform_index(rng, 23));
            const int x1 = std::min(x + word, W - 6);
            for (int yy = y; yy < y + height; ++yy)
                for (int xx = x; xx < x1; ++xx) lum[yy * W + xx] = clamp01(lum[yy * W + xx] - contrast);
            x = x1 + 4 + static_cast<int>(uniform_index(rng, 9));
        }
        y += height + 6 + static_cast<int>(uniform_index(rng, 11));
    }

    const int n_speckle = H * W * 3 / 200;  // ~1.5%
    for (int i = 0; i < n_speckle; ++i) {
        const int p = static_cast<int>(uniform_index(rng, H * W));
        lum[p] = clamp01(lum[p] + (uniform_index(rng, 2) ? 0.25f : -0.25f));
    }
}

// Smooth low-frequency composite: a four-corner gradient blended with a few
// broad Gaussian blobs. No sharp edges anywhere.
void draw_normal(std::vector<float>& lum, std::mt19937& rng) {
    const int H = kSynthSize, W = kSynthSize;
    float corner[4];
    for (float& c : corner) c = uniform_float(rng, 0.2f, 0.9f);
    for (int y = 0; y < H; ++y) {
        const float fy = static_cast<float>(y) / (H - 1);
        const float left = corner[0] + (corner[2] - corner[0]) * fy;
        const float right = corner[1] + (corner[3] - corner[1]) * fy;
        for (int x = 0; x < W; ++x) {
            const float fx = static_cast<float>(x) / (W - 1);
            lum[y * W + x] = left + (right - left) * fx;
        }
    }

    const int blobs = 3 + static_cast<int>(uniform_index(rng, 5));
    for (int b = 0; b < blobs; ++b) {
        const float cx = uniform_float(rng, 0.f, static_cast<float>(W));
        const float cy = uniform_float(rng, 0.f, static_cast<float>(H));
        const float sigma = uniform_float(rng, 20.f, 60.f);
        const float target = uniform_float(rng, 0.1f, 0.95f);
        const float inv = 1.0f / (2.0f * sigma * sigma);
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const float dx = static_cast<float>(x) - cx;
                const float dy = static_cast<float>(y) - cy;
                const float w = std::exp(-(dx * dx + dy * dy) * inv);
                float& v = lum[y * W + x];
                v += (target - v) * w;
            }
        }
    }
}

RawImage tint_to_rgb(const std::vector<float>& lum, std::mt19937& rng) {
    float tint[3];
    for (float& t : tint) t = uniform_float(rng, 0.88f, 1.0f);
    RawImage img;
    img.height = kSynthSize;
    img.width = kSynthSize;
    img.channels = 3;
    img.pixels.resize(lum.size() * 3);
    for (std::size_t i = 0; i < lum.size(); ++i)
        for (int c = 0; c < 3; ++c)
            img.pixels[i * 3 + c] =
                static_cast<std::uint8_t>(std::lround(clamp01(lum[i] * tint[c]) * 255.f));
    return img;
}

}  // namespace

void gen_synthetic(int n_per_class, std::uint64_t seed, const std::filesystem::path& out_dir) {
    if (n_per_class < 1) throw DatasetError("n_per_class must be >= 1, got " + std::to_string(n_per_class));
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "spam", ec);
    std::filesystem::create_directories(out_dir / "normal", ec);
    if (!std::filesystem::is_directory(out_dir / "spam") || !std::filesystem::is_directory(out_dir / "normal"))
        throw DatasetError("cannot create output directories under " + out_dir.string());

    // One generator per image, seeded from (seed, class, index): content never
    // depends on how the loop is chunked across workers.
    parallel_for(0, 2LL * n_per_class, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<float> lum(static_cast<std::size_t>(kSynthSize) * kSynthSize);
        char name[32];
        for (std::int64_t k = lo; k < hi; ++k) {
            const bool spam = k >= n_per_class;
            const int index = static_cast<int>(spam ? k - n_per_class : k);
            std::mt19937 rng(derive_seed(seed, spam ? kStreamSpam : kStreamNormal,
                                         static_cast<std::uint64_t>(index)));
            if (spam)
                draw_spam(lum, rng);
            else
                draw_normal(lum, rng);
            const RawImage img = tint_to_rgb(lum, rng);
            std::snprintf(name, sizeof name, "%s_%06d.jpg", spam ? "spam" : "normal", index);
            write_jpeg(out_dir / (spam ? "spam" : "normal") / name, img);
        }
    });
}

}  // namespace spamlens
