#include "spamlens/occlusion.hpp"

#include <algorithm>

#include "spamlens/jsonio.hpp"
#include "spamlens/runtime.hpp"

namespace spamlens {

Heatmap occlusion_map(const Tensor& image, const ModelFn& model_fn, int patch, int stride) {
    if (image.shape.size() != 3)
        throw OcclusionError("occlusion_map: expected an HxWxC image, got " + shape_string(image.shape));
    const int H = image.shape[0], W = image.shape[1], C = image.shape[2];
    if (patch < 1 || patch > std::min(H, W))
        throw OcclusionError("occlusion_map: patch must be in [1, " + std::to_string(std::min(H, W)) +
                             "], got " + std::to_string(patch));
    if (stride < 1) throw OcclusionError("occlusion_map: stride must be >= 1");

    std::vector<float> fill(static_cast<std::size_t>(C), 0.0f);
    {
        std::vector<double> acc(static_cast<std::size_t>(C), 0.0);
        const std::size_t hw = static_cast<std::size_t>(H) * W;
        for (std::size_t p = 0; p < hw; ++p)
            for (int c = 0; c < C; ++c) acc[c] += image.data[p * C + c];
        for (int c = 0; c < C; ++c) fill[c] = static_cast<float>(acc[c] / static_cast<double>(hw));
    }

    Heatmap h;
    h.patch = patch;
    h.stride = stride;
    h.rows = (H - patch) / stride + 1;
    h.cols = (W - patch) / stride + 1;
    h.baseline = model_fn(image);
    h.grid.assign(static_cast<std::size_t>(h.rows) * h.cols, 0.0);

    parallel_for(0, static_cast<std::int64_t>(h.grid.size()), [&](std::int64_t lo, std::int64_t hi) {
        Tensor occluded = image;
        for (std::int64_t cell = lo; cell < hi; ++cell) {
            const int i = static_cast<int>(cell) / h.cols;
            const int j = static_cast<int>(cell) % h.cols;
            const int y0 = i * stride, x0 = j * stride;
            occluded.data = image.data;
            for (int y = y0; y < y0 + patch; ++y)
                for (int x = x0; x < x0 + patch; ++x)
                    for (int c = 0; c < C; ++c)
                        occluded.data[(static_cast<std::size_t>(y) * W + x) * C + c] = fill[c];
            h.grid[static_cast<std::size_t>(cell)] = h.baseline - model_fn(occluded);
        }
    });
    return h;
}

std::string heatmap_json(const Heatmap& h) {
    std::string out = "{\"method\":\"occlusion\"";
    out += ",\"patch\":" + std::to_string(h.patch);
    out += ",\"stride\":" + std::to_string(h.stride);
    out += ",\"baseline\":" + json_number(h.baseline);
    out += ",\"grid\":[";
    for (int i = 0; i < h.rows; ++i) {
        if (i) out += ",";
        out += "[";
        for (int j = 0; j < h.cols; ++j) {
            if (j) out += ",";
            out += json_number(h.at(i, j));
        }
        out += "]";
    }
    out += "]}";
    return out;
}

}  // namespace spamlens
