#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "spamlens/model_fn.hpp"

namespace spamlens {

struct OcclusionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Occlusion-sensitivity map. grid[i][j] = baseline - model(image with the
/// patch at (i*stride, j*stride) replaced by the global mean color), so
/// positive cells mark evidence the prediction leans on.
struct Heatmap {
    int patch = 0;
    int stride = 0;
    int rows = 0;
    int cols = 0;
    double baseline = 0;
    std::vector<double> grid;  // rows*cols, row-major

    double at(int i, int j) const { return grid[static_cast<std::size_t>(i) * cols + j]; }
};

/// Slides the masking patch over every stride-aligned position. Deterministic
/// and seed-free. rows = floor((H-patch)/stride)+1, same for cols.
Heatmap occlusion_map(const Tensor& image, const ModelFn& model_fn, int patch = 16, int stride = 8);

/// {"method":"occlusion","patch":..,"stride":..,"baseline":..,"grid":[[..]]}
std::string heatmap_json(const Heatmap& h);

}  // namespace spamlens
