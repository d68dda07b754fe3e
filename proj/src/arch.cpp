#include "spamlens/arch.hpp"

#include "spamlens/sha256.hpp"

namespace spamlens {

ArchSpec classifier_arch() {
    ArchSpec a;
    a.input_h = a.input_w = 128;
    a.input_c = 3;
    a.layers = {
        {LayerKind::conv2d, 32, 3, 0, 0, Activation::relu},
        {LayerKind::maxpool2d, 0, 0, 2, 0, Activation::none},
        {LayerKind::conv2d, 64, 3, 0, 0, Activation::relu},
        {LayerKind::maxpool2d, 0, 0, 2, 0, Activation::none},
        {LayerKind::conv2d, 128, 3, 0, 0, Activation::relu},
        {LayerKind::maxpool2d, 0, 0, 2, 0, Activation::none},
        {LayerKind::conv2d, 128, 5, 0, 0, Activation::relu},
        {LayerKind::maxpool2d, 0, 0, 2, 0, Activation::none},
        {LayerKind::flatten, 0, 0, 0, 0, Activation::none},
        {LayerKind::dense, 0, 0, 0, 512, Activation::relu},
        {LayerKind::dense, 0, 0, 0, 1, Activation::sigmoid},
    };
    return a;
}

namespace {
const char* activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        default: return "none";
    }
}
}  // namespace

std::string canonical_string(const ArchSpec& arch) {
    std::string s = "in:" + std::to_string(arch.input_h) + "x" + std::to_string(arch.input_w) + "x" +
                    std::to_string(arch.input_c);
    for (const LayerSpec& l : arch.layers) {
        s += "|";
        switch (l.kind) {
            case LayerKind::conv2d:
                s += "conv:" + std::to_string(l.filters) + "@" + std::to_string(l.kernel) + "x" +
                     std::to_string(l.kernel) + "," + activation_name(l.activation);
                break;
            case LayerKind::maxpool2d:
                s += "pool:" + std::to_string(l.pool);
                break;
            case LayerKind::flatten:
                s += "flatten";
                break;
            case LayerKind::dense:
                s += "dense:" + std::to_string(l.units) + "," + activation_name(l.activation);
                break;
        }
    }
    return s;
}

std::array<std::uint8_t, 32> arch_fingerprint(const ArchSpec& arch) {
    const std::string s = canonical_string(arch);
    return sha256_bytes(s.data(), s.size());
}

std::vector<std::vector<int>> layer_output_shapes(const ArchSpec& arch) {
    std::vector<std::vector<int>> shapes;
    std::vector<int> cur = {arch.input_h, arch.input_w, arch.input_c};
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const LayerSpec& l = arch.layers[i];
        switch (l.kind) {
            case LayerKind::conv2d: {
                if (cur.size() != 3)
                    throw ShapeError("layer " + std::to_string(i) + ": conv2d needs a rank-3 input");
                if (cur[0] < l.kernel || cur[1] < l.kernel)
                    throw ShapeError("layer " + std::to_string(i) + ": input " + shape_string(cur) +
                                     " smaller than kernel " + std::to_string(l.kernel));
                cur = {cur[0] - l.kernel + 1, cur[1] - l.kernel + 1, l.filters};
                break;
            }
            case LayerKind::maxpool2d: {
                if (cur.size() != 3)
                    throw ShapeError("layer " + std::to_string(i) + ": maxpool2d needs a rank-3 input");
                const int oh = cur[0] / l.pool, ow = cur[1] / l.pool;
                if (oh == 0 || ow == 0)
                    throw ShapeError("layer " + std::to_string(i) + ": input " + shape_string(cur) +
                                     " smaller than pool window");
                cur = {oh, ow, cur[2]};
                break;
            }
            case LayerKind::flatten: {
                std::int64_t n = 1;
                for (int d : cur) n *= d;
                cur = {static_cast<int>(n)};
                break;
            }
            case LayerKind::dense: {
                if (cur.size() != 1)
                    throw ShapeError("layer " + std::to_string(i) + ": dense needs a flattened input");
                cur = {l.units};
                break;
            }
        }
        shapes.push_back(cur);
    }
    return shapes;
}

std::vector<std::int64_t> layer_param_counts(const ArchSpec& arch) {
    std::vector<std::int64_t> counts;
    std::vector<int> cur = {arch.input_h, arch.input_w, arch.input_c};
    const auto shapes = layer_output_shapes(arch);
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const LayerSpec& l = arch.layers[i];
        std::int64_t n = 0;
        if (l.kind == LayerKind::conv2d)
            n = static_cast<std::int64_t>(l.kernel) * l.kernel * cur[2] * l.filters + l.filters;
        else if (l.kind == LayerKind::dense)
            n = static_cast<std::int64_t>(cur[0]) * l.units + l.units;
        counts.push_back(n);
        cur = shapes[i];
    }
    return counts;
}

}  // namespace spamlens
