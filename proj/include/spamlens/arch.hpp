#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "spamlens/kernels.hpp"

namespace spamlens {

enum class Activation { none, relu, sigmoid };

/// Structural description of one layer; parameter tensors live in the model.
struct LayerSpec {
    LayerKind kind = LayerKind::conv2d;
    int filters = 0;  // conv2d
    int kernel = 0;   // conv2d, square
    int pool = 0;     // maxpool2d
    int units = 0;    // dense
    Activation activation = Activation::none;
};

struct ArchSpec {
    int input_h = 0;
    int input_w = 0;
    int input_c = 0;
    std::vector<LayerSpec> layers;
};

/// The production classifier: four conv/pool blocks then two dense layers,
/// 128x128x3 in, one sigmoid probability out.
ArchSpec classifier_arch();

/// Stable one-line rendering of the architecture; the checkpoint fingerprint
/// is the SHA-256 of this string.
std::string canonical_string(const ArchSpec& arch);

std::array<std::uint8_t, 32> arch_fingerprint(const ArchSpec& arch);

/// Output shape of every layer in order, starting from the input shape.
/// Throws ShapeError when a layer cannot consume its input.
std::vector<std::vector<int>> layer_output_shapes(const ArchSpec& arch);

/// Trainable parameter count per layer (0 for pool/flatten).
std::vector<std::int64_t> layer_param_counts(const ArchSpec& arch);

}  // namespace spamlens
