#pragma once

#include <functional>

#include "spamlens/tensor.hpp"

namespace spamlens {

/// Black-box classifier interface shared by every explainer: image tensor
/// with values in [0,1] goes in, spam probability comes out.
using ModelFn = std::function<double(const Tensor&)>;

}  // namespace spamlens
