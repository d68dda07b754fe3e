#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "spamlens/tensor.hpp"

namespace spamlens {

enum class LayerKind { conv2d, maxpool2d, flatten, dense };

/// Parameters of one layer. Pool and flatten layers carry empty tensors.
template <typename T>
struct LayerParamsT {
    LayerKind kind = LayerKind::conv2d;
    TensorT<T> weights;  // conv: (kh,kw,in_c,filters); dense: (in_features,out_features)
    TensorT<T> bias;     // conv: (filters); dense: (out_features)
    int kernel_h = 0, kernel_w = 0;  // conv
    int pool = 0;                    // maxpool
    int units = 0;                   // dense

    std::int64_t param_count() const { return weights.numel() + bias.numel(); }
};

using LayerParams = LayerParamsT<float>;

namespace detail {
inline void require_rank(int actual, int expected, const char* what) {
    if (actual != expected)
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(expected) +
                         ", got rank " + std::to_string(actual));
}
}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d: valid padding, stride 1, channels-last.
//   out[i,j,f] = bias[f] + sum_{a,b,c} in[i+a, j+b, c] * w[a,b,c,f]
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const LayerParamsT<T>& p) {
    detail::require_rank(input.rank(), 3, "conv2d input");
    detail::require_rank(p.weights.rank(), 4, "conv2d weights");
    const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
    const int kh = p.weights.dim(0), kw = p.weights.dim(1);
    const int wc = p.weights.dim(2), f = p.weights.dim(3);
    if (c != wc)
        throw ShapeError("conv2d: input channels " + std::to_string(c) +
                         " do not match weight channels " + std::to_string(wc));
    if (h < kh)
        throw ShapeError("conv2d: input height " + std::to_string(h) + " smaller than kernel height " +
                         std::to_string(kh));
    if (w < kw)
        throw ShapeError("conv2d: input width " + std::to_string(w) + " smaller than kernel width " +
                         std::to_string(kw));
    if (p.bias.numel() != f)
        throw ShapeError("conv2d: bias length " + std::to_string(p.bias.numel()) +
                         " does not match filter count " + std::to_string(f));

    const int oh = h - kh + 1, ow = w - kw + 1;
    TensorT<T> out({oh, ow, f});

    const T* in = input.data.data();
    const T* wt = p.weights.data.data();
    const T* bs = p.bias.data.data();
    T* o = out.data.data();

    for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j)
            std::copy(bs, bs + f, o + (static_cast<std::size_t>(i) * ow + j) * f);

    for (int i = 0; i < oh; ++i) {
        T* orow_base = o + static_cast<std::size_t>(i) * ow * f;
        for (int a = 0; a < kh; ++a) {
            const T* inrow = in + (static_cast<std::size_t>(i + a) * w) * c;
            for (int b = 0; b < kw; ++b) {
                const T* wtab = wt + (static_cast<std::size_t>(a) * kw + b) * c * f;
                for (int j = 0; j < ow; ++j) {
                    const T* px = inrow + static_cast<std::size_t>(j + b) * c;
                    T* orow = orow_base + static_cast<std::size_t>(j) * f;
                    for (int cc = 0; cc < c; ++cc) {
                        const T v = px[cc];
                        const T* wk = wtab + static_cast<std::size_t>(cc) * f;
                        for (int ff = 0; ff < f; ++ff) orow[ff] += v * wk[ff];
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
struct ConvGradsT {
    TensorT<T> input_grad;
    TensorT<T> weight_grad;
    TensorT<T> bias_grad;
};

template <typename T>
ConvGradsT<T> conv2d_backward(const TensorT<T>& input, const LayerParamsT<T>& p,
                              const TensorT<T>& upstream, bool need_input_grad = true) {
    detail::require_rank(input.rank(), 3, "conv2d input");
    detail::require_rank(upstream.rank(), 3, "conv2d upstream grad");
    const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
    const int kh = p.weights.dim(0), kw = p.weights.dim(1);
    const int wc = p.weights.dim(2), f = p.weights.dim(3);
    const int oh = h - kh + 1, ow = w - kw + 1;
    if (c != wc)
        throw ShapeError("conv2d: input channels " + std::to_string(c) +
                         " do not match weight channels " + std::to_string(wc));
    if (upstream.dim(0) != oh || upstream.dim(1) != ow || upstream.dim(2) != f)
        throw ShapeError("conv2d: upstream grad shape " + upstream.shape_str() + " does not match output shape " +
                         shape_string({oh, ow, f}));

    ConvGradsT<T> g;
    g.weight_grad = TensorT<T>(p.weights.shape);
    g.bias_grad = TensorT<T>(p.bias.shape);
    if (need_input_grad) g.input_grad = TensorT<T>(input.shape);

    const T* in = input.data.data();
    const T* up = upstream.data.data();

    T* bg = g.bias_grad.data.data();
    for (std::size_t k = 0; k < upstream.data.size(); k += f)
        for (int ff = 0; ff < f; ++ff) bg[ff] += up[k + ff];

    T* wg = g.weight_grad.data.data();
    for (int a = 0; a < kh; ++a) {
        for (int b = 0; b < kw; ++b) {
            T* wgab = wg + (static_cast<std::size_t>(a) * kw + b) * c * f;
            for (int i = 0; i < oh; ++i) {
                const T* inrow = in + (static_cast<std::size_t>(i + a) * w + b) * c;
                const T* uprow = up + static_cast<std::size_t>(i) * ow * f;
                for (int j = 0; j < ow; ++j) {
                    const T* px = inrow + static_cast<std::size_t>(j) * c;
                    const T* uj = uprow + static_cast<std::size_t>(j) * f;
                    for (int cc = 0; cc < c; ++cc) {
                        const T v = px[cc];
                        T* wk = wgab + static_cast<std::size_t>(cc) * f;
                        for (int ff = 0; ff < f; ++ff) wk[ff] += v * uj[ff];
                    }
                }
            }
        }
    }

    if (need_input_grad) {
        // transpose weights to (kh,kw,f,c) so the inner accumulation runs over
        // contiguous channel slices
        std::vector<T> wT(static_cast<std::size_t>(kh) * kw * f * c);
        const T* wt = p.weights.data.data();
        for (int a = 0; a < kh; ++a)
            for (int b = 0; b < kw; ++b)
                for (int cc = 0; cc < c; ++cc)
                    for (int ff = 0; ff < f; ++ff)
                        wT[((static_cast<std::size_t>(a) * kw + b) * f + ff) * c + cc] =
                            wt[((static_cast<std::size_t>(a) * kw + b) * c + cc) * f + ff];

        T* ig = g.input_grad.data.data();
        for (int i = 0; i < oh; ++i) {
            const T* uprow = up + static_cast<std::size_t>(i) * ow * f;
            for (int a = 0; a < kh; ++a) {
                T* igrow = ig + (static_cast<std::size_t>(i + a) * w) * c;
                for (int b = 0; b < kw; ++b) {
                    const T* wtab = wT.data() + (static_cast<std::size_t>(a) * kw + b) * f * c;
                    for (int j = 0; j < ow; ++j) {
                        const T* uj = uprow + static_cast<std::size_t>(j) * f;
                        T* gx = igrow + static_cast<std::size_t>(j + b) * c;
                        for (int ff = 0; ff < f; ++ff) {
                            const T v = uj[ff];
                            const T* wk = wtab + static_cast<std::size_t>(ff) * c;
                            for (int cc = 0; cc < c; ++cc) gx[cc] += v * wk[cc];
                        }
                    }
                }
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// max pooling, square window == stride; trailing rows/columns that do not
// fill a window are dropped. Ties go to the first (row-major) index.
// ---------------------------------------------------------------------------

template <typename T>
struct PoolResultT {
    TensorT<T> output;
    std::vector<std::int32_t> argmax;  // flat index into the input per output cell
};

template <typename T>
PoolResultT<T> maxpool2d_forward(const TensorT<T>& input, int pool = 2) {
    detail::require_rank(input.rank(), 3, "maxpool2d input");
    if (pool < 1) throw ShapeError("maxpool2d: pool size " + std::to_string(pool) + " is not positive");
    const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
    const int oh = h / pool, ow = w / pool;
    if (oh == 0 || ow == 0)
        throw ShapeError("maxpool2d: input " + input.shape_str() + " smaller than pool window " +
                         std::to_string(pool));

    PoolResultT<T> r;
    r.output = TensorT<T>({oh, ow, c});
    r.argmax.resize(r.output.data.size());

    const T* in = input.data.data();
    for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
            for (int cc = 0; cc < c; ++cc) {
                std::int64_t best_idx = (static_cast<std::int64_t>(i) * pool * w + static_cast<std::int64_t>(j) * pool) * c + cc;
                T best = in[best_idx];
                for (int a = 0; a < pool; ++a) {
                    for (int b = 0; b < pool; ++b) {
                        const std::int64_t idx =
                            (static_cast<std::int64_t>(i * pool + a) * w + (j * pool + b)) * c + cc;
                        if (in[idx] > best) {
                            best = in[idx];
                            best_idx = idx;
                        }
                    }
                }
                const std::size_t out_idx = (static_cast<std::size_t>(i) * ow + j) * c + cc;
                r.output.data[out_idx] = best;
                r.argmax[out_idx] = static_cast<std::int32_t>(best_idx);
            }
        }
    }
    return r;
}

template <typename T>
TensorT<T> maxpool2d_backward(const std::vector<std::int32_t>& argmax, const TensorT<T>& upstream,
                              const std::vector<int>& input_shape, int pool = 2) {
    if (input_shape.size() != 3) throw ShapeError("maxpool2d: input shape must have rank 3");
    const int h = input_shape[0], w = input_shape[1], c = input_shape[2];
    const int oh = h / pool, ow = w / pool;
    if (upstream.rank() != 3 || upstream.dim(0) != oh || upstream.dim(1) != ow || upstream.dim(2) != c)
        throw ShapeError("maxpool2d: stale argmax indices, upstream shape " + upstream.shape_str() +
                         " disagrees with pooled shape " + shape_string({oh, ow, c}));
    if (argmax.size() != upstream.data.size())
        throw ShapeError("maxpool2d: stale argmax indices, count " + std::to_string(argmax.size()) +
                         " disagrees with upstream size " + std::to_string(upstream.data.size()));

    TensorT<T> grad(input_shape);
    const std::int64_t n = grad.numel();
    for (std::size_t k = 0; k < argmax.size(); ++k) {
        const std::int32_t idx = argmax[k];
        if (idx < 0 || idx >= n)
            throw ShapeError("maxpool2d: stale argmax index " + std::to_string(idx) + " outside input of size " +
                             std::to_string(n));
        grad.data[static_cast<std::size_t>(idx)] += upstream.data[k];
    }
    return grad;
}

// ---------------------------------------------------------------------------
// dense: out = x W + bias, weights (in_features, out_features)
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> dense_forward(const TensorT<T>& input, const LayerParamsT<T>& p) {
    detail::require_rank(input.rank(), 1, "dense input");
    detail::require_rank(p.weights.rank(), 2, "dense weights");
    const int in_f = p.weights.dim(0), out_f = p.weights.dim(1);
    if (input.dim(0) != in_f)
        throw ShapeError("dense: input length " + std::to_string(input.dim(0)) +
                         " does not match in_features " + std::to_string(in_f));
    if (p.bias.numel() != out_f)
        throw ShapeError("dense: bias length " + std::to_string(p.bias.numel()) +
                         " does not match out_features " + std::to_string(out_f));

    TensorT<T> out({out_f});
    std::copy(p.bias.data.begin(), p.bias.data.end(), out.data.begin());
    const T* x = input.data.data();
    const T* wt = p.weights.data.data();
    T* o = out.data.data();
    for (int i = 0; i < in_f; ++i) {
        const T v = x[i];
        const T* row = wt + static_cast<std::size_t>(i) * out_f;
        for (int j = 0; j < out_f; ++j) o[j] += v * row[j];
    }
    return out;
}

template <typename T>
struct DenseGradsT {
    TensorT<T> input_grad;
    TensorT<T> weight_grad;
    TensorT<T> bias_grad;
};

template <typename T>
DenseGradsT<T> dense_backward(const TensorT<T>& input, const LayerParamsT<T>& p, const TensorT<T>& upstream) {
    detail::require_rank(input.rank(), 1, "dense input");
    detail::require_rank(upstream.rank(), 1, "dense upstream grad");
    const int in_f = p.weights.dim(0), out_f = p.weights.dim(1);
    if (input.dim(0) != in_f)
        throw ShapeError("dense: input length " + std::to_string(input.dim(0)) +
                         " does not match in_features " + std::to_string(in_f));
    if (upstream.dim(0) != out_f)
        throw ShapeError("dense: upstream grad length " + std::to_string(upstream.dim(0)) +
                         " does not match out_features " + std::to_string(out_f));

    DenseGradsT<T> g;
    g.input_grad = TensorT<T>({in_f});
    g.weight_grad = TensorT<T>(p.weights.shape);
    g.bias_grad = upstream;

    const T* x = input.data.data();
    const T* wt = p.weights.data.data();
    const T* up = upstream.data.data();
    T* xg = g.input_grad.data.data();
    T* wg = g.weight_grad.data.data();
    for (int i = 0; i < in_f; ++i) {
        const T* row = wt + static_cast<std::size_t>(i) * out_f;
        T* wrow = wg + static_cast<std::size_t>(i) * out_f;
        T acc = T(0);
        const T v = x[i];
        for (int j = 0; j < out_f; ++j) {
            acc += row[j] * up[j];
            wrow[j] = v * up[j];
        }
        xg[i] = acc;
    }
    return g;
}

// ---------------------------------------------------------------------------
// activations and loss
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> out = x;
    for (T& v : out.data) v = std::max(v, T(0));
    return out;
}

// subgradient at 0 is 0
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& upstream) {
    if (!x.same_shape(upstream))
        throw ShapeError("relu: upstream grad shape " + upstream.shape_str() + " does not match input shape " +
                         x.shape_str());
    TensorT<T> out(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = x.data[i] > T(0) ? upstream.data[i] : T(0);
    return out;
}

/// Numerically stable logistic; the result is clamped to the open interval
/// (0,1) so downstream logs stay finite even when exp underflows.
template <typename T>
T sigmoid(T x) {
    T s;
    if (x >= T(0)) {
        s = T(1) / (T(1) + std::exp(-x));
    } else {
        const T e = std::exp(x);
        s = e / (T(1) + e);
    }
    const T lo = std::numeric_limits<T>::min();
    const T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
    return std::min(std::max(s, lo), hi);
}

template <typename T>
T sigmoid_backward(T x, T upstream) {
    const T s = sigmoid(x);
    return upstream * s * (T(1) - s);
}

constexpr double kBceClamp = 1e-7;

template <typename T>
struct BceResultT {
    T loss;
    T dloss_dp;
};

/// Binary cross entropy on a single probability. The probability is clamped
/// away from {0,1} before the log; inside the clamped band the loss is flat,
/// so the gradient there is zero.
template <typename T>
BceResultT<T> bce_loss(T p, int label) {
    if (label != 0 && label != 1) throw std::invalid_argument("bce_loss: label must be 0 or 1");
    const T eps = T(kBceClamp);
    const T lo = eps, hi = T(1) - eps;
    const T pc = std::min(std::max(p, lo), hi);
    BceResultT<T> r;
    r.loss = label == 1 ? -std::log(pc) : -std::log(T(1) - pc);
    if (p > lo && p < hi) {
        r.dloss_dp = (pc - T(label)) / (pc * (T(1) - pc));
    } else {
        r.dloss_dp = T(0);
    }
    return r;
}

}  // namespace spamlens
