#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace spamlens {

// Dimensions do not line up; the message names the offending dimension.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline std::string shape_string(const std::vector<int>& dims) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) os << ',';
        os << dims[i];
    }
    os << ')';
    return os.str();
}

/// Dense multi-dimensional array with row-major flat storage.
/// T is float for training and double for gradient checking.
template <typename T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> data;

    TensorT() = default;

    explicit TensorT(std::vector<int> dims, T fill = T(0)) : shape(std::move(dims)) {
        data.assign(static_cast<std::size_t>(checked_numel(shape)), fill);
    }

    static TensorT from_data(std::vector<int> dims, std::vector<T> values) {
        TensorT t;
        t.shape = std::move(dims);
        if (checked_numel(t.shape) != static_cast<std::int64_t>(values.size())) {
            throw ShapeError("tensor: data length " + std::to_string(values.size()) +
                             " does not match shape " + shape_string(t.shape));
        }
        t.data = std::move(values);
        return t;
    }

    static std::int64_t checked_numel(const std::vector<int>& dims) {
        if (dims.empty()) throw ShapeError("tensor: shape must have at least one dimension");
        std::int64_t n = 1;
        for (int d : dims) {
            if (d <= 0) throw ShapeError("tensor: dimension " + std::to_string(d) + " is not positive");
            n *= d;
        }
        return n;
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    std::string shape_str() const { return shape_string(shape); }

    bool same_shape(const TensorT& other) const { return shape == other.shape; }

    // rank-3 (h,w,c) access
    T& at(int i, int j, int k) { return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k]; }
    T at(int i, int j, int k) const { return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k]; }

    // rank-2 (r,c) access
    T& at(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
    T at(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }

    // rank-1 access
    T& at(int i) { return data[static_cast<std::size_t>(i)]; }
    T at(int i) const { return data[static_cast<std::size_t>(i)]; }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

using Tensor = TensorT<float>;

template <typename T>
bool all_finite(const TensorT<T>& t) {
    for (T v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace spamlens
