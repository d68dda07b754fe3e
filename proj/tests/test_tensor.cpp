#include <cmath>
#include <random>

#include "doctest.h"
#include "spamlens/kernels.hpp"
#include "spamlens/optimizer.hpp"
#include "spamlens/rng.hpp"
#include "spamlens/tensor.hpp"
#include "support/finite_diff.hpp"

using namespace spamlens;
using testsupport::DTensor;

namespace {

// Direct transliteration of the convolution definition; deliberately naive.
template <typename T>
TensorT<T> conv2d_reference(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& b) {
    const int h = in.dim(0), wd = in.dim(1), c = in.dim(2);
    const int kh = w.dim(0), kw = w.dim(1), f = w.dim(3);
    TensorT<T> out({h - kh + 1, wd - kw + 1, f});
    for (int i = 0; i < out.dim(0); ++i)
        for (int j = 0; j < out.dim(1); ++j)
            for (int ff = 0; ff < f; ++ff) {
                T acc = b.data[static_cast<std::size_t>(ff)];
                for (int a = 0; a < kh; ++a)
                    for (int bb = 0; bb < kw; ++bb)
                        for (int cc = 0; cc < c; ++cc)
                            acc += in.at(i + a, j + bb, cc) *
                                   w.data[((static_cast<std::size_t>(a) * kw + bb) * c + cc) * f + ff];
                out.at(i, j, ff) = acc;
            }
    return out;
}

template <typename T>
TensorT<T> dense_reference(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    const int in_f = w.dim(0), out_f = w.dim(1);
    TensorT<T> out({out_f});
    for (int j = 0; j < out_f; ++j) {
        T acc = b.data[static_cast<std::size_t>(j)];
        for (int i = 0; i < in_f; ++i) acc += x.data[static_cast<std::size_t>(i)] * w.at(i, j);
        out.data[static_cast<std::size_t>(j)] = acc;
    }
    return out;
}

template <typename T>
LayerParamsT<T> make_conv(int kh, int kw, int c, int f, std::mt19937& rng) {
    LayerParamsT<T> p;
    p.kind = LayerKind::conv2d;
    p.kernel_h = kh;
    p.kernel_w = kw;
    p.weights = TensorT<T>({kh, kw, c, f});
    p.bias = TensorT<T>({f});
    testsupport::fill_uniform(p.weights, rng, -0.5, 0.5);
    testsupport::fill_uniform(p.bias, rng, -0.5, 0.5);
    return p;
}

template <typename T>
LayerParamsT<T> make_dense(int in_f, int out_f, std::mt19937& rng) {
    LayerParamsT<T> p;
    p.kind = LayerKind::dense;
    p.units = out_f;
    p.weights = TensorT<T>({in_f, out_f});
    p.bias = TensorT<T>({out_f});
    testsupport::fill_uniform(p.weights, rng, -0.5, 0.5);
    testsupport::fill_uniform(p.bias, rng, -0.5, 0.5);
    return p;
}

}  // namespace

TEST_CASE("tensor shape invariants") {
    Tensor t({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.data.size() == 24);
    CHECK(t.shape_str() == "(2,3,4)");

    CHECK_THROWS_AS(Tensor(std::vector<int>{}), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 0, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor({-1}), ShapeError);
    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0f, 2.0f, 3.0f}), ShapeError);

    // row-major layout
    Tensor u = Tensor::from_data({2, 2, 2}, {0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(u.at(0, 0, 0) == 0);
    CHECK(u.at(0, 0, 1) == 1);
    CHECK(u.at(0, 1, 0) == 2);
    CHECK(u.at(1, 0, 0) == 4);
    CHECK(u.at(1, 1, 1) == 7);
}

TEST_CASE("conv2d forward shape follows input minus kernel plus one") {
    std::mt19937 rng(11);
    auto p = make_conv<float>(3, 3, 3, 32, rng);
    Tensor in({128, 128, 3});
    testsupport::fill_uniform(in, rng, 0.0, 1.0);
    Tensor out = conv2d_forward(in, p);
    CHECK(out.dim(0) == 126);
    CHECK(out.dim(1) == 126);
    CHECK(out.dim(2) == 32);
    CHECK(all_finite(out));
}

TEST_CASE("conv2d 1x1 identity filter reproduces the input") {
    std::mt19937 rng(12);
    LayerParams p;
    p.kind = LayerKind::conv2d;
    p.kernel_h = p.kernel_w = 1;
    p.weights = Tensor::from_data({1, 1, 1, 1}, {1.0f});
    p.bias = Tensor({1});
    Tensor in({5, 7, 1});
    testsupport::fill_uniform(in, rng, -1.0, 1.0);
    Tensor out = conv2d_forward(in, p);
    REQUIRE(out.same_shape(in));
    for (std::size_t i = 0; i < in.data.size(); ++i) CHECK(out.data[i] == in.data[i]);
}

TEST_CASE("conv2d forward matches the nested-loop reference") {
    std::mt19937 rng(13);
    for (int trial = 0; trial < 5; ++trial) {
        auto p = make_conv<float>(3, 3, 2, 3, rng);
        Tensor in({6, 6, 2});
        testsupport::fill_uniform(in, rng, 0.0, 1.0);
        Tensor fast = conv2d_forward(in, p);
        Tensor ref = conv2d_reference(in, p.weights, p.bias);
        REQUIRE(fast.same_shape(ref));
        for (std::size_t i = 0; i < ref.data.size(); ++i)
            CHECK(std::abs(fast.data[i] - ref.data[i]) < 1e-6f);
    }
}

TEST_CASE("conv2d shape errors name the offending dimension") {
    std::mt19937 rng(14);
    auto p = make_conv<float>(3, 3, 3, 4, rng);
    Tensor wrong_c({6, 6, 2});
    CHECK_THROWS_WITH_AS(conv2d_forward(wrong_c, p), doctest::Contains("channels"), ShapeError);
    Tensor too_small({2, 6, 3});
    CHECK_THROWS_WITH_AS(conv2d_forward(too_small, p), doctest::Contains("height"), ShapeError);
    Tensor in({6, 6, 3});
    testsupport::fill_uniform(in, rng, 0.0, 1.0);
    Tensor bad_up({4, 4, 9});
    CHECK_THROWS_AS(conv2d_backward(in, p, bad_up), ShapeError);
}

TEST_CASE("conv2d backward with zero upstream yields zero gradients") {
    std::mt19937 rng(15);
    auto p = make_conv<float>(3, 3, 2, 3, rng);
    Tensor in({6, 6, 2});
    testsupport::fill_uniform(in, rng, 0.0, 1.0);
    Tensor up({4, 4, 3});
    auto g = conv2d_backward(in, p, up);
    for (float v : g.input_grad.data) CHECK(v == 0.0f);
    for (float v : g.weight_grad.data) CHECK(v == 0.0f);
    for (float v : g.bias_grad.data) CHECK(v == 0.0f);
}

TEST_CASE("conv2d bias gradient sums the upstream gradient per filter") {
    std::mt19937 rng(16);
    auto p = make_conv<float>(3, 3, 1, 2, rng);
    Tensor in({6, 6, 1});
    testsupport::fill_uniform(in, rng, 0.0, 1.0);
    Tensor up({4, 4, 2}, 1.0f);
    auto g = conv2d_backward(in, p, up);
    REQUIRE(g.bias_grad.numel() == 2);
    CHECK(g.bias_grad.data[0] == doctest::Approx(16.0));
    CHECK(g.bias_grad.data[1] == doctest::Approx(16.0));
}

TEST_CASE("conv2d backward matches central finite differences") {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 4; ++trial) {
        auto p = make_conv<double>(3, 3, 1, 1, rng);
        DTensor in({5, 5, 1});
        testsupport::fill_uniform(in, rng, -1.0, 1.0);

        // scalar loss: fixed random projection of the conv output
        DTensor proj({3, 3, 1});
        testsupport::fill_uniform(proj, rng, -1.0, 1.0);
        auto loss_of_input = [&](const DTensor& x) {
            DTensor out = conv2d_forward(x, p);
            double s = 0;
            for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * proj.data[i];
            return s;
        };
        auto loss_of_weights = [&](const DTensor& w) {
            auto q = p;
            q.weights = w;
            DTensor out = conv2d_forward(in, q);
            double s = 0;
            for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * proj.data[i];
            return s;
        };
        auto loss_of_bias = [&](const DTensor& b) {
            auto q = p;
            q.bias = b;
            DTensor out = conv2d_forward(in, q);
            double s = 0;
            for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * proj.data[i];
            return s;
        };

        auto g = conv2d_backward(in, p, proj);
        CHECK(testsupport::max_rel_err(g.input_grad, testsupport::numeric_gradient(loss_of_input, in)) < 1e-5);
        CHECK(testsupport::max_rel_err(g.weight_grad, testsupport::numeric_gradient(loss_of_weights, p.weights)) <
              1e-5);
        CHECK(testsupport::max_rel_err(g.bias_grad, testsupport::numeric_gradient(loss_of_bias, p.bias)) < 1e-5);
    }
}

TEST_CASE("maxpool forward picks window maxima and records argmax") {
    Tensor in = Tensor::from_data({2, 2, 1}, {1, 2, 3, 4});
    auto r = maxpool2d_forward(in, 2);
    CHECK(r.output.numel() == 1);
    CHECK(r.output.data[0] == 4.0f);
    CHECK(r.argmax[0] == 3);
}

TEST_CASE("maxpool drops trailing rows and columns that do not fill a window") {
    Tensor a({126, 126, 1});
    auto ra = maxpool2d_forward(a, 2);
    CHECK(ra.output.dim(0) == 63);
    CHECK(ra.output.dim(1) == 63);

    std::mt19937 rng(18);
    Tensor b({61, 61, 2});
    testsupport::fill_uniform(b, rng, 0.0, 1.0);
    auto rb = maxpool2d_forward(b, 2);
    CHECK(rb.output.dim(0) == 30);
    CHECK(rb.output.dim(1) == 30);
    CHECK(rb.output.dim(2) == 2);
    // the 61st row/column never contributes
    for (std::int32_t idx : rb.argmax) {
        const int flat = static_cast<int>(idx);
        const int row = flat / (61 * 2);
        const int col = (flat / 2) % 61;
        CHECK(row < 60);
        CHECK(col < 60);
    }
}

TEST_CASE("maxpool tie goes to the first index in row-major order") {
    Tensor in = Tensor::from_data({2, 2, 1}, {7, 7, 7, 7});
    auto r = maxpool2d_forward(in, 2);
    CHECK(r.argmax[0] == 0);
    Tensor up({1, 1, 1}, 1.0f);
    Tensor g = maxpool2d_backward(r.argmax, up, {2, 2, 1}, 2);
    CHECK(g.data[0] == 1.0f);
    CHECK(g.data[1] == 0.0f);
    CHECK(g.data[2] == 0.0f);
    CHECK(g.data[3] == 0.0f);
}

TEST_CASE("maxpool backward routes the gradient to the winning position only") {
    Tensor in = Tensor::from_data({2, 2, 1}, {1, 2, 3, 4});
    auto r = maxpool2d_forward(in, 2);
    Tensor up({1, 1, 1}, 1.0f);
    Tensor g = maxpool2d_backward(r.argmax, up, {2, 2, 1}, 2);
    CHECK(g.data[0] == 0.0f);
    CHECK(g.data[1] == 0.0f);
    CHECK(g.data[2] == 0.0f);
    CHECK(g.data[3] == 1.0f);
}

TEST_CASE("maxpool backward conserves the upstream gradient mass") {
    std::mt19937 rng(19);
    Tensor in({9, 9, 3});
    testsupport::fill_uniform(in, rng, -1.0, 1.0);
    auto r = maxpool2d_forward(in, 2);
    Tensor up(r.output.shape);
    testsupport::fill_uniform(up, rng, -1.0, 1.0);
    Tensor g = maxpool2d_backward(r.argmax, up, in.shape, 2);
    double up_sum = 0, g_sum = 0;
    for (float v : up.data) up_sum += v;
    for (float v : g.data) g_sum += v;
    CHECK(g_sum == doctest::Approx(up_sum).epsilon(1e-5));
}

TEST_CASE("maxpool backward rejects stale indices") {
    Tensor in = Tensor::from_data({2, 2, 1}, {1, 2, 3, 4});
    auto r = maxpool2d_forward(in, 2);
    Tensor up({1, 1, 1}, 1.0f);
    CHECK_THROWS_AS(maxpool2d_backward(r.argmax, up, {4, 4, 1}, 2), ShapeError);
    std::vector<std::int32_t> bogus = {99};
    CHECK_THROWS_AS(maxpool2d_backward(bogus, up, {2, 2, 1}, 2), ShapeError);
}

TEST_CASE("maxpool backward matches finite differences away from ties") {
    std::mt19937 rng(20);
    DTensor in({8, 8, 1});
    do {
        testsupport::fill_uniform(in, rng, 0.0, 1.0);
    } while (!testsupport::pool_windows_well_separated(in, 2, 1e-2));

    DTensor proj({4, 4, 1});
    testsupport::fill_uniform(proj, rng, -1.0, 1.0);
    auto loss = [&](const DTensor& x) {
        auto r = maxpool2d_forward(x, 2);
        double s = 0;
        for (std::size_t i = 0; i < r.output.data.size(); ++i) s += r.output.data[i] * proj.data[i];
        return s;
    };
    auto r = maxpool2d_forward(in, 2);
    DTensor analytic = maxpool2d_backward(r.argmax, proj, in.shape, 2);
    CHECK(testsupport::max_rel_err(analytic, testsupport::numeric_gradient(loss, in)) < 1e-5);
}

TEST_CASE("dense forward matches the nested-loop reference") {
    std::mt19937 rng(21);
    auto p = make_dense<float>(10, 4, rng);
    Tensor x({10});
    testsupport::fill_uniform(x, rng, -1.0, 1.0);
    Tensor fast = dense_forward(x, p);
    Tensor ref = dense_reference(x, p.weights, p.bias);
    REQUIRE(fast.same_shape(ref));
    for (std::size_t i = 0; i < ref.data.size(); ++i) CHECK(std::abs(fast.data[i] - ref.data[i]) < 1e-6f);
}

TEST_CASE("dense identity weights reproduce the input") {
    LayerParams p;
    p.kind = LayerKind::dense;
    p.units = 3;
    p.weights = Tensor({3, 3});
    for (int i = 0; i < 3; ++i) p.weights.at(i, i) = 1.0f;
    p.bias = Tensor({3});
    Tensor x = Tensor::from_data({3}, {0.5f, -1.5f, 2.0f});
    Tensor out = dense_forward(x, p);
    for (int i = 0; i < 3; ++i) CHECK(out.data[static_cast<std::size_t>(i)] == x.data[static_cast<std::size_t>(i)]);
}

TEST_CASE("dense layer parameter count") {
    LayerParams p;
    p.kind = LayerKind::dense;
    p.units = 512;
    p.weights = Tensor({3200, 512});
    p.bias = Tensor({512});
    CHECK(p.param_count() == 1638912);
}

TEST_CASE("dense backward: bias gradient equals upstream exactly, zero upstream zeroes all") {
    std::mt19937 rng(22);
    auto p = make_dense<float>(6, 3, rng);
    Tensor x({6});
    testsupport::fill_uniform(x, rng, -1.0, 1.0);

    Tensor zero_up({3});
    auto gz = dense_backward(x, p, zero_up);
    for (float v : gz.input_grad.data) CHECK(v == 0.0f);
    for (float v : gz.weight_grad.data) CHECK(v == 0.0f);

    Tensor up({3});
    testsupport::fill_uniform(up, rng, -1.0, 1.0);
    auto g = dense_backward(x, p, up);
    for (std::size_t i = 0; i < up.data.size(); ++i) CHECK(g.bias_grad.data[i] == up.data[i]);
}

TEST_CASE("dense backward matches central finite differences") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 4; ++trial) {
        auto p = make_dense<double>(7, 4, rng);
        DTensor x({7});
        testsupport::fill_uniform(x, rng, -1.0, 1.0);
        DTensor proj({4});
        testsupport::fill_uniform(proj, rng, -1.0, 1.0);

        auto loss_of_input = [&](const DTensor& v) {
            DTensor out = dense_forward(v, p);
            double s = 0;
            for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * proj.data[i];
            return s;
        };
        auto loss_of_weights = [&](const DTensor& w) {
            auto q = p;
            q.weights = w;
            DTensor out = dense_forward(x, q);
            double s = 0;
            for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * proj.data[i];
            return s;
        };

        auto g = dense_backward(x, p, proj);
        CHECK(testsupport::max_rel_err(g.input_grad, testsupport::numeric_gradient(loss_of_input, x)) < 1e-5);
        CHECK(testsupport::max_rel_err(g.weight_grad, testsupport::numeric_gradient(loss_of_weights, p.weights)) <
              1e-5);
    }
}

TEST_CASE("relu clamps negatives and defines the zero-point gradient as zero") {
    Tensor x = Tensor::from_data({3}, {-1.0f, 0.0f, 2.5f});
    Tensor y = relu(x);
    CHECK(y.data[0] == 0.0f);
    CHECK(y.data[1] == 0.0f);
    CHECK(y.data[2] == 2.5f);

    Tensor up({3}, 1.0f);
    Tensor g = relu_backward(x, up);
    CHECK(g.data[0] == 0.0f);
    CHECK(g.data[1] == 0.0f);  // subgradient convention at exactly 0
    CHECK(g.data[2] == 1.0f);
}

TEST_CASE("sigmoid is stable, bounded, and has derivative 1/4 at zero") {
    CHECK(sigmoid(0.0) == doctest::Approx(0.5));
    CHECK(sigmoid(0.0f) == doctest::Approx(0.5f));

    const double lo = sigmoid(-1000.0);
    CHECK(std::isfinite(lo));
    CHECK(lo > 0.0);
    const double hi = sigmoid(1000.0);
    CHECK(std::isfinite(hi));
    CHECK(hi < 1.0);

    CHECK(sigmoid_backward(0.0, 1.0) == doctest::Approx(0.25));

    // strictly inside (0,1) across a wide sweep of finite inputs
    for (double x = -750.0; x <= 750.0; x += 37.3) {
        const double s = sigmoid(x);
        CHECK(s > 0.0);
        CHECK(s < 1.0);
    }
}

TEST_CASE("bce loss values and clamping") {
    auto r1 = bce_loss(1.0, 1);
    CHECK(r1.loss >= 0.0);
    CHECK(r1.loss < 1e-6);  // clamp keeps -log(1-eps) tiny, not zero

    auto r2 = bce_loss(0.5, 1);
    CHECK(r2.loss == doctest::Approx(std::log(2.0)));

    CHECK_THROWS_AS(bce_loss(0.5, 2), std::invalid_argument);
}

TEST_CASE("bce gradient matches finite differences inside the clamp") {
    const double p = 0.3;
    const double h = 1e-7;
    const double numeric = (bce_loss(p + h, 0).loss - bce_loss(p - h, 0).loss) / (2 * h);
    const double analytic = bce_loss(p, 0).dloss_dp;
    CHECK(testsupport::rel_err(analytic, numeric) < 1e-6);

    // outside the clamp the loss is flat, so the gradient is defined as zero
    CHECK(bce_loss(1.0, 1).dloss_dp == 0.0);
    CHECK(bce_loss(0.0, 0).dloss_dp == 0.0);
}

TEST_CASE("rmsprop zero gradient leaves parameters unchanged and decays the accumulator") {
    RmsPropConfig cfg;
    Tensor theta = Tensor::from_data({2}, {1.0f, -2.0f});
    Tensor g({2});
    OptimizerState st({2});
    st.sq_avg.data = {4.0f, 9.0f};
    Tensor before = theta;
    rmsprop_step(theta, g, st, cfg);
    CHECK(theta.data[0] == before.data[0]);
    CHECK(theta.data[1] == before.data[1]);
    CHECK(st.sq_avg.data[0] == doctest::Approx(3.6f));
    CHECK(st.sq_avg.data[1] == doctest::Approx(8.1f));
}

TEST_CASE("rmsprop first step reproduces the hand-computed update") {
    RmsPropConfig cfg;  // lr=1e-4, rho=0.9, eps=1e-8
    Tensor theta({1});
    Tensor g({1}, 1.0f);
    OptimizerState st({1});
    rmsprop_step(theta, g, st, cfg);
    CHECK(st.sq_avg.data[0] == doctest::Approx(0.1f));
    // -lr / (sqrt(0.1) + eps) = -3.16227e-4
    CHECK(theta.data[0] == doctest::Approx(-3.1623e-4).epsilon(1e-4));
}

TEST_CASE("rmsprop replay from identical state is bit-identical") {
    std::mt19937 rng(24);
    Tensor theta({16});
    Tensor g({16});
    testsupport::fill_uniform(theta, rng, -1.0, 1.0);
    testsupport::fill_uniform(g, rng, -1.0, 1.0);
    OptimizerState st({16});
    testsupport::fill_uniform(st.sq_avg, rng, 0.0, 1.0);

    Tensor t1 = theta, t2 = theta;
    OptimizerState s1 = st, s2 = st;
    RmsPropConfig cfg;
    rmsprop_step(t1, g, s1, cfg);
    rmsprop_step(t2, g, s2, cfg);
    CHECK(t1.data == t2.data);
    CHECK(s1.sq_avg.data == s2.sq_avg.data);
}

TEST_CASE("rmsprop rejects mismatched shapes") {
    RmsPropConfig cfg;
    Tensor theta({2});
    Tensor g({3});
    OptimizerState st({2});
    CHECK_THROWS_AS(rmsprop_step(theta, g, st, cfg), ShapeError);
}

TEST_CASE("kernels are pure: identical inputs give bit-identical outputs") {
    std::mt19937 rng(25);
    auto p = make_conv<float>(3, 3, 2, 4, rng);
    Tensor in({7, 7, 2});
    testsupport::fill_uniform(in, rng, -1.0, 1.0);
    Tensor a = conv2d_forward(in, p);
    Tensor b = conv2d_forward(in, p);
    CHECK(a.data == b.data);

    auto g1 = conv2d_backward(in, p, a);
    auto g2 = conv2d_backward(in, p, a);
    CHECK(g1.input_grad.data == g2.input_grad.data);
    CHECK(g1.weight_grad.data == g2.weight_grad.data);
}

TEST_CASE("portable rng helpers are stable and in range") {
    std::mt19937 a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        const float f = uniform_float(a);
        CHECK(f >= 0.0f);
        CHECK(f < 1.0f);
        CHECK(f == uniform_float(b));
    }
    std::mt19937 c(7);
    for (int i = 0; i < 1000; ++i) {
        const std::uint32_t k = uniform_index(c, 17);
        CHECK(k < 17);
    }
    std::vector<int> v1 = {1, 2, 3, 4, 5, 6, 7, 8};
    auto v2 = v1;
    std::mt19937 r1(9), r2(9);
    fisher_yates_shuffle(v1, r1);
    fisher_yates_shuffle(v2, r2);
    CHECK(v1 == v2);
    std::sort(v1.begin(), v1.end());
    CHECK(v1 == std::vector<int>({1, 2, 3, 4, 5, 6, 7, 8}));
}
