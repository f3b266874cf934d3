#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "senet/gradcheck.hpp"

using namespace senet;

TEST_CASE("backward of sum gives all-ones gradient") {
    TapeD tape;
    auto x = tape.leaf(TensorD::from({2, 3}, {1, -2, 3, 4, 0.5, -1}));
    tape.backward(tape.sum(x));
    for (std::int64_t i = 0; i < 6; ++i) CHECK(tape.grad(x)[i] == 1.0);
}

TEST_CASE("single-weight mse gradient matches closed form") {
    // loss = mean over i of (w*x_i - y_i)^2, d/dw = 2/n * sum x_i (w x_i - y_i)
    const double w = 0.7;
    auto xs = TensorD::from({3}, {1.0, 2.0, 3.0});
    auto ys = TensorD::from({3}, {0.5, 1.0, 2.5});
    TapeD tape;
    auto wn = tape.leaf(TensorD::scalar(w));
    auto wx = tape.mul(tape.constant(xs), tape.reshape(tape.concat_cols({tape.reshape(wn, {1, 1}), tape.reshape(wn, {1, 1}), tape.reshape(wn, {1, 1})}), {3}));
    auto loss = tape.mse_mean(wx, tape.constant(ys));
    tape.backward(loss);
    double want = 0;
    for (int i = 0; i < 3; ++i) want += 2.0 / 3.0 * xs[i] * (w * xs[i] - ys[i]);
    CHECK(tape.grad(wn).value() == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("gradient accumulation is additive across backward passes") {
    TapeD tape;
    auto x = tape.leaf(TensorD::from({2}, {1.0, 2.0}));
    auto loss = tape.mse_mean(x, tape.constant(TensorD(Shape{2})));
    tape.backward(loss);
    const double g0 = tape.grad(x)[0], g1 = tape.grad(x)[1];
    tape.backward(loss);
    CHECK(tape.grad(x)[0] == 2.0 * g0);
    CHECK(tape.grad(x)[1] == 2.0 * g1);
    tape.zero_grad();
    tape.backward(loss);
    CHECK(tape.grad(x)[0] == g0);
    CHECK(tape.grad(x)[1] == g1);
}

TEST_CASE("backward rejects non-scalar roots") {
    TapeD tape;
    auto x = tape.leaf(TensorD(Shape{2, 2}));
    CHECK_THROWS_AS(tape.backward(x), ContractError);
}

TEST_CASE("finite_diff_check on known-correct and planted-wrong gradients") {
    // f = sum of squares; analytic gradient 2x exactly.
    auto f = [](const TensorD& x) {
        double s = 0;
        for (std::int64_t i = 0; i < x.numel(); ++i) s += double(x[i]) * double(x[i]);
        return s;
    };
    auto x = TensorD::from({2}, {1.0, 2.0});
    auto grad = TensorD::from({2}, {2.0, 4.0});
    CHECK(finite_diff_check<double>(f, grad, x, 1e-6) < 1e-8);

    // gradient deliberately scaled by two -> error about one half
    auto wrong = TensorD::from({2}, {4.0, 8.0});
    const double err = finite_diff_check<double>(f, wrong, x, 1e-6);
    CHECK(err > 0.4);
    CHECK(err < 0.6);
}

TEST_CASE("layer_norm composite passes a tight f64 finite-difference check") {
    Prng rng(31);
    auto x0 = detail::rand_tensor<double>(rng, {3, 6});
    auto gamma = detail::rand_tensor<double>(rng, {6}, 0.5, 1.5);
    auto beta = detail::rand_tensor<double>(rng, {6});
    auto value = [&](const TensorD& x) {
        TapeD t;
        return double(t.val(t.sum(t.layer_norm(t.leaf(x), t.constant(gamma), t.constant(beta)))).value());
    };
    TapeD t;
    auto xi = t.leaf(x0);
    t.backward(t.sum(t.layer_norm(xi, t.constant(gamma), t.constant(beta))));
    CHECK(finite_diff_check<double>(value, t.grad(xi), x0, 1e-5) < 1e-6);
}

TEST_CASE("every primitive passes central-difference checks in f64") {
    for (const auto& r : gradcheck_primitive_suite<double>(1001, 10)) {
        INFO(r.name);
        CHECK(r.max_rel_err < 1e-6);
    }
}

TEST_CASE("every primitive passes central-difference checks in f32") {
    for (const auto& r : gradcheck_primitive_suite<float>(2002, 3)) {
        INFO(r.name);
        CHECK(r.max_rel_err < 1e-3);
    }
}
