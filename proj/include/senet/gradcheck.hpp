#pragma once

#include <functional>
#include <string>
#include <vector>

#include "senet/autodiff.hpp"
#include "senet/rng.hpp"

namespace senet {

/// Central-difference check of an analytic gradient. `f` evaluates the
/// scalar objective at a point, `analytic` is the gradient at `x`. The
/// per-coordinate step is h * max(1, |x_j|). Returns the max over
/// coordinates of |analytic - central| / max(1, |analytic|, |central|),
/// so a gradient that is wrong by a factor of two reports roughly 0.5.
template <typename T>
double finite_diff_check(const std::function<double(const TensorT<T>&)>& f, const TensorT<T>& analytic,
                         TensorT<T> x, double h) {
    if (analytic.numel() != x.numel()) throw DimError("finite_diff_check gradient/point size mismatch");
    double worst = 0.0;
    for (std::int64_t j = 0; j < x.numel(); ++j) {
        const T orig = x[j];
        const double step = h * std::max(1.0, std::abs(double(orig)));
        x[j] = T(double(orig) + step);
        const double fp = f(x);
        x[j] = T(double(orig) - step);
        const double fm = f(x);
        x[j] = orig;
        const double central = (fp - fm) / (2.0 * step);
        const double a = double(analytic[j]);
        const double err = std::abs(a - central) / std::max({1.0, std::abs(a), std::abs(central)});
        worst = std::max(worst, err);
    }
    return worst;
}

struct PrimitiveCheck {
    std::string name;
    double max_rel_err = 0.0;
};

namespace detail {

template <typename T>
struct OpCase {
    std::string name;
    std::function<std::vector<TensorT<T>>(Prng&)> gen_inputs;
    std::function<typename Tape<T>::Ix(Tape<T>&, const std::vector<typename Tape<T>::Ix>&)> build;
};

template <typename T>
TensorT<T> rand_tensor(Prng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    TensorT<T> t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = T(rng.uniform(lo, hi));
    return t;
}

template <typename T>
std::vector<OpCase<T>> primitive_cases() {
    using Ix = typename Tape<T>::Ix;
    using Ixs = std::vector<Ix>;
    std::vector<OpCase<T>> cases;
    auto weighted = [](Tape<T>& t, Ix out, Ix weights) { return t.sum(t.mul(out, weights)); };

    cases.push_back({"add",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {3, 4}), rand_tensor<T>(r, {3, 4}),
                                                        rand_tensor<T>(r, {3, 4})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) { return weighted(t, t.add(in[0], in[1]), in[2]); }});
    cases.push_back({"sub",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {3, 4}), rand_tensor<T>(r, {3, 4}),
                                                        rand_tensor<T>(r, {3, 4})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) { return weighted(t, t.sub(in[0], in[1]), in[2]); }});
    cases.push_back({"mul",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {3, 4}), rand_tensor<T>(r, {3, 4}),
                                                        rand_tensor<T>(r, {3, 4})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) { return weighted(t, t.mul(in[0], in[1]), in[2]); }});
    cases.push_back({"div",
                     [](Prng& r) {
                         auto denom = rand_tensor<T>(r, {3, 4}, 0.5, 1.5);
                         for (std::int64_t i = 0; i < denom.numel(); ++i)
                             if (r.coin()) denom[i] = -denom[i];
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {3, 4}), denom, rand_tensor<T>(r, {3, 4})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) { return weighted(t, t.div(in[0], in[1]), in[2]); }});
    cases.push_back({"scale",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {2, 5}), rand_tensor<T>(r, {2, 5})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) { return weighted(t, t.scale(in[0], T(0.7)), in[1]); }});
    cases.push_back({"add_rowvec",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {4, 3}), rand_tensor<T>(r, {3}),
                                                        rand_tensor<T>(r, {4, 3})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) { return weighted(t, t.add_rowvec(in[0], in[1]), in[2]); }});
    cases.push_back({"matmul",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {3, 4}), rand_tensor<T>(r, {4, 5}),
                                                        rand_tensor<T>(r, {3, 5})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) { return weighted(t, t.matmul(in[0], in[1]), in[2]); }});
    cases.push_back({"matmul_nt",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {3, 4}), rand_tensor<T>(r, {5, 4}),
                                                        rand_tensor<T>(r, {3, 5})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) { return weighted(t, t.matmul_nt(in[0], in[1]), in[2]); }});
    // conv inputs kept at modest magnitude so the f32 difference quotient
    // stays above the rounding floor at h = 1e-3
    cases.push_back({"conv2d_3x3",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {2, 5, 5}, -0.5, 0.5),
                                                        rand_tensor<T>(r, {2, 2, 3, 3}, -0.5, 0.5),
                                                        rand_tensor<T>(r, {2}, -0.5, 0.5),
                                                        rand_tensor<T>(r, {2, 5, 5}, -0.5, 0.5)};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) {
                         return weighted(t, t.conv2d_3x3(in[0], in[1], in[2]), in[3]);
                     }});
    cases.push_back({"conv2d_3x3_batched",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {3, 2, 4, 4}, -0.5, 0.5),
                                                        rand_tensor<T>(r, {2, 2, 3, 3}, -0.5, 0.5),
                                                        rand_tensor<T>(r, {2}, -0.5, 0.5),
                                                        rand_tensor<T>(r, {3, 2, 4, 4}, -0.5, 0.5)};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) {
                         return weighted(t, t.conv2d_3x3(in[0], in[1], in[2]), in[3]);
                     }});
    cases.push_back({"conv1x1",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {3, 4, 4}), rand_tensor<T>(r, {2, 3}),
                                                        rand_tensor<T>(r, {2}), rand_tensor<T>(r, {2, 4, 4})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) { return weighted(t, t.conv1x1(in[0], in[1], in[2]), in[3]); }});
    cases.push_back({"layer_norm",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {4, 6}), rand_tensor<T>(r, {6}, 0.5, 1.5),
                                                        rand_tensor<T>(r, {6}), rand_tensor<T>(r, {4, 6})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) {
                         return weighted(t, t.layer_norm(in[0], in[1], in[2]), in[3]);
                     }});
    cases.push_back({"softmax_lastdim",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {3, 5}, -2.0, 2.0), rand_tensor<T>(r, {3, 5})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) { return weighted(t, t.softmax_lastdim(in[0]), in[1]); }});
    cases.push_back({"gelu",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {4, 4}, -2.0, 2.0), rand_tensor<T>(r, {4, 4})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) { return weighted(t, t.gelu(in[0]), in[1]); }});
    cases.push_back({"sigmoid",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {4, 4}, -3.0, 3.0), rand_tensor<T>(r, {4, 4})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) { return weighted(t, t.sigmoid(in[0]), in[1]); }});
    cases.push_back({"sum",
                     [](Prng& r) { return std::vector<TensorT<T>>{rand_tensor<T>(r, {3, 3})}; },
                     [](Tape<T>& t, const Ixs& in) { return t.sum(in[0]); }});
    cases.push_back({"mean",
                     [](Prng& r) { return std::vector<TensorT<T>>{rand_tensor<T>(r, {3, 3})}; },
                     [](Tape<T>& t, const Ixs& in) { return t.mean(in[0]); }});
    cases.push_back({"mse_mean",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {4, 4}), rand_tensor<T>(r, {4, 4})};
                     },
                     [](Tape<T>& t, const Ixs& in) { return t.mse_mean(in[0], in[1]); }});
    cases.push_back({"bce_map",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {4, 4}, 0.1, 0.9),
                                                        rand_tensor<T>(r, {4, 4}, 0.05, 0.95),
                                                        rand_tensor<T>(r, {4, 4}, 0.0, 1.0)};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) { return weighted(t, t.bce_map(in[0], in[1]), in[2]); }});
    cases.push_back({"reshape",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {3, 4}), rand_tensor<T>(r, {2, 6})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) { return weighted(t, t.reshape(in[0], {2, 6}), in[1]); }});
    cases.push_back({"gather_rows",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {5, 3}), rand_tensor<T>(r, {3, 3})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) {
                         return weighted(t, t.gather_rows(in[0], {4, 0, 2}), in[1]);
                     }});
    cases.push_back({"assemble_rows",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {3, 4}), rand_tensor<T>(r, {4}),
                                                        rand_tensor<T>(r, {5, 4})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) {
                         return weighted(t, t.assemble_rows(in[0], in[1], 5, {0, 2, 4}), in[2]);
                     }});
    cases.push_back({"slice_cols",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {4, 6}), rand_tensor<T>(r, {4, 3})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) { return weighted(t, t.slice_cols(in[0], 1, 4), in[1]); }});
    cases.push_back({"concat_cols",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {4, 2}), rand_tensor<T>(r, {4, 3}),
                                                        rand_tensor<T>(r, {4, 5})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) {
                         return weighted(t, t.concat_cols({in[0], in[1]}), in[2]);
                     }});
    cases.push_back({"patchify",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {3, 4, 4}), rand_tensor<T>(r, {4, 12})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) { return weighted(t, t.patchify(in[0], 2), in[1]); }});
    cases.push_back({"unpatchify",
                     [](Prng& r) {
                         return std::vector<TensorT<T>>{rand_tensor<T>(r, {4, 12}), rand_tensor<T>(r, {3, 4, 4})};
                     },
                     [weighted](Tape<T>& t, const Ixs& in) {
                         return weighted(t, t.unpatchify(in[0], 2, 3, 2, 2), in[1]);
                     }});
    return cases;
}

}  // namespace detail

/// Checks one op case: analytic gradients for every input leaf against
/// central differences on a rebuilt graph. Returns the max relative error.
template <typename T>
double gradcheck_case(const detail::OpCase<T>& c, Prng& rng, double h) {
    std::vector<TensorT<T>> inputs = c.gen_inputs(rng);
    // Analytic gradients, one backward pass.
    Tape<T> tape;
    std::vector<typename Tape<T>::Ix> ixs;
    ixs.reserve(inputs.size());
    for (auto& in : inputs) ixs.push_back(tape.leaf(in));
    tape.backward(c.build(tape, ixs));

    double worst = 0.0;
    for (std::size_t which = 0; which < inputs.size(); ++which) {
        auto value_at = [&](const TensorT<T>& x) {
            std::vector<TensorT<T>> probe = inputs;
            probe[which] = x;
            Tape<T> t2;
            std::vector<typename Tape<T>::Ix> jxs;
            for (auto& in : probe) jxs.push_back(t2.leaf(in));
            return double(t2.val(c.build(t2, jxs)).value());
        };
        worst = std::max(worst, finite_diff_check<T>(value_at, tape.grad(ixs[which]), inputs[which], h));
    }
    return worst;
}

/// Runs every primitive through `trials` random instances. h defaults to
/// 1e-5 for f64 and 1e-3 for f32 when passed 0.
template <typename T>
std::vector<PrimitiveCheck> gradcheck_primitive_suite(std::uint64_t seed, int trials = 10, double h = 0.0) {
    if (h == 0.0) h = std::is_same_v<T, double> ? 1e-5 : 1e-3;
    std::vector<PrimitiveCheck> results;
    Prng rng(seed);
    for (const auto& c : detail::primitive_cases<T>()) {
        double worst = 0.0;
        for (int i = 0; i < trials; ++i) worst = std::max(worst, gradcheck_case(c, rng, h));
        results.push_back({c.name, worst});
    }
    return results;
}

}  // namespace senet
