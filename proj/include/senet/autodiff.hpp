#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include "senet/tensor.hpp"

namespace senet {

/// Define-by-run reverse-mode tape. Every op appends one node holding the
/// result value, a same-shaped gradient accumulator and a backward closure.
/// The tape is rebuilt each forward pass; node creation order is a
/// topological order, so backward() is a reverse sweep over the ancestors
/// of the root. All reductions run in row-major order, which keeps results
/// bit-reproducible across runs.
///
/// Gradient accumulation is additive: calling backward() twice without
/// zero_grad() doubles every gradient.
template <typename T>
class Tape {
public:
    using Ix = std::int32_t;

    struct Node {
        TensorT<T> value;
        TensorT<T> grad;
        std::vector<Ix> parents;
        std::function<void(Tape&, Ix)> backward;
    };

    Ix leaf(TensorT<T> v) {
        Node n;
        n.grad = TensorT<T>(v.shape().empty() ? Shape{} : v.shape());
        if (v.shape().empty()) n.grad = TensorT<T>::scalar(T(0));
        n.value = std::move(v);
        nodes_.push_back(std::move(n));
        return static_cast<Ix>(nodes_.size() - 1);
    }

    Ix constant(TensorT<T> v) { return leaf(std::move(v)); }
    Ix scalar_const(T v) { return leaf(TensorT<T>::scalar(v)); }

    const TensorT<T>& val(Ix i) const { return nodes_[std::size_t(i)].value; }
    const TensorT<T>& grad(Ix i) const { return nodes_[std::size_t(i)].grad; }
    TensorT<T>& grad_mut(Ix i) { return nodes_[std::size_t(i)].grad; }
    std::size_t size() const { return nodes_.size(); }

    void zero_grad() {
        for (auto& n : nodes_) n.grad.fill(T(0));
    }

    /// Reverse sweep from a scalar root. Each call computes d(root)/d(node)
    /// for every reachable node and adds it to the node's gradient, so two
    /// sweeps without zero_grad() double every gradient. Sweep order is the
    /// reverse creation order, which is deterministic.
    void backward(Ix root) {
        if (val(root).numel() != 1) throw ContractError("backward root must be a scalar");
        std::vector<char> reach(nodes_.size(), 0);
        std::vector<Ix> stack{root};
        reach[std::size_t(root)] = 1;
        while (!stack.empty()) {
            const Ix i = stack.back();
            stack.pop_back();
            for (Ix p : nodes_[std::size_t(i)].parents)
                if (!reach[std::size_t(p)]) {
                    reach[std::size_t(p)] = 1;
                    stack.push_back(p);
                }
        }
        // Stash previously accumulated gradients of the reachable subgraph so
        // this sweep starts from zero and composes additively with them.
        std::vector<TensorT<T>> stash(nodes_.size());
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (reach[i]) {
                stash[i] = std::move(nodes_[i].grad);
                nodes_[i].grad = stash[i].shape().empty() ? TensorT<T>::scalar(T(0)) : TensorT<T>(stash[i].shape());
            }
        nodes_[std::size_t(root)].grad[0] = T(1);
        for (Ix i = root; i >= 0; --i)
            if (reach[std::size_t(i)] && nodes_[std::size_t(i)].backward) nodes_[std::size_t(i)].backward(*this, i);
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (reach[i])
                for (std::int64_t j = 0; j < nodes_[i].grad.numel(); ++j) nodes_[i].grad[j] += stash[i][j];
    }

    // ---- elementwise ----

    Ix add(Ix a, Ix b) {
        check_same_shape(val(a), val(b), "add");
        TensorT<T> out(val(a).shape());
        const auto n = out.numel();
        for (std::int64_t i = 0; i < n; ++i) out[i] = val(a)[i] + val(b)[i];
        return make(std::move(out), {a, b}, [a, b](Tape& t, Ix self) {
            const auto& g = t.grad(self);
            for (std::int64_t i = 0; i < g.numel(); ++i) {
                t.grad_mut(a)[i] += g[i];
                t.grad_mut(b)[i] += g[i];
            }
        });
    }

    Ix sub(Ix a, Ix b) {
        check_same_shape(val(a), val(b), "sub");
        TensorT<T> out(val(a).shape());
        for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = val(a)[i] - val(b)[i];
        return make(std::move(out), {a, b}, [a, b](Tape& t, Ix self) {
            const auto& g = t.grad(self);
            for (std::int64_t i = 0; i < g.numel(); ++i) {
                t.grad_mut(a)[i] += g[i];
                t.grad_mut(b)[i] -= g[i];
            }
        });
    }

    Ix mul(Ix a, Ix b) {
        check_same_shape(val(a), val(b), "mul");
        TensorT<T> out(val(a).shape());
        for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = val(a)[i] * val(b)[i];
        return make(std::move(out), {a, b}, [a, b](Tape& t, Ix self) {
            const auto& g = t.grad(self);
            for (std::int64_t i = 0; i < g.numel(); ++i) {
                t.grad_mut(a)[i] += g[i] * t.val(b)[i];
                t.grad_mut(b)[i] += g[i] * t.val(a)[i];
            }
        });
    }

    Ix div(Ix a, Ix b) {
        check_same_shape(val(a), val(b), "div");
        TensorT<T> out(val(a).shape());
        for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = val(a)[i] / val(b)[i];
        return make(std::move(out), {a, b}, [a, b](Tape& t, Ix self) {
            const auto& g = t.grad(self);
            for (std::int64_t i = 0; i < g.numel(); ++i) {
                const T bv = t.val(b)[i];
                t.grad_mut(a)[i] += g[i] / bv;
                t.grad_mut(b)[i] -= g[i] * t.val(a)[i] / (bv * bv);
            }
        });
    }

    Ix scale(Ix a, T c) {
        TensorT<T> out(val(a).shape());
        for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = val(a)[i] * c;
        return make(std::move(out), {a}, [a, c](Tape& t, Ix self) {
            const auto& g = t.grad(self);
            for (std::int64_t i = 0; i < g.numel(); ++i) t.grad_mut(a)[i] += g[i] * c;
        });
    }

    /// x[N,D] + v[D] broadcast over rows.
    Ix add_rowvec(Ix x, Ix v) {
        if (val(x).rank() < 1 || val(v).rank() != 1) throw DimError("add_rowvec expects x[...,D], v[D]");
        const std::int64_t d = val(v).dim(0);
        if (val(x).dim(std::size_t(val(x).rank() - 1)) != d) throw DimError("add_rowvec last-dim mismatch");
        TensorT<T> out(val(x).shape());
        const std::int64_t rows = out.numel() / d;
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t j = 0; j < d; ++j) out[r * d + j] = val(x)[r * d + j] + val(v)[j];
        return make(std::move(out), {x, v}, [x, v, rows, d](Tape& t, Ix self) {
            const auto& g = t.grad(self);
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t j = 0; j < d; ++j) {
                    t.grad_mut(x)[r * d + j] += g[r * d + j];
                    t.grad_mut(v)[j] += g[r * d + j];
                }
        });
    }

    Ix gelu(Ix a) {
        TensorT<T> out(val(a).shape());
        for (std::int64_t i = 0; i < out.numel(); ++i) {
            const double x = double(val(a)[i]);
            out[i] = T(0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)));
        }
        return make(std::move(out), {a}, [a](Tape& t, Ix self) {
            const auto& g = t.grad(self);
            for (std::int64_t i = 0; i < g.numel(); ++i) {
                const double x = double(t.val(a)[i]);
                const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
                const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
                t.grad_mut(a)[i] += g[i] * T(cdf + x * pdf);
            }
        });
    }

    Ix sigmoid(Ix a) {
        TensorT<T> out(val(a).shape());
        for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = sigmoid_scalar(val(a)[i]);
        return make(std::move(out), {a}, [a](Tape& t, Ix self) {
            const auto& g = t.grad(self);
            const auto& y = t.val(self);
            for (std::int64_t i = 0; i < g.numel(); ++i) t.grad_mut(a)[i] += g[i] * y[i] * (T(1) - y[i]);
        });
    }

    // ---- matrix products ----

    Ix matmul(Ix a, Ix b) {
        if (val(a).rank() != 2 || val(b).rank() != 2 || val(a).dim(1) != val(b).dim(0))
            throw DimError("matmul " + shape_str(val(a).shape()) + " x " + shape_str(val(b).shape()));
        const std::int64_t m = val(a).dim(0), k = val(a).dim(1), n = val(b).dim(1);
        TensorT<T> out(Shape{m, n});
        mm_acc(out.data(), val(a).data(), val(b).data(), m, k, n);
        return make(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, Ix self) {
            const T* g = t.grad(self).data();
            // dA += G * B^T ; dB += A^T * G
            T* da = t.grad_mut(a).data();
            const T* bv = t.val(b).data();
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t kk = 0; kk < k; ++kk) {
                    T acc = 0;
                    for (std::int64_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[kk * n + j];
                    da[i * k + kk] += acc;
                }
            T* db = t.grad_mut(b).data();
            const T* av = t.val(a).data();
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t kk = 0; kk < k; ++kk) {
                    const T aik = av[i * k + kk];
                    for (std::int64_t j = 0; j < n; ++j) db[kk * n + j] += aik * g[i * n + j];
                }
        });
    }

    /// a[m,k] * b[n,k]^T -> [m,n]
    Ix matmul_nt(Ix a, Ix b) {
        if (val(a).rank() != 2 || val(b).rank() != 2 || val(a).dim(1) != val(b).dim(1))
            throw DimError("matmul_nt " + shape_str(val(a).shape()) + " x " + shape_str(val(b).shape()));
        const std::int64_t m = val(a).dim(0), k = val(a).dim(1), n = val(b).dim(0);
        TensorT<T> out(Shape{m, n});
        const T* av = val(a).data();
        const T* bv = val(b).data();
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < n; ++j) {
                T acc = 0;
                for (std::int64_t kk = 0; kk < k; ++kk) acc += av[i * k + kk] * bv[j * k + kk];
                out[i * n + j] = acc;
            }
        return make(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, Ix self) {
            const T* g = t.grad(self).data();
            T* da = t.grad_mut(a).data();
            const T* bv = t.val(b).data();
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < n; ++j) {
                    const T gij = g[i * n + j];
                    for (std::int64_t kk = 0; kk < k; ++kk) da[i * k + kk] += gij * bv[j * k + kk];
                }
            T* db = t.grad_mut(b).data();
            const T* av = t.val(a).data();
            for (std::int64_t j = 0; j < n; ++j)
                for (std::int64_t i = 0; i < m; ++i) {
                    const T gij = g[i * n + j];
                    for (std::int64_t kk = 0; kk < k; ++kk) db[j * k + kk] += gij * av[i * k + kk];
                }
        });
    }

    Ix linear(Ix x, Ix w, Ix b) { return add_rowvec(matmul(x, w), b); }

    // ---- convolutions ----

    /// 3x3 same-padding convolution. x is [ci,h,w] or [batch,ci,h,w],
    /// kernel [co,ci,3,3], bias [co]. Accumulation order (ci, ky, kx)
    /// ascending, matching the naive sliding-window formulation.
    Ix conv2d_3x3(Ix x, Ix kernel, Ix bias) {
        const auto& xs = val(x).shape();
        if (xs.size() != 3 && xs.size() != 4) throw DimError("conv2d_3x3 input rank");
        const bool batched = xs.size() == 4;
        const std::int64_t nb = batched ? xs[0] : 1;
        const std::int64_t ci = xs[batched ? 1 : 0], h = xs[batched ? 2 : 1], w = xs[batched ? 3 : 2];
        const auto& ks = val(kernel).shape();
        if (ks.size() != 4 || ks[2] != 3 || ks[3] != 3) throw DimError("conv2d_3x3 kernel must be [co,ci,3,3]");
        if (ks[1] != ci) throw DimError("conv2d_3x3 channel mismatch");
        const std::int64_t co = ks[0];
        if (val(bias).rank() != 1 || val(bias).dim(0) != co) throw DimError("conv2d_3x3 bias");
        if (h < 1 || w < 1) throw DimError("conv2d_3x3 empty spatial extents");

        Shape os = xs;
        os[batched ? 1 : 0] = co;
        TensorT<T> out(os);
        const T* in = val(x).data();
        const T* kd = val(kernel).data();
        const T* bd = val(bias).data();
        for (std::int64_t b = 0; b < nb; ++b)
            for (std::int64_t o = 0; o < co; ++o)
                for (std::int64_t y = 0; y < h; ++y)
                    for (std::int64_t xx = 0; xx < w; ++xx) {
                        T acc = bd[o];
                        for (std::int64_t i = 0; i < ci; ++i)
                            for (std::int64_t ky = 0; ky < 3; ++ky) {
                                const std::int64_t yy = y + ky - 1;
                                if (yy < 0 || yy >= h) continue;
                                for (std::int64_t kx = 0; kx < 3; ++kx) {
                                    const std::int64_t xc = xx + kx - 1;
                                    if (xc < 0 || xc >= w) continue;
                                    acc += kd[((o * ci + i) * 3 + ky) * 3 + kx] * in[((b * ci + i) * h + yy) * w + xc];
                                }
                            }
                        out[((b * co + o) * h + y) * w + xx] = acc;
                    }
        return make(std::move(out), {x, kernel, bias}, [x, kernel, bias, nb, ci, co, h, w](Tape& t, Ix self) {
            const T* g = t.grad(self).data();
            const T* in = t.val(x).data();
            const T* kd = t.val(kernel).data();
            T* dx = t.grad_mut(x).data();
            T* dk = t.grad_mut(kernel).data();
            T* db = t.grad_mut(bias).data();
            for (std::int64_t b = 0; b < nb; ++b)
                for (std::int64_t o = 0; o < co; ++o)
                    for (std::int64_t y = 0; y < h; ++y)
                        for (std::int64_t xx = 0; xx < w; ++xx) {
                            const T gv = g[((b * co + o) * h + y) * w + xx];
                            db[o] += gv;
                            for (std::int64_t i = 0; i < ci; ++i)
                                for (std::int64_t ky = 0; ky < 3; ++ky) {
                                    const std::int64_t yy = y + ky - 1;
                                    if (yy < 0 || yy >= h) continue;
                                    for (std::int64_t kx = 0; kx < 3; ++kx) {
                                        const std::int64_t xc = xx + kx - 1;
                                        if (xc < 0 || xc >= w) continue;
                                        dk[((o * ci + i) * 3 + ky) * 3 + kx] += gv * in[((b * ci + i) * h + yy) * w + xc];
                                        dx[((b * ci + i) * h + yy) * w + xc] += gv * kd[((o * ci + i) * 3 + ky) * 3 + kx];
                                    }
                                }
                        }
        });
    }

    /// 1x1 convolution: x[ci,h,w], kernel [co,ci], bias [co] -> [co,h,w].
    Ix conv1x1(Ix x, Ix kernel, Ix bias) {
        if (val(x).rank() != 3) throw DimError("conv1x1 input must be [ci,h,w]");
        const std::int64_t ci = val(x).dim(0), h = val(x).dim(1), w = val(x).dim(2);
        if (val(kernel).rank() != 2 || val(kernel).dim(1) != ci) throw DimError("conv1x1 kernel");
        const std::int64_t co = val(kernel).dim(0);
        if (val(bias).rank() != 1 || val(bias).dim(0) != co) throw DimError("conv1x1 bias");
        TensorT<T> out(Shape{co, h, w});
        for (std::int64_t o = 0; o < co; ++o)
            for (std::int64_t yx = 0; yx < h * w; ++yx) {
                T acc = val(bias)[o];
                for (std::int64_t i = 0; i < ci; ++i) acc += val(kernel)[o * ci + i] * val(x)[i * h * w + yx];
                out[o * h * w + yx] = acc;
            }
        return make(std::move(out), {x, kernel, bias}, [x, kernel, bias, ci, co, h, w](Tape& t, Ix self) {
            const T* g = t.grad(self).data();
            for (std::int64_t o = 0; o < co; ++o)
                for (std::int64_t yx = 0; yx < h * w; ++yx) {
                    const T gv = g[o * h * w + yx];
                    t.grad_mut(bias)[o] += gv;
                    for (std::int64_t i = 0; i < ci; ++i) {
                        t.grad_mut(kernel)[o * ci + i] += gv * t.val(x)[i * h * w + yx];
                        t.grad_mut(x)[i * h * w + yx] += gv * t.val(kernel)[o * ci + i];
                    }
                }
        });
    }

    // ---- normalization / attention pieces ----

    Ix layer_norm(Ix x, Ix gamma, Ix beta, T eps = T(1e-6)) {
        if (val(x).rank() < 1) throw DimError("layer_norm rank-0 input");
        const std::int64_t d = val(x).dim(std::size_t(val(x).rank() - 1));
        if (d == 0) throw DimError("layer_norm zero-width last axis");
        if (val(gamma).numel() != d || val(beta).numel() != d) throw DimError("layer_norm affine params");
        const std::int64_t rows = val(x).numel() / d;
        TensorT<T> out(val(x).shape());
        std::vector<T> mu(static_cast<std::size_t>(rows));
        std::vector<T> inv(static_cast<std::size_t>(rows));
        for (std::int64_t r = 0; r < rows; ++r) {
            T m = 0;
            for (std::int64_t j = 0; j < d; ++j) m += val(x)[r * d + j];
            m /= T(d);
            T var = 0;
            for (std::int64_t j = 0; j < d; ++j) {
                const T c = val(x)[r * d + j] - m;
                var += c * c;
            }
            var /= T(d);
            const T iv = T(1) / std::sqrt(var + eps);
            mu[std::size_t(r)] = m;
            inv[std::size_t(r)] = iv;
            for (std::int64_t j = 0; j < d; ++j)
                out[r * d + j] = (val(x)[r * d + j] - m) * iv * val(gamma)[j] + val(beta)[j];
        }
        return make(std::move(out), {x, gamma, beta},
                    [x, gamma, beta, rows, d, mu = std::move(mu), inv = std::move(inv)](Tape& t, Ix self) {
                        const auto& g = t.grad(self);
                        for (std::int64_t r = 0; r < rows; ++r) {
                            const T m = mu[std::size_t(r)], iv = inv[std::size_t(r)];
                            T sum1 = 0, sum2 = 0;
                            for (std::int64_t j = 0; j < d; ++j) {
                                const T xhat = (t.val(x)[r * d + j] - m) * iv;
                                const T dxhat = g[r * d + j] * t.val(gamma)[j];
                                sum1 += dxhat;
                                sum2 += dxhat * xhat;
                                t.grad_mut(gamma)[j] += g[r * d + j] * xhat;
                                t.grad_mut(beta)[j] += g[r * d + j];
                            }
                            for (std::int64_t j = 0; j < d; ++j) {
                                const T xhat = (t.val(x)[r * d + j] - m) * iv;
                                const T dxhat = g[r * d + j] * t.val(gamma)[j];
                                t.grad_mut(x)[r * d + j] += iv * (dxhat - sum1 / T(d) - xhat * sum2 / T(d));
                            }
                        }
                    });
    }

    /// Max-subtracted softmax over the last axis.
    Ix softmax_lastdim(Ix x) {
        if (val(x).rank() < 1) throw DimError("softmax rank-0 input");
        const std::int64_t d = val(x).dim(std::size_t(val(x).rank() - 1));
        if (d < 1) throw DimError("softmax empty last axis");
        const std::int64_t rows = val(x).numel() / d;
        TensorT<T> out(val(x).shape());
        for (std::int64_t r = 0; r < rows; ++r) {
            T mx = val(x)[r * d];
            for (std::int64_t j = 1; j < d; ++j) mx = std::max(mx, val(x)[r * d + j]);
            T z = 0;
            for (std::int64_t j = 0; j < d; ++j) {
                const T e = std::exp(val(x)[r * d + j] - mx);
                out[r * d + j] = e;
                z += e;
            }
            for (std::int64_t j = 0; j < d; ++j) out[r * d + j] /= z;
        }
        return make(std::move(out), {x}, [x, rows, d](Tape& t, Ix self) {
            const auto& g = t.grad(self);
            const auto& y = t.val(self);
            for (std::int64_t r = 0; r < rows; ++r) {
                T dot = 0;
                for (std::int64_t j = 0; j < d; ++j) dot += g[r * d + j] * y[r * d + j];
                for (std::int64_t j = 0; j < d; ++j) t.grad_mut(x)[r * d + j] += (g[r * d + j] - dot) * y[r * d + j];
            }
        });
    }

    // ---- reductions / losses ----

    Ix sum(Ix a) {
        T acc = 0;
        for (std::int64_t i = 0; i < val(a).numel(); ++i) acc += val(a)[i];
        return make(TensorT<T>::scalar(acc), {a}, [a](Tape& t, Ix self) {
            const T g = t.grad(self)[0];
            for (std::int64_t i = 0; i < t.val(a).numel(); ++i) t.grad_mut(a)[i] += g;
        });
    }

    Ix mean(Ix a) {
        const std::int64_t n = val(a).numel();
        T acc = 0;
        for (std::int64_t i = 0; i < n; ++i) acc += val(a)[i];
        acc /= T(n);
        return make(TensorT<T>::scalar(acc), {a}, [a, n](Tape& t, Ix self) {
            const T g = t.grad(self)[0] / T(n);
            for (std::int64_t i = 0; i < n; ++i) t.grad_mut(a)[i] += g;
        });
    }

    Ix mse_mean(Ix a, Ix b) {
        check_same_shape(val(a), val(b), "mse_mean");
        const std::int64_t n = val(a).numel();
        T acc = 0;
        for (std::int64_t i = 0; i < n; ++i) {
            const T dlt = val(a)[i] - val(b)[i];
            acc += dlt * dlt;
        }
        acc /= T(n);
        return make(TensorT<T>::scalar(acc), {a, b}, [a, b, n](Tape& t, Ix self) {
            const T g = t.grad(self)[0];
            for (std::int64_t i = 0; i < n; ++i) {
                const T dlt = t.val(a)[i] - t.val(b)[i];
                t.grad_mut(a)[i] += g * T(2) * dlt / T(n);
                t.grad_mut(b)[i] -= g * T(2) * dlt / T(n);
            }
        });
    }

    /// Per-element binary cross entropy map. p is clamped to
    /// [clamp_eps, 1-clamp_eps] before the logs; outside the clamp window
    /// the derivative w.r.t. p is zero.
    Ix bce_map(Ix p, Ix g, T clamp_eps = T(1e-7)) {
        check_same_shape(val(p), val(g), "bce_map");
        TensorT<T> out(val(p).shape());
        for (std::int64_t i = 0; i < out.numel(); ++i) {
            const T pc = std::clamp(val(p)[i], clamp_eps, T(1) - clamp_eps);
            out[i] = -(val(g)[i] * std::log(pc) + (T(1) - val(g)[i]) * std::log(T(1) - pc));
        }
        return make(std::move(out), {p, g}, [p, g, clamp_eps](Tape& t, Ix self) {
            const auto& go = t.grad(self);
            for (std::int64_t i = 0; i < go.numel(); ++i) {
                const T pv = t.val(p)[i];
                const T gv = t.val(g)[i];
                const T pc = std::clamp(pv, clamp_eps, T(1) - clamp_eps);
                if (pv > clamp_eps && pv < T(1) - clamp_eps)
                    t.grad_mut(p)[i] += go[i] * (-gv / pc + (T(1) - gv) / (T(1) - pc));
                t.grad_mut(g)[i] += go[i] * (std::log(T(1) - pc) - std::log(pc));
            }
        });
    }

    // ---- structure ops ----

    Ix reshape(Ix a, Shape new_shape) {
        TensorT<T> out = val(a).reshaped(std::move(new_shape));
        return make(std::move(out), {a}, [a](Tape& t, Ix self) {
            const auto& g = t.grad(self);
            for (std::int64_t i = 0; i < g.numel(); ++i) t.grad_mut(a)[i] += g[i];
        });
    }

    Ix gather_rows(Ix x, std::vector<std::int64_t> rows) {
        if (val(x).rank() != 2) throw DimError("gather_rows expects [N,D]");
        const std::int64_t n = val(x).dim(0), d = val(x).dim(1);
        for (auto r : rows)
            if (r < 0 || r >= n) throw DimError("gather_rows index out of range");
        TensorT<T> out(Shape{static_cast<std::int64_t>(rows.size()), d});
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::int64_t j = 0; j < d; ++j) out[std::int64_t(r) * d + j] = val(x)[rows[r] * d + j];
        return make(std::move(out), {x}, [x, rows = std::move(rows), d](Tape& t, Ix self) {
            const auto& g = t.grad(self);
            for (std::size_t r = 0; r < rows.size(); ++r)
                for (std::int64_t j = 0; j < d; ++j) t.grad_mut(x)[rows[r] * d + j] += g[std::int64_t(r) * d + j];
        });
    }

    /// Rebuild a full [total_rows, D] sequence: row visible[r] comes from
    /// x row r, every other row is a copy of fill[D].
    Ix assemble_rows(Ix x, Ix fill, std::int64_t total_rows, std::vector<std::int64_t> visible) {
        if (val(x).rank() != 2) throw DimError("assemble_rows expects [V,D]");
        const std::int64_t v = val(x).dim(0), d = val(x).dim(1);
        if (static_cast<std::int64_t>(visible.size()) != v) throw ContractError("assemble_rows plan/latent length mismatch");
        if (val(fill).numel() != d) throw DimError("assemble_rows fill width");
        TensorT<T> out(Shape{total_rows, d});
        std::vector<char> is_visible(std::size_t(total_rows), 0);
        for (auto r : visible) {
            if (r < 0 || r >= total_rows) throw DimError("assemble_rows index out of range");
            is_visible[std::size_t(r)] = 1;
        }
        for (std::int64_t r = 0; r < total_rows; ++r)
            for (std::int64_t j = 0; j < d; ++j) out[r * d + j] = val(fill)[j];
        for (std::int64_t r = 0; r < v; ++r)
            for (std::int64_t j = 0; j < d; ++j) out[visible[std::size_t(r)] * d + j] = val(x)[r * d + j];
        return make(std::move(out), {x, fill},
                    [x, fill, visible = std::move(visible), is_visible = std::move(is_visible), total_rows,
                     d](Tape& t, Ix self) {
                        const auto& g = t.grad(self);
                        for (std::size_t r = 0; r < visible.size(); ++r)
                            for (std::int64_t j = 0; j < d; ++j)
                                t.grad_mut(x)[std::int64_t(r) * d + j] += g[visible[r] * d + j];
                        for (std::int64_t r = 0; r < total_rows; ++r)
                            if (!is_visible[std::size_t(r)])
                                for (std::int64_t j = 0; j < d; ++j) t.grad_mut(fill)[j] += g[r * d + j];
                    });
    }

    Ix slice_cols(Ix x, std::int64_t c0, std::int64_t c1) {
        if (val(x).rank() != 2) throw DimError("slice_cols expects [N,D]");
        const std::int64_t n = val(x).dim(0), d = val(x).dim(1);
        if (c0 < 0 || c1 > d || c0 >= c1) throw DimError("slice_cols bounds");
        TensorT<T> out(Shape{n, c1 - c0});
        for (std::int64_t r = 0; r < n; ++r)
            for (std::int64_t j = c0; j < c1; ++j) out[r * (c1 - c0) + (j - c0)] = val(x)[r * d + j];
        return make(std::move(out), {x}, [x, n, d, c0, c1](Tape& t, Ix self) {
            const auto& g = t.grad(self);
            for (std::int64_t r = 0; r < n; ++r)
                for (std::int64_t j = c0; j < c1; ++j) t.grad_mut(x)[r * d + j] += g[r * (c1 - c0) + (j - c0)];
        });
    }

    Ix concat_cols(const std::vector<Ix>& parts) {
        if (parts.empty()) throw DimError("concat_cols of nothing");
        const std::int64_t n = val(parts[0]).dim(0);
        std::int64_t d = 0;
        for (Ix p : parts) {
            if (val(p).rank() != 2 || val(p).dim(0) != n) throw DimError("concat_cols row mismatch");
            d += val(p).dim(1);
        }
        TensorT<T> out(Shape{n, d});
        std::int64_t off = 0;
        for (Ix p : parts) {
            const std::int64_t dp = val(p).dim(1);
            for (std::int64_t r = 0; r < n; ++r)
                for (std::int64_t j = 0; j < dp; ++j) out[r * d + off + j] = val(p)[r * dp + j];
            off += dp;
        }
        return make(std::move(out), parts, [parts, n, d](Tape& t, Ix self) {
            const auto& g = t.grad(self);
            std::int64_t off = 0;
            for (Ix p : parts) {
                const std::int64_t dp = t.val(p).dim(1);
                for (std::int64_t r = 0; r < n; ++r)
                    for (std::int64_t j = 0; j < dp; ++j) t.grad_mut(p)[r * dp + j] += g[r * d + off + j];
                off += dp;
            }
        });
    }

    /// [c,H,W] -> [N, p*p*c] non-overlapping patches, token r*gw+cx, patch
    /// vectors flattened channel-major.
    Ix patchify(Ix x, std::int64_t p) {
        if (val(x).rank() != 3) throw DimError("patchify expects [c,H,W]");
        const std::int64_t c = val(x).dim(0), h = val(x).dim(1), w = val(x).dim(2);
        if (h % p != 0 || w % p != 0) throw DimError("patchify extents not divisible by patch size");
        const std::int64_t gh = h / p, gw = w / p;
        TensorT<T> out(Shape{gh * gw, p * p * c});
        for (std::int64_t gy = 0; gy < gh; ++gy)
            for (std::int64_t gx = 0; gx < gw; ++gx)
                for (std::int64_t ch = 0; ch < c; ++ch)
                    for (std::int64_t py = 0; py < p; ++py)
                        for (std::int64_t px = 0; px < p; ++px)
                            out[(gy * gw + gx) * (p * p * c) + ch * p * p + py * p + px] =
                                val(x)[(ch * h + gy * p + py) * w + gx * p + px];
        return make(std::move(out), {x}, [x, c, h, w, p, gh, gw](Tape& t, Ix self) {
            const auto& g = t.grad(self);
            for (std::int64_t gy = 0; gy < gh; ++gy)
                for (std::int64_t gx = 0; gx < gw; ++gx)
                    for (std::int64_t ch = 0; ch < c; ++ch)
                        for (std::int64_t py = 0; py < p; ++py)
                            for (std::int64_t px = 0; px < p; ++px)
                                t.grad_mut(x)[(ch * h + gy * p + py) * w + gx * p + px] +=
                                    g[(gy * gw + gx) * (p * p * c) + ch * p * p + py * p + px];
        });
    }

    /// Exact inverse of patchify for a gh x gw grid.
    Ix unpatchify(Ix tokens, std::int64_t p, std::int64_t c, std::int64_t gh, std::int64_t gw) {
        if (val(tokens).rank() != 2) throw DimError("unpatchify expects [N,L]");
        const std::int64_t n = val(tokens).dim(0), l = val(tokens).dim(1);
        if (n != gh * gw) throw DimError("unpatchify token count does not match grid");
        if (l != p * p * c) throw DimError("unpatchify token length not divisible into p*p*c");
        const std::int64_t h = gh * p, w = gw * p;
        TensorT<T> out(Shape{c, h, w});
        for (std::int64_t gy = 0; gy < gh; ++gy)
            for (std::int64_t gx = 0; gx < gw; ++gx)
                for (std::int64_t ch = 0; ch < c; ++ch)
                    for (std::int64_t py = 0; py < p; ++py)
                        for (std::int64_t px = 0; px < p; ++px)
                            out[(ch * h + gy * p + py) * w + gx * p + px] =
                                val(tokens)[(gy * gw + gx) * l + ch * p * p + py * p + px];
        return make(std::move(out), {tokens}, [tokens, p, c, gh, gw, l, h, w](Tape& t, Ix self) {
            const auto& g = t.grad(self);
            for (std::int64_t gy = 0; gy < gh; ++gy)
                for (std::int64_t gx = 0; gx < gw; ++gx)
                    for (std::int64_t ch = 0; ch < c; ++ch)
                        for (std::int64_t py = 0; py < p; ++py)
                            for (std::int64_t px = 0; px < p; ++px)
                                t.grad_mut(tokens)[(gy * gw + gx) * l + ch * p * p + py * p + px] +=
                                    g[(ch * h + gy * p + py) * w + gx * p + px];
        });
    }

    static T sigmoid_scalar(T x) {
        if (x >= 0) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
    }

private:
    // out += A*B with per-element contributions added in ascending-k order,
    // bit-identical to the naive triple loop.
    static void mm_acc(T* out, const T* a, const T* b, std::int64_t m, std::int64_t k, std::int64_t n) {
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t kk = 0; kk < k; ++kk) {
                const T aik = a[i * k + kk];
                const T* brow = b + kk * n;
                T* orow = out + i * n;
                for (std::int64_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
            }
    }

    Ix make(TensorT<T> value, std::vector<Ix> parents, std::function<void(Tape&, Ix)> bw) {
        Node n;
        n.grad = value.shape().empty() ? TensorT<T>::scalar(T(0)) : TensorT<T>(value.shape());
        n.value = std::move(value);
        n.parents = std::move(parents);
        n.backward = std::move(bw);
        nodes_.push_back(std::move(n));
        return static_cast<Ix>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
};

using TapeF = Tape<float>;
using TapeD = Tape<double>;

}  // namespace senet
