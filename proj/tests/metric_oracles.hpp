#pragma once

// Independent straight-line restatements of the published metric
// definitions, kept deliberately naive (brute-force nearest-foreground
// search, direct 49-tap Gaussian window, explicit per-threshold binary
// maps). They share no code with the library implementations.

#include <cmath>
#include <limits>
#include <vector>

#include "senet/tensor.hpp"

namespace oracle {

using senet::TensorD;

constexpr double kEps = std::numeric_limits<double>::epsilon();

inline double mae(const TensorD& pred, const TensorD& gt) {
    double s = 0;
    for (std::int64_t i = 0; i < pred.numel(); ++i) s += std::fabs(pred[i] - gt[i]);
    return s / double(pred.numel());
}

inline double f_max(const TensorD& pred, const TensorD& gt) {
    const std::int64_t n = pred.numel();
    double best = 0;
    for (int t = 0; t <= 255; ++t) {
        std::vector<int> bin(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) bin[std::size_t(i)] = pred[i] > double(t) / 255.0 ? 1 : 0;
        double tp = 0, fp = 0, fn = 0;
        for (std::int64_t i = 0; i < n; ++i) {
            const int g = gt[i] > 0.5 ? 1 : 0;
            if (bin[std::size_t(i)] && g) tp += 1;
            if (bin[std::size_t(i)] && !g) fp += 1;
            if (!bin[std::size_t(i)] && g) fn += 1;
        }
        const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
        const double r = tp / (tp + fn);
        if (p + r > 0) best = std::max(best, 1.3 * p * r / (0.3 * p + r));
    }
    return best;
}

inline double f_weighted(const TensorD& pred, const TensorD& gt) {
    const std::int64_t h = pred.dim(0), w = pred.dim(1);
    std::vector<std::pair<std::int64_t, std::int64_t>> fg;
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
            if (gt.at2(y, x) > 0.5) fg.emplace_back(y, x);

    // error map first, then brute-force nearest foreground pixel
    TensorD e(senet::Shape{h, w}), et(senet::Shape{h, w}), dst(senet::Shape{h, w});
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
            e.at2(y, x) = std::fabs(pred.at2(y, x) - double(gt.at2(y, x) > 0.5 ? 1 : 0));
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            if (gt.at2(y, x) > 0.5) {
                et.at2(y, x) = e.at2(y, x);
                dst.at2(y, x) = 0.0;
            } else {
                double best = std::numeric_limits<double>::infinity();
                std::int64_t by = -1, bx = -1;
                for (const auto& [fy, fx] : fg) {
                    const double d = double((y - fy) * (y - fy) + (x - fx) * (x - fx));
                    if (d < best) {
                        best = d;
                        by = fy;
                        bx = fx;
                    }
                }
                et.at2(y, x) = e.at2(by, bx);
                dst.at2(y, x) = std::sqrt(best);
            }
        }

    // direct 7x7 sigma-5 window, weights renormalized over the taps that
    // fall inside the map
    double kernel[7][7];
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) kernel[i][j] = std::exp(-((i - 3) * (i - 3) + (j - 3) * (j - 3)) / 50.0);
    TensorD ea(senet::Shape{h, w});
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            double acc = 0, mass = 0;
            for (int i = -3; i <= 3; ++i)
                for (int j = -3; j <= 3; ++j) {
                    const std::int64_t yy = y + i, xx = x + j;
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                    acc += kernel[i + 3][j + 3] * et.at2(yy, xx);
                    mass += kernel[i + 3][j + 3];
                }
            ea.at2(y, x) = acc / mass;
        }

    double fg_sum = 0, bg_sum = 0;
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            if (gt.at2(y, x) > 0.5) {
                fg_sum += ea.at2(y, x) < e.at2(y, x) ? ea.at2(y, x) : e.at2(y, x);
            } else {
                bg_sum += e.at2(y, x) * (2.0 - std::exp(std::log(0.5) / 5.0 * dst.at2(y, x)));
            }
        }
    const double nfg = double(fg.size());
    const double tpw = nfg - fg_sum;
    const double r = 1.0 - fg_sum / nfg;
    const double p = tpw / (tpw + bg_sum + kEps);
    return 2.0 * p * r / (p + r + kEps);
}

namespace detail {

inline double region_similarity(const std::vector<double>& p, const std::vector<double>& g) {
    const double n = double(p.size());
    if (p.empty()) return 0.0;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        mx += p[i];
        my += g[i];
    }
    mx /= n;
    my /= n;
    double vx = 0, vy = 0, vxy = 0;
    if (p.size() > 1) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            vx += (p[i] - mx) * (p[i] - mx) / (n - 1);
            vy += (g[i] - my) * (g[i] - my) / (n - 1);
            vxy += (p[i] - mx) * (g[i] - my) / (n - 1);
        }
    }
    const double a = 4.0 * mx * my * vxy;
    const double b = (mx * mx + my * my) * (vx + vy);
    if (a != 0.0) return a / (b + kEps);
    return b == 0.0 ? 1.0 : 0.0;
}

}  // namespace detail

inline double s_meas(const TensorD& pred, const TensorD& gt) {
    const std::int64_t h = pred.dim(0), w = pred.dim(1);
    std::int64_t nfg = 0;
    for (std::int64_t i = 0; i < gt.numel(); ++i) nfg += gt[i] > 0.5 ? 1 : 0;
    double pred_mean = 0;
    for (std::int64_t i = 0; i < pred.numel(); ++i) pred_mean += pred[i];
    pred_mean /= double(pred.numel());
    if (nfg == 0) return 1.0 - pred_mean;
    if (nfg == h * w) return pred_mean;

    const double mu = double(nfg) / double(h * w);
    // object part
    auto region_stat = [&](bool fg_region) {
        std::vector<double> vals;
        for (std::int64_t i = 0; i < pred.numel(); ++i) {
            const bool in = (gt[i] > 0.5) == fg_region;
            if (in) vals.push_back(fg_region ? pred[i] : 1.0 - pred[i]);
        }
        double m = 0;
        for (double v : vals) m += v;
        m /= double(vals.size());
        double var = 0;
        for (double v : vals) var += (v - m) * (v - m);
        const double sd = vals.size() > 1 ? std::sqrt(var / double(vals.size() - 1)) : 0.0;
        return 2.0 * m / (m * m + 1.0 + sd + kEps);
    };
    const double so = mu * region_stat(true) + (1.0 - mu) * region_stat(false);

    // region part: centroid split, 1-indexed rounding
    double cx = 0, cy = 0;
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
            if (gt.at2(y, x) > 0.5) {
                cx += double(x + 1);
                cy += double(y + 1);
            }
    const auto sx = std::int64_t(std::llround(cx / double(nfg)));
    const auto sy = std::int64_t(std::llround(cy / double(nfg)));
    double sr = 0;
    const std::int64_t ys[3] = {0, sy, h};
    const std::int64_t xs[3] = {0, sx, w};
    for (int qy = 0; qy < 2; ++qy)
        for (int qx = 0; qx < 2; ++qx) {
            std::vector<double> p, g;
            for (std::int64_t y = ys[qy]; y < ys[qy + 1]; ++y)
                for (std::int64_t x = xs[qx]; x < xs[qx + 1]; ++x) {
                    p.push_back(pred.at2(y, x));
                    g.push_back(gt.at2(y, x) > 0.5 ? 1.0 : 0.0);
                }
            const double weight = double(p.size()) / double(h * w);
            sr += weight * detail::region_similarity(p, g);
        }
    const double q = 0.5 * so + 0.5 * sr;
    return q < 0.0 ? 0.0 : q;
}

inline double e_meas(const TensorD& pred, const TensorD& gt) {
    const std::int64_t n = pred.numel();
    std::int64_t nfg = 0;
    for (std::int64_t i = 0; i < n; ++i) nfg += gt[i] > 0.5 ? 1 : 0;
    double total = 0;
    for (int t = 0; t <= 255; ++t) {
        std::vector<double> fm(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) fm[std::size_t(i)] = pred[i] >= double(t) / 255.0 ? 1.0 : 0.0;
        double acc = 0;
        if (nfg == 0) {
            for (std::int64_t i = 0; i < n; ++i) acc += 1.0 - fm[std::size_t(i)];
        } else if (nfg == n) {
            for (std::int64_t i = 0; i < n; ++i) acc += fm[std::size_t(i)];
        } else {
            double fm_mean = 0, gt_mean = double(nfg) / double(n);
            for (std::int64_t i = 0; i < n; ++i) fm_mean += fm[std::size_t(i)];
            fm_mean /= double(n);
            for (std::int64_t i = 0; i < n; ++i) {
                const double pf = fm[std::size_t(i)] - fm_mean;
                const double pg = (gt[i] > 0.5 ? 1.0 : 0.0) - gt_mean;
                const double xi = 2.0 * pf * pg / (pf * pf + pg * pg + kEps);
                acc += (xi + 1.0) * (xi + 1.0) / 4.0;
            }
        }
        total += acc / double(n);
    }
    return total / 256.0;
}

}  // namespace oracle
