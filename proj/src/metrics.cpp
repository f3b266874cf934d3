#include "senet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "senet/error.hpp"

namespace senet {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

std::vector<char> binarize_gt(const TensorD& gt) {
    std::vector<char> b(std::size_t(gt.numel()));
    for (std::int64_t i = 0; i < gt.numel(); ++i) b[std::size_t(i)] = gt[i] > 0.5 ? 1 : 0;
    return b;
}

std::int64_t count_fg(const std::vector<char>& b) {
    std::int64_t n = 0;
    for (char c : b) n += c;
    return n;
}

// Exact Euclidean distance transform. For every pixel returns the distance
// to the nearest foreground pixel and that pixel's flat index (self for
// foreground pixels). Column sweep for the per-column nearest foreground
// row, then a per-row scan over candidate columns.
void distance_transform(const std::vector<char>& fg, std::int64_t h, std::int64_t w, std::vector<double>& dist,
                        std::vector<std::int64_t>& nearest) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> col_d(std::size_t(h * w), inf);
    std::vector<std::int64_t> col_row(std::size_t(h * w), -1);
    for (std::int64_t x = 0; x < w; ++x) {
        double d = inf;
        std::int64_t last = -1;
        for (std::int64_t y = 0; y < h; ++y) {
            if (fg[std::size_t(y * w + x)]) {
                d = 0;
                last = y;
            } else if (last >= 0) {
                d = double(y - last);
            }
            col_d[std::size_t(y * w + x)] = d;
            col_row[std::size_t(y * w + x)] = last;
        }
        d = inf;
        last = -1;
        for (std::int64_t y = h - 1; y >= 0; --y) {
            if (fg[std::size_t(y * w + x)]) {
                d = 0;
                last = y;
            } else if (last >= 0) {
                d = double(last - y);
            }
            if (d < col_d[std::size_t(y * w + x)]) {
                col_d[std::size_t(y * w + x)] = d;
                col_row[std::size_t(y * w + x)] = last;
            }
        }
    }
    // Squared distances are integer-valued, so ties are exact; they break
    // toward the smallest row-major index, the same canonical choice the
    // naive scan makes.
    dist.assign(std::size_t(h * w), inf);
    nearest.assign(std::size_t(h * w), -1);
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            double best = inf;
            std::int64_t best_row = -1, best_col = -1;
            for (std::int64_t xc = 0; xc < w; ++xc) {
                const double cd = col_d[std::size_t(y * w + xc)];
                if (cd == inf) continue;
                const double dd = double(x - xc) * double(x - xc) + cd * cd;
                const std::int64_t row = col_row[std::size_t(y * w + xc)];
                if (dd < best || (dd == best && (row < best_row || (row == best_row && xc < best_col)))) {
                    best = dd;
                    best_row = row;
                    best_col = xc;
                }
            }
            dist[std::size_t(y * w + x)] = std::sqrt(best);
            if (best_col >= 0) nearest[std::size_t(y * w + x)] = best_row * w + best_col;
        }
}

// Separable 7x7 Gaussian (sigma 5) normalized by the kernel mass actually
// inside the map, so constant fields pass through unchanged at borders.
// With an outer-product kernel the per-axis masses multiply to the exact
// in-window 2-d mass.
std::vector<double> gauss7_sigma5(const std::vector<double>& in, std::int64_t h, std::int64_t w) {
    double g[7];
    for (int i = 0; i < 7; ++i) g[i] = std::exp(-double((i - 3) * (i - 3)) / (2.0 * 25.0));
    std::vector<double> tmp(std::size_t(h * w), 0.0), out(std::size_t(h * w), 0.0);
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            double acc = 0, mass = 0;
            for (int k = -3; k <= 3; ++k) {
                const std::int64_t xx = x + k;
                if (xx < 0 || xx >= w) continue;
                acc += g[k + 3] * in[std::size_t(y * w + xx)];
                mass += g[k + 3];
            }
            tmp[std::size_t(y * w + x)] = acc / mass;
        }
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            double acc = 0, mass = 0;
            for (int k = -3; k <= 3; ++k) {
                const std::int64_t yy = y + k;
                if (yy < 0 || yy >= h) continue;
                acc += g[k + 3] * tmp[std::size_t(yy * w + x)];
                mass += g[k + 3];
            }
            out[std::size_t(y * w + x)] = acc / mass;
        }
    return out;
}

double mean_of(const TensorD& t) {
    double acc = 0;
    for (std::int64_t i = 0; i < t.numel(); ++i) acc += t[i];
    return acc / double(t.numel());
}

// Object-term score over one region: 2 x / (x^2 + 1 + sigma + eps), with
// mean x and sample standard deviation sigma of the values inside the
// region (zero when the region has fewer than two pixels).
double object_score(const TensorD& values, const std::vector<char>& region) {
    std::int64_t n = 0;
    double mean = 0;
    for (std::int64_t i = 0; i < values.numel(); ++i)
        if (region[std::size_t(i)]) {
            mean += values[i];
            ++n;
        }
    if (n == 0) return 0.0;
    mean /= double(n);
    double var = 0;
    for (std::int64_t i = 0; i < values.numel(); ++i)
        if (region[std::size_t(i)]) var += (values[i] - mean) * (values[i] - mean);
    const double sd = n > 1 ? std::sqrt(var / double(n - 1)) : 0.0;
    return 2.0 * mean / (mean * mean + 1.0 + sd + kEps);
}

// Quadrant SSIM with sample (n-1) variances and the alpha/beta degenerate
// rules of the structure measure.
double quadrant_ssim(const TensorD& pred, const TensorD& gt, std::int64_t y0, std::int64_t y1, std::int64_t x0,
                     std::int64_t x1) {
    const std::int64_t w = gt.dim(1);
    const std::int64_t n = (y1 - y0) * (x1 - x0);
    if (n <= 0) return 0.0;
    double mx = 0, my = 0;
    for (std::int64_t y = y0; y < y1; ++y)
        for (std::int64_t x = x0; x < x1; ++x) {
            mx += pred[y * w + x];
            my += gt[y * w + x];
        }
    mx /= double(n);
    my /= double(n);
    double sxx = 0, syy = 0, sxy = 0;
    for (std::int64_t y = y0; y < y1; ++y)
        for (std::int64_t x = x0; x < x1; ++x) {
            const double dx = pred[y * w + x] - mx, dy = gt[y * w + x] - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
    if (n > 1) {
        sxx /= double(n - 1);
        syy /= double(n - 1);
        sxy /= double(n - 1);
    } else {
        sxx = syy = sxy = 0.0;
    }
    const double alpha = 4.0 * mx * my * sxy;
    const double beta = (mx * mx + my * my) * (sxx + syy);
    if (alpha != 0.0) return alpha / (beta + kEps);
    return beta == 0.0 ? 1.0 : 0.0;
}

void check_extents(const TensorD& pred, const TensorD& gt, const char* who) {
    if (pred.rank() != 2 || gt.rank() != 2) throw DimError(std::string(who) + " expects [H,W] maps");
    check_same_shape(pred, gt, who);
}

}  // namespace

double mae_metric(const TensorD& pred, const TensorD& gt) {
    check_extents(pred, gt, "mae_metric");
    double acc = 0;
    for (std::int64_t i = 0; i < pred.numel(); ++i) acc += std::abs(pred[i] - gt[i]);
    return acc / double(pred.numel());
}

double f_measure_max(const TensorD& pred, const TensorD& gt) {
    check_extents(pred, gt, "f_measure_max");
    const auto fg = binarize_gt(gt);
    const std::int64_t n_fg = count_fg(fg);
    if (n_fg == 0) throw DegenerateTargetError("f_measure_max on empty ground truth");
    const double beta2 = 0.3;
    double best = 0.0;
    for (int t = 0; t <= 255; ++t) {
        const double thr = double(t) / 255.0;
        std::int64_t tp = 0, pred_pos = 0;
        for (std::int64_t i = 0; i < pred.numel(); ++i) {
            const bool on = pred[i] > thr;
            pred_pos += on;
            tp += on && fg[std::size_t(i)];
        }
        const double precision = pred_pos > 0 ? double(tp) / double(pred_pos) : 0.0;
        const double recall = double(tp) / double(n_fg);
        if (precision + recall > 0.0)
            best = std::max(best, (1.0 + beta2) * precision * recall / (beta2 * precision + recall));
    }
    return best;
}

double f_measure_weighted(const TensorD& pred, const TensorD& gt) {
    check_extents(pred, gt, "f_measure_weighted");
    const std::int64_t h = pred.dim(0), w = pred.dim(1);
    const auto fg = binarize_gt(gt);
    const std::int64_t n_fg = count_fg(fg);
    if (n_fg == 0) throw DegenerateTargetError("f_measure_weighted on empty ground truth");

    std::vector<double> err(std::size_t(h * w));
    for (std::int64_t i = 0; i < h * w; ++i) err[std::size_t(i)] = std::abs(pred[i] - double(fg[std::size_t(i)]));

    std::vector<double> dist;
    std::vector<std::int64_t> nearest;
    distance_transform(fg, h, w, dist, nearest);

    std::vector<double> err_t = err;
    for (std::int64_t i = 0; i < h * w; ++i)
        if (!fg[std::size_t(i)]) err_t[std::size_t(i)] = err[std::size_t(nearest[std::size_t(i)])];
    const auto smoothed = gauss7_sigma5(err_t, h, w);

    // foreground takes min(original, smoothed) error with B = 1; the
    // background keeps its original error weighted by the distance decay.
    double fg_err_sum = 0, bg_err_sum = 0;
    const double decay = std::log(0.5) / 5.0;
    for (std::int64_t i = 0; i < h * w; ++i) {
        if (fg[std::size_t(i)]) {
            fg_err_sum += std::min(err[std::size_t(i)], smoothed[std::size_t(i)]);
        } else {
            const double b = 2.0 - std::exp(decay * dist[std::size_t(i)]);
            bg_err_sum += err[std::size_t(i)] * b;
        }
    }
    const double tpw = double(n_fg) - fg_err_sum;
    const double fpw = bg_err_sum;
    const double recall = 1.0 - fg_err_sum / double(n_fg);
    const double precision = tpw / (tpw + fpw + kEps);
    return 2.0 * precision * recall / (precision + recall + kEps);
}

double s_measure(const TensorD& pred, const TensorD& gt) {
    check_extents(pred, gt, "s_measure");
    const std::int64_t h = pred.dim(0), w = pred.dim(1);
    const auto fg = binarize_gt(gt);
    const std::int64_t n_fg = count_fg(fg);
    const double mu = double(n_fg) / double(h * w);
    if (n_fg == 0) return 1.0 - mean_of(pred);
    if (n_fg == h * w) return mean_of(pred);

    // object term
    std::vector<char> bg(fg.size());
    for (std::size_t i = 0; i < fg.size(); ++i) bg[i] = fg[i] ? 0 : 1;
    TensorD inv_pred(pred.shape());
    for (std::int64_t i = 0; i < pred.numel(); ++i) inv_pred[i] = 1.0 - pred[i];
    const double s_object = mu * object_score(pred, fg) + (1.0 - mu) * object_score(inv_pred, bg);

    // region term, quadrants split at the gt centroid (1-indexed rounding)
    TensorD gtd(pred.shape());
    for (std::int64_t i = 0; i < gtd.numel(); ++i) gtd[i] = double(fg[std::size_t(i)]);
    double cx = 0, cy = 0;
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
            if (fg[std::size_t(y * w + x)]) {
                cx += double(x + 1);
                cy += double(y + 1);
            }
    const auto split_x = std::int64_t(std::llround(cx / double(n_fg)));
    const auto split_y = std::int64_t(std::llround(cy / double(n_fg)));
    const double area = double(h * w);
    const double w1 = double(split_x * split_y) / area;
    const double w2 = double((w - split_x) * split_y) / area;
    const double w3 = double(split_x * (h - split_y)) / area;
    const double w4 = 1.0 - w1 - w2 - w3;
    const double s_region = w1 * quadrant_ssim(pred, gtd, 0, split_y, 0, split_x) +
                            w2 * quadrant_ssim(pred, gtd, 0, split_y, split_x, w) +
                            w3 * quadrant_ssim(pred, gtd, split_y, h, 0, split_x) +
                            w4 * quadrant_ssim(pred, gtd, split_y, h, split_x, w);
    return std::max(0.0, 0.5 * s_object + 0.5 * s_region);
}

double e_measure_mean(const TensorD& pred, const TensorD& gt) {
    check_extents(pred, gt, "e_measure_mean");
    const std::int64_t n = pred.numel();
    const auto fg = binarize_gt(gt);
    const std::int64_t n_fg = count_fg(fg);
    const double gt_mean = double(n_fg) / double(n);

    double total = 0.0;
    for (int t = 0; t <= 255; ++t) {
        const double thr = double(t) / 255.0;
        double fm_mean = 0;
        for (std::int64_t i = 0; i < n; ++i) fm_mean += pred[i] >= thr ? 1.0 : 0.0;
        fm_mean /= double(n);
        double sum = 0;
        if (n_fg == 0) {
            for (std::int64_t i = 0; i < n; ++i) sum += pred[i] >= thr ? 0.0 : 1.0;
        } else if (n_fg == n) {
            for (std::int64_t i = 0; i < n; ++i) sum += pred[i] >= thr ? 1.0 : 0.0;
        } else {
            for (std::int64_t i = 0; i < n; ++i) {
                const double phi_fm = (pred[i] >= thr ? 1.0 : 0.0) - fm_mean;
                const double phi_gt = double(fg[std::size_t(i)]) - gt_mean;
                const double align = 2.0 * phi_fm * phi_gt / (phi_fm * phi_fm + phi_gt * phi_gt + kEps);
                sum += (align + 1.0) * (align + 1.0) / 4.0;
            }
        }
        total += sum / double(n);
    }
    return total / 256.0;
}

double score(double s, double e, double f, double m) { return s + e + f + (1.0 - m); }

ImageMetrics evaluate_image(const TensorD& pred, const TensorD& gt) {
    check_extents(pred, gt, "evaluate_image");
    ImageMetrics im;
    im.mae = mae_metric(pred, gt);
    im.s_alpha = s_measure(pred, gt);
    im.e_phi = e_measure_mean(pred, gt);
    const auto fg_count = count_fg(binarize_gt(gt));
    if (fg_count == 0) {
        im.degenerate_gt = true;
        im.f_beta_w = std::numeric_limits<double>::quiet_NaN();
        im.f_beta_m = std::numeric_limits<double>::quiet_NaN();
    } else {
        im.f_beta_w = f_measure_weighted(pred, gt);
        im.f_beta_m = f_measure_max(pred, gt);
    }
    return im;
}

MetricsReport aggregate_report(Task task, std::vector<std::string> ids, std::vector<ImageMetrics> per_image) {
    if (per_image.empty()) throw ContractError("empty report");
    MetricsReport r;
    r.task = task;
    r.ids = std::move(ids);
    r.per_image = std::move(per_image);
    std::int64_t n_f = 0;
    for (const auto& im : r.per_image) {
        r.s_alpha += im.s_alpha;
        r.e_phi += im.e_phi;
        r.mae += im.mae;
        if (im.degenerate_gt) {
            ++r.degenerate_count;
        } else {
            r.f_beta_w += im.f_beta_w;
            r.f_beta_m += im.f_beta_m;
            ++n_f;
        }
    }
    const double n = double(r.per_image.size());
    r.s_alpha /= n;
    r.e_phi /= n;
    r.mae /= n;
    if (n_f > 0) {
        r.f_beta_w /= double(n_f);
        r.f_beta_m /= double(n_f);
    }
    r.score_value = score(r.s_alpha, r.e_phi, r.f_beta(), r.mae);
    return r;
}

}  // namespace senet
