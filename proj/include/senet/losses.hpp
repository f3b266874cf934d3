#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "senet/autodiff.hpp"
#include "senet/model.hpp"
#include "senet/tensor.hpp"

namespace senet {

enum class ResizeMode { Bilinear, Nearest };
enum class Weighting { Dw, None, Ppa };

struct LossConfig {
    double lambda = 0.1;       // reconstruction weight in the total loss
    double l = 1.0;            // boundary weight scale
    double band_lo = 0.01;     // soft values strictly inside (band_lo, band_hi)
    double band_hi = 0.99;     //   form the boundary region
    int band_dilation = 1;     // 8-connected dilation steps of that region
    double bce_clamp_eps = 1e-7;
    double iou_smooth = 1.0;
    double alpha_cap = 100.0;
    ResizeMode gt_resize = ResizeMode::Bilinear;
    Weighting weighting = Weighting::Dw;

    void validate() const {
        if (lambda < 0.0 || lambda > 1.0) throw ContractError("lambda must lie in [0,1]");
        if (!(band_lo < band_hi)) throw ContractError("band_lo must be below band_hi");
    }
};

/// Resized target map; bilinear mode yields fractional values along
/// foreground/background transitions, nearest keeps a hard mask.
template <typename T>
struct SoftGroundTruth {
    TensorT<T> values;  // [H,W] in [0,1]
    ResizeMode source = ResizeMode::Bilinear;
};

template <typename T>
struct WeightMatrix {
    TensorT<T> values;  // [H,W], entries are 1 or alpha
    double alpha = 1.0;
    double l = 1.0;
    std::int64_t s_img = 0;
    std::int64_t s_obj = 0;
};

template <typename T>
SoftGroundTruth<T> soft_gt(const TensorT<T>& mask, std::int64_t out_h, std::int64_t out_w, ResizeMode mode) {
    if (mask.rank() != 2 || mask.numel() == 0) throw DimError("soft_gt expects a nonempty [h,w] mask");
    SoftGroundTruth<T> gt;
    gt.source = mode;
    gt.values = mode == ResizeMode::Bilinear ? resize_bilinear(mask, out_h, out_w) : resize_nearest(mask, out_h, out_w);
    return gt;
}

/// Boundary pixels (soft values strictly inside the band, dilated) get
/// alpha = min(l * S_img / S_obj, alpha_cap); everything else gets 1.
/// S_obj counts soft values above one half.
template <typename T>
WeightMatrix<T> weight_matrix(const SoftGroundTruth<T>& gt, const LossConfig& cfg) {
    const std::int64_t h = gt.values.dim(0), w = gt.values.dim(1);
    WeightMatrix<T> wm;
    wm.l = cfg.l;
    wm.s_img = h * w;
    wm.s_obj = 0;
    for (std::int64_t i = 0; i < gt.values.numel(); ++i)
        if (double(gt.values[i]) > 0.5) ++wm.s_obj;
    if (wm.s_obj == 0) throw DegenerateTargetError("ground truth has no object pixels");
    wm.alpha = std::min(cfg.l * double(wm.s_img) / double(wm.s_obj), cfg.alpha_cap);

    std::vector<char> band(std::size_t(h * w), 0);
    for (std::int64_t i = 0; i < h * w; ++i) {
        const double v = double(gt.values[i]);
        band[std::size_t(i)] = (v > cfg.band_lo && v < cfg.band_hi) ? 1 : 0;
    }
    for (int step = 0; step < cfg.band_dilation; ++step) {
        std::vector<char> grown = band;
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x) {
                if (band[std::size_t(y * w + x)]) continue;
                for (std::int64_t dy = -1; dy <= 1 && !grown[std::size_t(y * w + x)]; ++dy)
                    for (std::int64_t dx = -1; dx <= 1; ++dx) {
                        const std::int64_t yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                        if (band[std::size_t(yy * w + xx)]) {
                            grown[std::size_t(y * w + x)] = 1;
                            break;
                        }
                    }
            }
        band.swap(grown);
    }

    wm.values = TensorT<T>::full({h, w}, T(1));
    for (std::int64_t i = 0; i < h * w; ++i)
        if (band[std::size_t(i)]) wm.values[i] = T(wm.alpha);
    return wm;
}

/// Windowed-mean weights (radius 15): w = 1 + 5 * |mean_31x31(gt) - gt|.
/// Baseline alternative to the size-adaptive boundary weights.
template <typename T>
TensorT<T> ppa_weights(const TensorT<T>& gt) {
    const std::int64_t h = gt.dim(0), w = gt.dim(1), r = 15;
    TensorT<T> out(Shape{h, w});
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            double acc = 0;
            std::int64_t cnt = 0;
            for (std::int64_t yy = std::max<std::int64_t>(0, y - r); yy <= std::min(h - 1, y + r); ++yy)
                for (std::int64_t xx = std::max<std::int64_t>(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
                    acc += double(gt.at2(yy, xx));
                    ++cnt;
                }
            out.at2(y, x) = T(1.0 + 5.0 * std::abs(acc / double(cnt) - double(gt.at2(y, x))));
        }
    return out;
}

/// Weighted BCE + weighted IoU segmentation loss, differentiable w.r.t.
/// pred. BCE is weight-normalized (divide by sum of W); the IoU term folds
/// W into the intersection and union sums and reduces to the plain soft
/// IoU at W = 1.
template <typename T>
typename Tape<T>::Ix dw_seg_loss(Tape<T>& tape, typename Tape<T>::Ix pred, const SoftGroundTruth<T>& gt,
                                 const WeightMatrix<T>& w, const LossConfig& cfg) {
    check_same_shape(tape.val(pred), gt.values, "dw_seg_loss pred/gt");
    check_same_shape(tape.val(pred), w.values, "dw_seg_loss pred/w");
    const auto gt_node = tape.constant(gt.values);
    const auto w_node = tape.constant(w.values);
    double w_sum = 0;
    for (std::int64_t i = 0; i < w.values.numel(); ++i) w_sum += double(w.values[i]);

    auto bce = tape.bce_map(pred, gt_node, T(cfg.bce_clamp_eps));
    auto wbce = tape.scale(tape.sum(tape.mul(w_node, bce)), T(1.0 / w_sum));

    auto pg = tape.mul(pred, gt_node);
    auto inter = tape.sum(tape.mul(w_node, pg));
    auto uni = tape.sum(tape.mul(w_node, tape.sub(tape.add(pred, gt_node), pg)));
    auto s = tape.scalar_const(T(cfg.iou_smooth));
    auto one = tape.scalar_const(T(1));
    auto iou = tape.sub(one, tape.div(tape.add(inter, s), tape.add(uni, s)));
    return tape.add(wbce, iou);
}

/// Mean squared error over pixels belonging to masked patches only; exactly
/// zero when nothing was masked.
template <typename T>
typename Tape<T>::Ix recon_loss(Tape<T>& tape, typename Tape<T>::Ix recon, const TensorT<T>& image,
                                const MaskPlan& plan, std::int64_t p) {
    check_same_shape(tape.val(recon), image, "recon_loss");
    if (plan.masked.empty()) return tape.scalar_const(T(0));
    const std::int64_t h = image.dim(1), w = image.dim(2);
    const std::int64_t gw = w / p;
    TensorT<T> mask(image.shape());
    for (auto token : plan.masked) {
        const std::int64_t gy = token / gw, gx = token % gw;
        for (std::int64_t c = 0; c < 3; ++c)
            for (std::int64_t py = 0; py < p; ++py)
                for (std::int64_t px = 0; px < p; ++px) mask.data()[(c * h + gy * p + py) * w + gx * p + px] = T(1);
    }
    const double count = double(plan.masked.size()) * double(p) * double(p) * 3.0;
    auto diff = tape.mul(tape.sub(recon, tape.constant(image)), tape.constant(mask));
    return tape.scale(tape.sum(tape.mul(diff, diff)), T(1.0 / count));
}

/// lambda * recon + (1 - lambda) * seg.
template <typename T>
typename Tape<T>::Ix total_loss(Tape<T>& tape, typename Tape<T>::Ix l_recon, typename Tape<T>::Ix l_seg,
                                double lambda) {
    if (lambda < 0.0 || lambda > 1.0) throw ContractError("lambda must lie in [0,1]");
    return tape.add(tape.scale(l_recon, T(lambda)), tape.scale(l_seg, T(1.0 - lambda)));
}

}  // namespace senet
