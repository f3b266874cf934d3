#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "senet/data.hpp"
#include "senet/tensor.hpp"

namespace senet {

// Binary-segmentation metric suite. Predictions are expected in [0,1] at
// ground-truth resolution; ground truths are binarized at 0.5. Fixed
// constants: beta^2 = 0.3 for the max F-measure, beta^2 = 1 for the
// weighted F-measure with a 7x7 sigma-5 Gaussian and decay constant 5.

double mae_metric(const TensorD& pred, const TensorD& gt);

/// Max F over 256 thresholds t/255 with strict > binarization; F = 0 where
/// precision + recall vanish. Throws DegenerateTargetError on empty gt.
double f_measure_max(const TensorD& pred, const TensorD& gt);

/// Weighted F: error map with background errors pulled from their nearest
/// foreground pixel (exact Euclidean distance transform), Gaussian
/// smoothing, per-pixel min on the foreground and distance-decay weighting
/// of the background. Throws DegenerateTargetError on empty gt.
double f_measure_weighted(const TensorD& pred, const TensorD& gt);

/// Structure measure: 0.5 * object term + 0.5 * region term (quadrant SSIM
/// split at the gt centroid). Edge cases: empty gt -> 1 - mean(pred), full
/// gt -> mean(pred).
double s_measure(const TensorD& pred, const TensorD& gt);

/// Mean enhanced-alignment measure over 256 thresholds t/255 with >=
/// binarization; each threshold scores the mean of the enhanced alignment
/// map, with the constant-gt degenerate rules.
double e_measure_mean(const TensorD& pred, const TensorD& gt);

/// s + e + f + (1 - m).
double score(double s, double e, double f, double m);

struct ImageMetrics {
    double s_alpha = 0.0;
    double e_phi = 0.0;
    double f_beta_w = 0.0;  // NaN when the gt is degenerate
    double f_beta_m = 0.0;  // NaN when the gt is degenerate
    double mae = 0.0;
    bool degenerate_gt = false;  // gt had no foreground
};

/// All five metrics for one prediction/gt pair at gt resolution.
ImageMetrics evaluate_image(const TensorD& pred, const TensorD& gt);

struct MetricsReport {
    Task task = Task::Cod;
    std::vector<std::string> ids;
    std::vector<ImageMetrics> per_image;
    // dataset means (F means skip degenerate-gt images)
    double s_alpha = 0.0;
    double e_phi = 0.0;
    double f_beta_w = 0.0;
    double f_beta_m = 0.0;
    double mae = 0.0;
    double score_value = 0.0;  // uses f_beta_w for cod, f_beta_m for sod
    int degenerate_count = 0;

    double f_beta() const { return task == Task::Cod ? f_beta_w : f_beta_m; }
};

/// Arithmetic mean of per-image metrics in the given order.
MetricsReport aggregate_report(Task task, std::vector<std::string> ids, std::vector<ImageMetrics> per_image);

}  // namespace senet
