#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "metric_oracles.hpp"
#include "senet/metrics.hpp"
#include "senet/rng.hpp"

using namespace senet;

namespace {

// prediction/gt pair with a nonempty, nonfull gt
std::pair<TensorD, TensorD> random_pair(Prng& rng) {
    TensorD pred(Shape{8, 8}), gt(Shape{8, 8});
    for (std::int64_t i = 0; i < 64; ++i) {
        pred[i] = rng.uniform();
        gt[i] = rng.uniform() < 0.35 ? 1.0 : 0.0;
    }
    gt[std::int64_t(rng.next_below(64))] = 1.0;
    gt[std::int64_t(rng.next_below(64))] = 0.0;
    bool has0 = false, has1 = false;
    for (std::int64_t i = 0; i < 64; ++i) {
        has0 |= gt[i] == 0.0;
        has1 |= gt[i] == 1.0;
    }
    if (!has0) gt[0] = 0.0;
    if (!has1) gt[0] = 1.0;
    return {pred, gt};
}

}  // namespace

TEST_CASE("mae trivial values") {
    auto gt = TensorD::from({2, 2}, {1, 0, 1, 0});
    CHECK(mae_metric(gt, gt) == 0.0);
    CHECK(mae_metric(TensorD::full({2, 2}, 1.0), TensorD(Shape{2, 2})) == 1.0);
    TensorD any_gt(Shape{4, 4});
    any_gt[3] = 1.0;
    CHECK(mae_metric(TensorD::full({4, 4}, 0.5), any_gt) == 0.5);
    CHECK_THROWS_AS(mae_metric(TensorD(Shape{2, 2}), TensorD(Shape{3, 3})), DimError);
}

TEST_CASE("f_measure_max separable and inverted predictions") {
    Prng rng(3);
    TensorD gt(Shape{8, 8});
    for (std::int64_t i = 0; i < 64; ++i) gt[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
    gt[0] = 1.0;
    gt[1] = 0.0;
    TensorD pred(Shape{8, 8});
    for (std::int64_t i = 0; i < 64; ++i) pred[i] = std::clamp(gt[i] + rng.uniform(-0.29, 0.29), 0.0, 1.0);
    CHECK(f_measure_max(pred, gt) == doctest::Approx(1.0).epsilon(1e-12));

    TensorD inv(Shape{8, 8});
    for (std::int64_t i = 0; i < 64; ++i) inv[i] = 1.0 - gt[i];
    CHECK(f_measure_max(inv, gt) == 0.0);

    CHECK_THROWS_AS(f_measure_max(pred, TensorD(Shape{8, 8})), DegenerateTargetError);
}

TEST_CASE("f_measure_weighted endpoints") {
    TensorD gt(Shape{8, 8});
    for (int y = 2; y < 6; ++y)
        for (int x = 3; x < 7; ++x) gt.at2(y, x) = 1.0;
    CHECK(f_measure_weighted(gt, gt) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(f_measure_weighted(TensorD(Shape{8, 8}), gt) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK_THROWS_AS(f_measure_weighted(gt, TensorD(Shape{8, 8})), DegenerateTargetError);
}

TEST_CASE("s_measure perfect match and edge cases") {
    TensorD gt(Shape{8, 8});
    for (int y = 1; y < 5; ++y)
        for (int x = 2; x < 6; ++x) gt.at2(y, x) = 1.0;
    CHECK(s_measure(gt, gt) == doctest::Approx(1.0).epsilon(1e-9));

    TensorD zeros(Shape{8, 8});
    CHECK(s_measure(zeros, zeros) == 1.0);                        // empty gt, empty pred
    CHECK(s_measure(TensorD::full({8, 8}, 0.25), zeros) == 0.75); // 1 - mean(pred)
    CHECK(s_measure(TensorD::full({8, 8}, 0.25), TensorD::full({8, 8}, 1.0)) == 0.25);
}

TEST_CASE("e_measure near one on perfect hard maps") {
    TensorD gt(Shape{8, 8});
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 8; ++x) gt.at2(y, x) = 1.0;
    const double e = e_measure_mean(gt, gt);
    // threshold 0 binarizes everything to foreground; the other 255
    // thresholds score 1 exactly
    CHECK(e >= 255.0 / 256.0 - 1e-9);
    CHECK(e <= 1.0);
}

TEST_CASE("score arithmetic including reported-table rows") {
    CHECK(score(0.888, 0.932, 0.847, 0.039) == doctest::Approx(3.628).epsilon(1e-9));
    CHECK(score(0.926, 0.953, 0.925, 0.022) == doctest::Approx(3.782).epsilon(1e-9));
    CHECK(score(1, 1, 1, 0) == 4.0);
}

TEST_CASE("metrics agree with independent oracles on random pairs") {
    Prng rng(2024);
    for (int trial = 0; trial < 30; ++trial) {
        auto [pred, gt] = random_pair(rng);
        CHECK(mae_metric(pred, gt) == doctest::Approx(oracle::mae(pred, gt)).epsilon(1e-12));
        CHECK(f_measure_max(pred, gt) == doctest::Approx(oracle::f_max(pred, gt)).epsilon(1e-12));
        CHECK(std::abs(f_measure_weighted(pred, gt) - oracle::f_weighted(pred, gt)) < 1e-6);
        CHECK(std::abs(s_measure(pred, gt) - oracle::s_meas(pred, gt)) < 1e-6);
        CHECK(std::abs(e_measure_mean(pred, gt) - oracle::e_meas(pred, gt)) < 1e-6);
    }
}

TEST_CASE("metric ranges and perfect values") {
    Prng rng(55);
    for (int trial = 0; trial < 10; ++trial) {
        auto [pred, gt] = random_pair(rng);
        for (double v : {mae_metric(pred, gt), f_measure_max(pred, gt), f_measure_weighted(pred, gt),
                         s_measure(pred, gt), e_measure_mean(pred, gt)}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        // perfect prediction
        CHECK(mae_metric(gt, gt) == 0.0);
        CHECK(f_measure_max(gt, gt) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(f_measure_weighted(gt, gt) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(s_measure(gt, gt) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("aggregate_report means, score wiring and degenerate flags") {
    TensorD gt(Shape{8, 8});
    for (int i = 0; i < 12; ++i) gt[i] = 1.0;
    TensorD pred = gt;
    auto im1 = evaluate_image(pred, gt);
    TensorD empty_gt(Shape{8, 8});
    auto im2 = evaluate_image(TensorD::full({8, 8}, 0.1), empty_gt);
    CHECK(im2.degenerate_gt);

    auto report = aggregate_report(Task::Cod, {"a", "b"}, {im1, im2});
    CHECK(report.degenerate_count == 1);
    CHECK(report.f_beta_w == doctest::Approx(im1.f_beta_w));  // NaN row excluded
    CHECK(report.mae == doctest::Approx(0.5 * (im1.mae + im2.mae)));
    CHECK(report.score_value ==
          doctest::Approx(score(report.s_alpha, report.e_phi, report.f_beta_w, report.mae)).epsilon(1e-12));

    auto sod = aggregate_report(Task::Sod, {"a", "b"}, {im1, im2});
    CHECK(sod.f_beta() == sod.f_beta_m);

    CHECK_THROWS_AS(aggregate_report(Task::Cod, {}, {}), ContractError);
}

TEST_CASE("f_measure_max monotone under threshold refinement") {
    // the 256-threshold max can only exceed any coarser subset's max
    Prng rng(77);
    auto [pred, gt] = random_pair(rng);
    double coarse = 0.0;
    for (int t = 0; t <= 255; t += 32) {
        const double thr = double(t) / 255.0;
        std::int64_t tp = 0, pp = 0, nfg = 0;
        for (std::int64_t i = 0; i < 64; ++i) {
            const bool on = pred[i] > thr;
            const bool g = gt[i] > 0.5;
            tp += on && g;
            pp += on;
            nfg += g;
        }
        const double p = pp ? double(tp) / double(pp) : 0.0;
        const double r = double(tp) / double(nfg);
        if (p + r > 0) coarse = std::max(coarse, 1.3 * p * r / (0.3 * p + r));
    }
    CHECK(f_measure_max(pred, gt) >= coarse);
}
