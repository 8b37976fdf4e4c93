#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "dbg4eth/calibration.hpp"
#include "dbg4eth/serialize.hpp"
#include "oracles.hpp"

using namespace dbg4eth;

namespace {

// Bernoulli(p_i) labels for a given confidence vector.
std::vector<int> bernoulli_labels(const std::vector<double>& probs, uint64_t seed) {
    Rng rng(seed);
    std::vector<int> y;
    y.reserve(probs.size());
    for (double p : probs) y.push_back(rng.uniform() < p ? 1 : 0);
    return y;
}

std::vector<double> uniform_confidences(size_t n, uint64_t seed, double lo = 0.05,
                                        double hi = 0.95) {
    Rng rng(seed);
    std::vector<double> c;
    c.reserve(n);
    for (size_t i = 0; i < n; ++i) c.push_back(lo + (hi - lo) * rng.uniform());
    return c;
}

}  // namespace

TEST_CASE("confidence standardization hits the documented anchor points", "[calibration]") {
    std::vector<double> raw{1.0, 2.0, 3.0, 4.0};
    ConfidenceStats st = fit_confidence_stats(raw);
    CHECK(st.mu == Catch::Approx(2.5));
    CHECK(st.s == Catch::Approx(std::sqrt(1.25)));
    CHECK(confidence_from_raw(st.mu, st) == Catch::Approx(0.5));
    CHECK(confidence_from_raw(st.mu + st.s, st) == Catch::Approx(1.0 / (1.0 + std::exp(-1.0))));
    CHECK(confidence_from_raw(st.mu - st.s, st) == Catch::Approx(1.0 / (1.0 + std::exp(1.0))));

    // Constant sample degenerates to 0.5 everywhere.
    ConfidenceStats flat = fit_confidence_stats({7.0, 7.0, 7.0});
    CHECK(flat.s == 0.0);
    CHECK(confidence_from_raw(7.0, flat) == 0.5);
    CHECK(confidence_from_raw(-100.0, flat) == 0.5);

    CHECK_THROWS_AS(fit_confidence_stats({}), ValidationError);
}

TEST_CASE("standardized confidences stay strictly inside the unit interval", "[calibration]") {
    Rng rng(31);
    std::vector<double> raw;
    for (int i = 0; i < 50; ++i) raw.push_back(1000.0 * (rng.uniform() - 0.5));
    ConfidenceStats st = fit_confidence_stats(raw);
    for (double v : raw) {
        double c = confidence_from_raw(v, st);
        CHECK(c > 0.0);
        CHECK(c < 1.0);
    }
}

TEST_CASE("expected calibration error matches hand-computed bins", "[calibration]") {
    // Perfect confidence, perfect labels.
    CHECK(compute_ece(std::vector<double>(4, 1.0), {1, 1, 1, 1}) == Catch::Approx(0.0));

    // One bin: 10 samples at 0.8 with 6 positives.
    std::vector<double> c(10, 0.8);
    std::vector<int> y{1, 1, 1, 1, 1, 1, 0, 0, 0, 0};
    CHECK(compute_ece(c, y) == Catch::Approx(0.2));

    // Two bins, each carrying half the mass and 0.05 gap.
    std::vector<double> c2;
    std::vector<int> y2;
    for (int i = 0; i < 5; ++i) {
        c2.push_back(0.05);
        y2.push_back(0);
    }
    for (int i = 0; i < 5; ++i) {
        c2.push_back(0.95);
        y2.push_back(1);
    }
    CHECK(compute_ece(c2, y2) == Catch::Approx(0.05));
}

TEST_CASE("expected calibration error input validation", "[calibration]") {
    CHECK_THROWS_AS(compute_ece({}, {}), ValidationError);
    CHECK_THROWS_AS(compute_ece({0.5}, {1, 0}), ValidationError);
    CHECK_THROWS_AS(compute_ece({1.5}, {1}), ValidationError);
    CHECK_THROWS_AS(compute_ece({-0.1}, {0}), ValidationError);
    CHECK_THROWS_AS(compute_ece({0.5}, {1}, 0), ValidationError);
}

TEST_CASE("expected calibration error agrees with the reference and is stable", "[calibration]") {
    Rng rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        size_t n = 5 + static_cast<size_t>(rng.uniform_int(0, 60));
        std::vector<double> conf;
        std::vector<int> labels;
        for (size_t i = 0; i < n; ++i) {
            conf.push_back(rng.uniform());
            labels.push_back(rng.uniform() < 0.5 ? 1 : 0);
        }
        double got = compute_ece(conf, labels);
        CHECK(got == Catch::Approx(oracle::ece_reference(conf, labels, 10)).margin(1e-12));
        CHECK(got >= 0.0);
        CHECK(got <= 1.0);

        // Permuting samples leaves the metric unchanged.
        std::vector<int> order(n);
        for (size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
        rng.shuffle(order);
        std::vector<double> pc(n);
        std::vector<int> pl(n);
        for (size_t i = 0; i < n; ++i) {
            pc[i] = conf[static_cast<size_t>(order[i])];
            pl[i] = labels[static_cast<size_t>(order[i])];
        }
        CHECK(compute_ece(pc, pl) == Catch::Approx(got).margin(1e-12));
    }
}

TEST_CASE("temperature fit recovers unity on already-calibrated data", "[calibration]") {
    std::vector<double> conf = uniform_confidences(2000, 41);
    std::vector<int> labels = bernoulli_labels(conf, 43);
    Calibrator c = fit_calibrator(CalibratorMethod::kTemperature, conf, labels);
    CHECK(c.temperature > 0.9);
    CHECK(c.temperature < 1.1);
}

TEST_CASE("temperature application anchors", "[calibration]") {
    Calibrator unit;
    unit.method = CalibratorMethod::kTemperature;
    unit.temperature = 1.0;
    for (double p : {0.1, 0.3, 0.5, 0.77, 0.95})
        CHECK(apply_calibrator(unit, p) == Catch::Approx(p).margin(1e-12));

    Calibrator hot;
    hot.method = CalibratorMethod::kTemperature;
    hot.temperature = 1e9;
    for (double p : {0.01, 0.4, 0.99})
        CHECK(apply_calibrator(hot, p) == Catch::Approx(0.5).margin(1e-6));
}

TEST_CASE("histogram lookup follows the fitted bins", "[calibration]") {
    Calibrator c;
    c.method = CalibratorMethod::kHistogram;
    c.bin_edges = {0.0, 0.5, 1.0};
    c.bin_values = {0.2, 0.9};
    CHECK(apply_calibrator(c, 0.7) == Catch::Approx(0.9));
    CHECK(apply_calibrator(c, 0.2) == Catch::Approx(0.2));
    CHECK(apply_calibrator(c, 0.5) == Catch::Approx(0.9));  // bins are [lo, hi)
    CHECK(apply_calibrator(c, 1.0) == Catch::Approx(0.9));  // last bin closed above
}

TEST_CASE("a histogram bin holding only positives maps to rate one", "[calibration]") {
    // Low cluster all-negative, high cluster all-positive; the top bins are pure.
    std::vector<double> conf;
    std::vector<int> labels;
    Rng rng(47);
    for (int i = 0; i < 40; ++i) {
        conf.push_back(0.05 + 0.1 * rng.uniform());
        labels.push_back(0);
    }
    for (int i = 0; i < 40; ++i) {
        conf.push_back(0.85 + 0.1 * rng.uniform());
        labels.push_back(1);
    }
    Calibrator c = fit_calibrator(CalibratorMethod::kHistogram, conf, labels);
    CHECK(apply_calibrator(c, 0.9) == Catch::Approx(1.0));
    CHECK(apply_calibrator(c, 0.1) == Catch::Approx(0.0));
}

TEST_CASE("isotonic fit is a no-op on monotone points", "[calibration]") {
    std::vector<double> conf{0.1, 0.2, 0.3, 0.6, 0.7, 0.8};
    std::vector<int> labels{0, 0, 0, 1, 1, 1};
    Calibrator c = fit_calibrator(CalibratorMethod::kIsotonic, conf, labels);
    for (size_t i = 0; i < conf.size(); ++i)
        CHECK(apply_calibrator(c, conf[i]) == Catch::Approx(double(labels[i])).margin(1e-12));
    // Interpolation between the 0.3 -> 0 and 0.6 -> 1 points.
    CHECK(apply_calibrator(c, 0.45) == Catch::Approx(0.5));
    // Out-of-range inputs clamp to the boundary values.
    CHECK(apply_calibrator(c, 0.01) == Catch::Approx(0.0));
    CHECK(apply_calibrator(c, 0.99) == Catch::Approx(1.0));
}

TEST_CASE("isotonic pooling averages violating runs", "[calibration]") {
    // y = {1, 0} must pool to {0.5, 0.5}.
    Calibrator c = fit_calibrator(CalibratorMethod::kIsotonic, {0.3, 0.7}, {1, 0});
    CHECK(apply_calibrator(c, 0.3) == Catch::Approx(0.5));
    CHECK(apply_calibrator(c, 0.7) == Catch::Approx(0.5));
}

TEST_CASE("fitting rejects degenerate inputs", "[calibration]") {
    std::vector<double> ok{0.2, 0.8};
    CHECK_THROWS_AS(fit_calibrator(CalibratorMethod::kPlatt, {}, {}), ValidationError);
    CHECK_THROWS_AS(fit_calibrator(CalibratorMethod::kPlatt, ok, {1}), ValidationError);
    CHECK_THROWS_AS(fit_calibrator(CalibratorMethod::kPlatt, {0.0, 0.5}, {0, 1}),
                    ValidationError);
    CHECK_THROWS_AS(fit_calibrator(CalibratorMethod::kPlatt, {0.5, 1.0}, {0, 1}),
                    ValidationError);
    double nan = std::nan("");
    CHECK_THROWS_AS(fit_calibrator(CalibratorMethod::kPlatt, {nan, 0.5}, {0, 1}),
                    ValidationError);
    // Single-class labels cannot support any of the fits.
    CHECK_THROWS_AS(fit_calibrator(CalibratorMethod::kIsotonic, ok, {1, 1}), ValidationError);
    CHECK_THROWS_AS(fit_calibrator(CalibratorMethod::kTemperature, ok, {0, 0}), ValidationError);
}

TEST_CASE("unfitted non-parametric calibrators refuse to apply", "[calibration]") {
    Calibrator h;
    h.method = CalibratorMethod::kHistogram;
    CHECK_THROWS_AS(apply_calibrator(h, 0.5), NotFittedError);
    Calibrator iso;
    iso.method = CalibratorMethod::kIsotonic;
    CHECK_THROWS_AS(apply_calibrator(iso, 0.5), NotFittedError);
    Calibrator bbq;
    bbq.method = CalibratorMethod::kBbq;
    CHECK_THROWS_AS(apply_calibrator(bbq, 0.5), NotFittedError);
}

TEST_CASE("parametric and isotonic applies preserve score order", "[calibration]") {
    std::vector<double> conf = uniform_confidences(300, 53);
    std::vector<int> labels = bernoulli_labels(conf, 59);
    std::vector<double> grid;
    for (int i = 1; i < 100; ++i) grid.push_back(i / 100.0);

    for (CalibratorMethod m : {CalibratorMethod::kTemperature, CalibratorMethod::kPlatt,
                               CalibratorMethod::kBeta, CalibratorMethod::kIsotonic}) {
        Calibrator c = fit_calibrator(m, conf, labels);
        double prev = -1.0;
        for (double p : grid) {
            double q = apply_calibrator(c, p);
            CHECK(q >= prev - 1e-12);
            CHECK(q >= 0.0);
            CHECK(q <= 1.0);
            prev = q;
        }
        if (m == CalibratorMethod::kBeta) {
            CHECK(c.beta_a >= 0.0);
            CHECK(c.beta_b >= 0.0);
        }
    }
}

TEST_CASE("all six fits are deterministic and map into the unit interval", "[calibration]") {
    std::vector<double> conf = uniform_confidences(200, 61);
    std::vector<int> labels = bernoulli_labels(conf, 67);
    for (CalibratorMethod m : all_calibrator_methods()) {
        Calibrator a = fit_calibrator(m, conf, labels);
        Calibrator b = fit_calibrator(m, conf, labels);
        for (double p : {0.03, 0.2, 0.41, 0.55, 0.78, 0.97}) {
            double qa = apply_calibrator(a, p);
            CHECK(qa == apply_calibrator(b, p));
            CHECK(qa >= 0.0);
            CHECK(qa <= 1.0);
        }
    }
}

TEST_CASE("adaptive weights follow the delta-ECE shares", "[calibration]") {
    std::vector<double> outs{0.9, 0.7, 0.1, 0.2, 0.3, 0.4};

    WeightedCombination even = adaptive_weighting(std::vector<double>(6, 1.0), outs);
    for (double a : even.alpha) CHECK(a == Catch::Approx(1.0 / 6.0));

    // Two carriers with equal shares: P = 0.5 * 0.9 + 0.5 * 0.7.
    WeightedCombination two =
        adaptive_weighting({0.02, 0.02, 0.0, 0.0, 0.0, 0.0}, outs);
    CHECK(two.alpha[0] == Catch::Approx(0.5));
    CHECK(two.alpha[1] == Catch::Approx(0.5));
    CHECK(two.alpha[2] == Catch::Approx(0.0));
    CHECK(two.p == Catch::Approx(0.8));
    CHECK_FALSE(two.clamped);
}

TEST_CASE("negative improvements produce negative weights that still sum to one", "[calibration]") {
    WeightedCombination wc = weighted_combination({-0.01, 0.03}, {0.5, 0.5});
    REQUIRE(wc.alpha.size() == 2);
    CHECK(wc.alpha[0] == Catch::Approx(-0.5));
    CHECK(wc.alpha[1] == Catch::Approx(1.5));
    CHECK(wc.alpha[0] + wc.alpha[1] == Catch::Approx(1.0).margin(1e-9));
    CHECK(wc.p == Catch::Approx(0.5));

    // Negative weights can push the affine combination outside [0,1].
    WeightedCombination clamped = weighted_combination({-0.01, 0.03}, {0.0, 0.9});
    CHECK(clamped.p == 1.0);
    CHECK(clamped.clamped);
    WeightedCombination floor = weighted_combination({-0.01, 0.03}, {0.9, 0.0});
    CHECK(floor.p == 0.0);
    CHECK(floor.clamped);
}

TEST_CASE("weight normalization holds across random delta vectors", "[calibration]") {
    Rng rng(71);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> delta(6), outs(6);
        for (int i = 0; i < 6; ++i) {
            delta[static_cast<size_t>(i)] = 0.2 * (rng.uniform() - 0.3);
            outs[static_cast<size_t>(i)] = rng.uniform();
        }
        double total = 0.0;
        for (double d : delta) total += d;
        if (std::fabs(total) < 1e-6) continue;
        WeightedCombination wc = adaptive_weighting(delta, outs);
        double s = 0.0;
        for (double a : wc.alpha) s += a;
        CHECK(s == Catch::Approx(1.0).margin(1e-9));
        CHECK(wc.p >= 0.0);
        CHECK(wc.p <= 1.0);
    }
}

TEST_CASE("vanishing total improvement falls back to uniform weights", "[calibration]") {
    WeightedCombination wc =
        adaptive_weighting({1e-7, -1e-7, 5e-8, -5e-8, 0.0, 0.0}, {1.0, 0.0, 1.0, 0.0, 1.0, 0.0});
    for (double a : wc.alpha) CHECK(a == Catch::Approx(1.0 / 6.0));
    CHECK(wc.p == Catch::Approx(0.5));
}

TEST_CASE("the six-method ensemble op rejects other arities", "[calibration]") {
    CHECK_THROWS_AS(adaptive_weighting({0.1, 0.2}, {0.5, 0.5}), ValidationError);
    CHECK_THROWS_AS(adaptive_weighting(std::vector<double>(7, 0.1), std::vector<double>(7, 0.5)),
                    ValidationError);
    CHECK_THROWS_AS(weighted_combination({}, {}), ValidationError);
    CHECK_THROWS_AS(weighted_combination({0.1}, {0.5, 0.5}), ValidationError);
}

TEST_CASE("branch calibration reduces error on an overconfident family", "[calibration]") {
    // conf = sigmoid(3 * logit(p_true)) sharpens toward the extremes.
    Rng rng(73);
    std::vector<double> raw_val, raw_test;
    std::vector<int> y_val, y_test;
    for (int i = 0; i < 1200; ++i) {
        double p_true = 0.02 + 0.96 * rng.uniform();
        double conf = sigmoid(3.0 * logit(p_true));
        int label = rng.uniform() < p_true ? 1 : 0;
        // Feed the raw channel with the logit so standardization re-derives a spread.
        if (i < 600) {
            raw_val.push_back(logit(conf));
            y_val.push_back(label);
        } else {
            raw_test.push_back(logit(conf));
            y_test.push_back(label);
        }
    }
    BranchCalibration bc = fit_branch_calibration(raw_val, y_val);
    REQUIRE(bc.calibrators.size() == 6);
    REQUIRE(bc.delta_ece.size() == 6);
    REQUIRE(bc.alpha.size() == 6);
    double asum = 0.0;
    for (double a : bc.alpha) asum += a;
    CHECK(asum == Catch::Approx(1.0).margin(1e-9));

    std::vector<double> before = confidence_from_raw(raw_test, bc.stats);
    std::vector<double> after;
    after.reserve(raw_test.size());
    for (double r : raw_test) after.push_back(bc.calibrate(r));
    for (double p : after) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
    CHECK(compute_ece(after, y_test) < compute_ece(before, y_test));
}

TEST_CASE("branch calibration requires aligned inputs", "[calibration]") {
    CHECK_THROWS_AS(fit_branch_calibration({0.1, 0.2}, {1}), ValidationError);
    BranchCalibration empty;
    CHECK_THROWS_AS(empty.calibrate(0.0), NotFittedError);
}

TEST_CASE("calibrators survive a serialization round trip", "[calibration]") {
    std::vector<double> conf = uniform_confidences(150, 79);
    std::vector<int> labels = bernoulli_labels(conf, 83);
    for (CalibratorMethod m : all_calibrator_methods()) {
        Calibrator c = fit_calibrator(m, conf, labels);
        Calibrator back = calibrator_from_json(calibrator_to_json(c));
        CHECK(back.fit_samples == c.fit_samples);
        for (double p : {0.05, 0.3, 0.5, 0.72, 0.94})
            CHECK(apply_calibrator(back, p) == apply_calibrator(c, p));
    }
}

TEST_CASE("branch calibration survives a serialization round trip", "[calibration]") {
    Rng rng(89);
    std::vector<double> raw;
    std::vector<int> labels;
    for (int i = 0; i < 120; ++i) {
        raw.push_back(2.0 * rng.uniform() - 1.0);
        labels.push_back(rng.uniform() < 0.5 ? 1 : 0);
    }
    BranchCalibration bc = fit_branch_calibration(raw, labels);
    BranchCalibration back = branch_calibration_from_json(branch_calibration_to_json(bc));
    CHECK(back.stats.mu == bc.stats.mu);
    CHECK(back.stats.s == bc.stats.s);
    CHECK(back.delta_ece == bc.delta_ece);
    CHECK(back.alpha == bc.alpha);
    for (double r : {-0.9, -0.2, 0.0, 0.4, 0.8}) CHECK(back.calibrate(r) == bc.calibrate(r));
}
