#include "lpft/errors.hpp"
#include "lpft/fixtures.hpp"
#include "lpft/logistic.hpp"
#include "lpft/metrics.hpp"
#include "lpft/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace lpft;

namespace {

// Logits with labels drawn from softmax(logits): calibrated by construction.
void calibrated_sample(long m, std::uint64_t seed, Eigen::MatrixXd& logits, std::vector<int>& labels) {
    CounterRng rng(seed, 1);
    logits.resize(m, 3);
    labels.resize(static_cast<std::size_t>(m));
    for (long i = 0; i < m; ++i) {
        for (int k = 0; k < 3; ++k) logits(i, k) = 2.0 * rng.normal();
        const Eigen::VectorXd p = softmax(logits.row(i).transpose());
        const double u = rng.uniform();
        int y = 0;
        double acc = p(0);
        while (u > acc && y < 2) acc += p(++y);
        labels[static_cast<std::size_t>(i)] = y + 1;
    }
}

}  // namespace

TEST_SUITE("metrics_calibration") {

TEST_CASE("FDR on the 1-D two-class fixture") {
    // means 1 and 11 around 6: S_B = 2*25 + 2*25 = 100, S_W = 4
    const Eigen::MatrixXd f = (Eigen::MatrixXd(4, 1) << 0, 2, 10, 12).finished();
    const FdrResult r = fdr(f, {1, 1, 2, 2});
    CHECK(r.value == doctest::Approx(25.0).epsilon(1e-14));
    CHECK_FALSE(r.infinite);
    CHECK(fdr(7.0 * f, {1, 1, 2, 2}).value == doctest::Approx(25.0).epsilon(1e-12));
}

TEST_CASE("FDR edge cases") {
    const Eigen::MatrixXd same = (Eigen::MatrixXd(4, 1) << 1, 3, 1, 3).finished();
    CHECK(fdr(same, {1, 1, 2, 2}).value == 0.0);
    const Eigen::MatrixXd tight = (Eigen::MatrixXd(4, 1) << 1, 1, 5, 5).finished();
    CHECK(fdr(tight, {1, 1, 2, 2}).infinite);
    CHECK_THROWS_AS(fdr(same, {1, 2, 2, 2}), PreconditionError);
    CHECK_THROWS_AS(fdr(same, {1, 1, 1, 1}), PreconditionError);
}

TEST_CASE("feature change statistics") {
    const Eigen::MatrixXd before = (Eigen::MatrixXd(3, 2) << 1, 0, 0, 1, 1, 1).finished();
    const FeatureChangeStats same = feature_change_stats(before, before, {1, 1, 2});
    CHECK(same.mean_cosine_similarity == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(same.mean_diff_norm == 0.0);
    const FeatureChangeStats flip = feature_change_stats(before, -before, {1, 1, 2});
    CHECK(std::abs(flip.mean_cosine_similarity + 1.0) <= 1e-12);
    CHECK(std::abs(flip.mean_diff_norm - 2.0 * (2.0 + std::sqrt(2.0)) / 3.0) <= 1e-12);
    const Eigen::MatrixXd after = (Eigen::MatrixXd(3, 2) << 0, 1, 0, 2, 2, 2).finished();
    const FeatureChangeStats hand = feature_change_stats(before, after, {1, 1, 2});
    CHECK(std::abs(hand.mean_cosine_similarity - 2.0 / 3.0) <= 1e-12);
    CHECK(std::abs(hand.mean_diff_norm - (2.0 * std::sqrt(2.0) + 1.0) / 3.0) <= 1e-12);
    CHECK_FALSE(hand.fdr.has_value());  // class 2 has a single sample
}

TEST_CASE("zero rows are excluded from the cosine mean") {
    const Eigen::MatrixXd before = (Eigen::MatrixXd(2, 2) << 0, 0, 1, 0).finished();
    const Eigen::MatrixXd after = (Eigen::MatrixXd(2, 2) << 1, 0, 1, 0).finished();
    const FeatureChangeStats s = feature_change_stats(before, after, {1, 2});
    CHECK(s.excluded_rows == 1);
    CHECK(s.mean_cosine_similarity == 1.0);
    CHECK_THROWS_AS(feature_change_stats(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2), {1, 2}), PreconditionError);
}

TEST_CASE("ECE and MCE: confident and half right") {
    const Eigen::MatrixXd p = (Eigen::MatrixXd(2, 2) << 1, 0, 1, 0).finished();
    const CalibrationReport r = ece_mce(p, {1, 2});
    CHECK(std::abs(r.ece - 0.5) <= 1e-12);
    CHECK(std::abs(r.mce - 0.5) <= 1e-12);
    CHECK(ece_mce(p, {1, 1}).ece == 0.0);
}

TEST_CASE("ECE and MCE: four samples over two bins") {
    // confidences 0.95 (both right) and 0.7 (one right): 0.5*0.05 + 0.5*0.2
    const Eigen::MatrixXd p = (Eigen::MatrixXd(4, 2) << 0.95, 0.05, 0.05, 0.95, 0.7, 0.3, 0.7, 0.3).finished();
    const CalibrationReport r = ece_mce(p, {1, 2, 1, 2}, 15);
    CHECK(std::abs(r.ece - 0.125) <= 1e-12);
    CHECK(std::abs(r.mce - 0.2) <= 1e-12);
    long total = 0;
    for (const auto& b : r.bins) total += b.count;
    CHECK(total == 4);
    CHECK(r.bins[14].count == 2);
    CHECK(r.bins[10].count == 2);
}

TEST_CASE("ECE rejects rows that are not distributions") {
    const Eigen::MatrixXd p = (Eigen::MatrixXd(1, 2) << 0.5, 0.6).finished();
    CHECK_THROWS_AS(ece_mce(p, {1}), ParameterError);
    CHECK_THROWS_AS(ece_mce(Eigen::MatrixXd::Constant(1, 2, 0.5), {1}, 0), ParameterError);
}

TEST_CASE("temperature recovers T = 1 and T = 2 on calibrated logits") {
    Eigen::MatrixXd logits;
    std::vector<int> labels;
    calibrated_sample(10000, 42, logits, labels);
    CHECK(std::abs(fit_temperature(logits, labels).temperature - 1.0) <= 0.05);
    CHECK(std::abs(fit_temperature(2.0 * logits, labels).temperature - 2.0) <= 0.05);
}

TEST_CASE("a single confident sample drives T below 1") {
    const Eigen::MatrixXd logits = (Eigen::MatrixXd(1, 2) << 2, 0).finished();
    const TemperatureFit f = fit_temperature(logits, {1});
    CHECK(f.temperature < 1.0);
    CHECK(f.nll < f.initial_nll);
}

TEST_CASE("apply_temperature matches scaling the head") {
    const ModelState m = fixtures::linear_model(1);
    const Eigen::MatrixXd xs = fixtures::standard_dataset(1).samples;
    for (double t : {0.25, 0.5, 1.0, 2.0, 10.0}) {
        const CheckReport r = head_scaling_equivalence(m, t, xs);
        CHECK(r.pass);
        CHECK(r.value("max_probability_deviation").value() <= 1e-12);
        CHECK(r.value("argmax_mismatches").value() == 0.0);
    }
    CHECK_THROWS_AS(apply_temperature(Eigen::MatrixXd::Zero(1, 2), 0.0), ParameterError);
}

}
