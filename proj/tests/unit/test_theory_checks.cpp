#include "lpft/checks.hpp"
#include "lpft/errors.hpp"
#include "lpft/fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace lpft;

TEST_SUITE("theory_checks") {

TEST_CASE("JL failure bound") {
    CHECK(jl_failure_bound(0.3, 100) == doctest::Approx(4.0 * std::exp(-(0.09 - 0.027) * 25.0)).epsilon(1e-14));
    CHECK(jl_failure_bound(0.3, 100) == doctest::Approx(0.8285).epsilon(1e-3));
}

TEST_CASE("Wilson half-width") {
    CHECK(wilson_half_width(0.5, 100) == doctest::Approx(0.0962).epsilon(1e-3));
    CHECK(wilson_half_width(0.0, 1000) > 0.0);
    CHECK_THROWS(wilson_half_width(0.5, 0));
}

TEST_CASE("decomposition check passes on both fixtures") {
    const Dataset ds = fixtures::standard_dataset(1);
    CHECK(check_decomposition(fixtures::linear_model(1), ds).pass);
    CHECK(check_decomposition(fixtures::mlp_model(1), ds).pass);
}

TEST_CASE("orthogonal invariance requires a linear model") {
    const Dataset ds = fixtures::wide_dataset(1);
    const Eigen::MatrixXd probes = gen_orthogonal_probe(ds, 2, 1);
    CHECK(check_orthogonal_invariance(fixtures::wide_linear_model(1), ds, probes, 10, 0.1).pass);
    CHECK_THROWS_AS(check_orthogonal_invariance(fixtures::mlp_model(1), fixtures::standard_dataset(1), probes, 1, 0.1),
                    UnsupportedArchitectureError);
}

TEST_CASE("<A x, A x> has the chi-squared mean sigma^2 r") {
    const Eigen::VectorXd x = Eigen::Vector3d(0.6, 0.0, 0.8);
    const std::vector<double> s = lora_projection_samples(x, x, 4, 1.0, 10000, 3);
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    double var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    const double stderr_ = std::sqrt(var / static_cast<double>(s.size() - 1) / static_cast<double>(s.size()));
    CHECK(std::abs(mean - 4.0) <= 5.0 * stderr_);
}

TEST_CASE("LoRA check rejects too few trials") {
    LoraCheckConfig cfg;
    cfg.trials = 10;
    CHECK_THROWS_AS(check_lora_equivalence(fixtures::lora_base_model(1), fixtures::lora_dataset(1), cfg), ParameterError);
}

TEST_CASE("JL check at reduced trial count") {
    const CheckReport r = check_jl_lemma(jl_unit_pair(100, 0.3, 2000, 2, 0.7, 4));
    CHECK(r.pass);
    CHECK(r.violation_rate.value() < r.bound.value());
}

TEST_CASE("norm derivative closed form, single sample by hand") {
    ModelState m;
    m.feature = LinearFeatureParams{Eigen::MatrixXd::Identity(2, 2)};
    m.head.V = (Eigen::MatrixXd(2, 2) << 1, 0, 0, 1).finished();
    m.head.b = Eigen::Vector2d::Zero();
    Dataset ds;
    ds.samples = Eigen::RowVector2d(1, 2);
    ds.labels = {1};
    ds.splits = {Split::train};
    ds.num_classes = 2;
    // logits (1, 2); ||phi|| cos tau_k = <v_k / ||v_k||, phi> = (1, 2)
    const double p1 = 1.0 / (1.0 + std::exp(1.0));
    const Eigen::VectorXd d = norm_derivative_closed_form(m, ds);
    CHECK(std::abs(d(0) - (p1 - 1.0) * 1.0) <= 1e-10);
    CHECK(std::abs(d(1) - (1.0 - p1) * 2.0) <= 1e-10);
}

TEST_CASE("norm derivatives match finite differences") {
    CHECK(check_norm_derivatives(fixtures::linear_model(2), fixtures::standard_dataset(2)).pass);
}

TEST_CASE("perceptron oracle") {
    const Dataset separable = gen_gaussian_clusters(10, 2, 3, 10.0, 0.1, 1);
    CHECK(perceptron_separable(separable.samples, separable.labels, 2));
    const Dataset overlap = fixtures::overlap_dataset(1);
    CHECK_FALSE(perceptron_separable(overlap.samples, overlap.labels, 3));
}

TEST_CASE("norm growth refuses separable data") {
    const Dataset separable = gen_gaussian_clusters(10, 3, 4, 10.0, 0.1, 1);
    CHECK_THROWS_AS(check_norm_growth(fixtures::overlap_model(1), separable, NormGrowthConfig{}), PreconditionError);
}

TEST_CASE("log-log slope of an exact power law") {
    const std::vector<double> etas{1e-2, 5e-3, 2.5e-3};
    CHECK(log_log_slope(etas, {4e-4, 1e-4, 2.5e-5}) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("linearization errors need a decreasing positive grid") {
    const Dataset ds = fixtures::standard_dataset(1);
    CHECK_THROWS_AS(linearization_errors(fixtures::linear_model(1), ds, {1e-2, 5e-3}), PreconditionError);
    CHECK_THROWS_AS(linearization_errors(fixtures::linear_model(1), ds, {1e-2, 2e-2, 5e-3}), PreconditionError);
}

TEST_CASE("linearization errors halve with eta") {
    const CheckReport r = check_linearization_order(fixtures::linear_model(1), fixtures::standard_dataset(1), {1e-2, 5e-3, 2.5e-3});
    CHECK(r.pass);
    CHECK(r.value("logit_slope").value() == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("reports serialize non-finite values as strings") {
    CheckReport r;
    r.name = "x";
    r.measure("a", std::numeric_limits<double>::infinity());
    CHECK(r.to_json().find("\"inf\"") != std::string::npos);
}

}
