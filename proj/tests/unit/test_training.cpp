#include "helpers.hpp"
#include "lpft/errors.hpp"
#include "lpft/fixtures.hpp"
#include "lpft/logistic.hpp"
#include "lpft/training.hpp"

#include <doctest.h>

#include <cmath>

using namespace lpft;
using lpft::test::max_abs;

namespace {

ModelState two_by_two() {
    ModelState m;
    m.feature = LinearFeatureParams{Eigen::MatrixXd::Identity(2, 2)};
    m.head.V = Eigen::MatrixXd::Identity(2, 2);
    m.head.b = Eigen::Vector2d::Zero();
    return m;
}

Dataset single(const Eigen::VectorXd& x, int label, int classes) {
    Dataset ds;
    ds.samples = x.transpose();
    ds.labels = {label};
    ds.splits = {Split::train};
    ds.num_classes = classes;
    return ds;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("residuals match the high-precision oracle") {
    // tests/oracles/residual_oracle.py
    ModelState m;
    m.feature = LinearFeatureParams{Eigen::MatrixXd::Identity(3, 3)};
    m.head.V = Eigen::MatrixXd::Identity(3, 3);
    m.head.b = Eigen::Vector3d::Zero();
    const Eigen::MatrixXd d = residuals(m, Eigen::RowVector3d(1, 2, 3), {2});
    CHECK(d(0, 0) == doctest::Approx(-0.090030573170380457998).epsilon(1e-15));
    CHECK(d(0, 1) == doctest::Approx(0.75527152894520234753).epsilon(1e-15));
    CHECK(d(0, 2) == doctest::Approx(-0.66524095577482188953).epsilon(1e-15));
    CHECK(cross_entropy(Eigen::Vector3d(1, 2, 3), 1) == doctest::Approx(1.4076059644443803045).epsilon(1e-15));
}

TEST_CASE("cross-entropy stays accurate for confident predictions") {
    CHECK(cross_entropy(Eigen::Vector2d(50, 0), 0) == doctest::Approx(std::exp(-50.0)).epsilon(1e-12));
    CHECK(std::isfinite(cross_entropy(Eigen::Vector2d(1000, -1000), 1)));
}

TEST_CASE("single-sample descent direction matches the hand gradient") {
    const ModelState m = two_by_two();
    const Dataset ds = single(Eigen::Vector2d(1, 2), 1, 2);
    const double a = std::exp(1.0) / (1.0 + std::exp(1.0));
    const ParamDirection dir = descent_direction(m, ds);
    // delta = (a, -a), phi = x = (1, 2)
    CHECK(std::abs(dir.head_weight(0, 0) - a) <= 1e-12);
    CHECK(std::abs(dir.head_weight(0, 1) - 2 * a) <= 1e-12);
    CHECK(std::abs(dir.head_weight(1, 0) + a) <= 1e-12);
    CHECK(std::abs(dir.head_weight(1, 1) + 2 * a) <= 1e-12);
    CHECK(std::abs(dir.head_bias(0) - a) <= 1e-12);
    CHECK(std::abs(dir.head_bias(1) + a) <= 1e-12);
    // B row-major: V^T delta x^T = (a, -a)^T (1, 2)
    const Eigen::Vector4d expected(a, 2 * a, -a, -2 * a);
    CHECK(max_abs(dir.feature - expected) <= 1e-12);
}

TEST_CASE("gd_step leaves frozen groups bit-identical") {
    const ModelState m = fixtures::linear_model(1);
    const Dataset ds = fixtures::standard_dataset(1);
    const ModelState lp = gd_step(m, ds, 1e-2, Trainable::head_only());
    CHECK(lp.feature == m.feature);
    CHECK_FALSE(lp.head == m.head);
    const ModelState ft = gd_step(m, ds, 1e-2, Trainable::all());
    CHECK_FALSE(ft.feature == m.feature);
    CHECK(gd_step(m, ds, 0.0, Trainable::all()) == m);
    CHECK_THROWS_AS(gd_step(m, ds, 1e-2, Trainable{}), ParameterError);
}

TEST_CASE("LP with the ridge solver separates separable data") {
    const Dataset ds = gen_gaussian_clusters(10, 3, 8, 6.0, 0.5, 3);
    ModelState m = fixtures::linear_model(3);
    TrainConfig cfg;
    cfg.mode = TrainMode::lp;
    cfg.lp_lambda = 1e-3;
    const TrainingTrace t = train(m, ds, cfg);
    CHECK(accuracy(t.final_model, ds) == 1.0);
    CHECK(t.final_model.feature == m.feature);
    CHECK(t.lp_lambda.value() == 1e-3);
}

TEST_CASE("FT loss strictly decreases for the first 10 steps at small eta") {
    Dataset ds = fixtures::standard_dataset(2);
    TrainConfig cfg;
    cfg.mode = TrainMode::ft;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 10;
    const TrainingTrace t = train(fixtures::linear_model(2), ds, cfg);
    REQUIRE(t.records.size() == 11);
    for (std::size_t i = 1; i < t.records.size(); ++i) CHECK(t.records[i].loss < t.records[i - 1].loss);
}

TEST_CASE("LoRA training moves only the adapter") {
    const Dataset ds = fixtures::standard_dataset(3);
    TrainConfig cfg;
    cfg.mode = TrainMode::lora;
    cfg.epochs = 5;
    cfg.lora_rank = 2;
    const TrainingTrace t = train(fixtures::linear_model(3), ds, cfg);
    const auto& lora = std::get<LoraAdapter>(t.final_model.feature);
    CHECK(lora.base == std::get<LinearFeatureParams>(fixtures::linear_model(3).feature).B);
    CHECK_FALSE(lora.lora_b.isZero(0.0));
}

TEST_CASE("two-stage modes keep the LP model") {
    const Dataset ds = fixtures::standard_dataset(4);
    TrainConfig cfg;
    cfg.mode = TrainMode::lp_ft;
    cfg.epochs = 3;
    const TrainingTrace t = train(fixtures::linear_model(4), ds, cfg);
    REQUIRE(t.lp_model.has_value());
    CHECK(t.lp_model->feature == fixtures::linear_model(4).feature);
    CHECK(t.records.front().phase == "init");
    CHECK(t.records.back().phase == "ft");
}

TEST_CASE("divergence is reported with a partial trace") {
    const Dataset ds = fixtures::standard_dataset(5);
    TrainConfig cfg;
    cfg.mode = TrainMode::ft;
    cfg.learning_rate = 1e3;
    cfg.epochs = 200;
    const TrainingTrace t = train(fixtures::linear_model(5), ds, cfg);
    CHECK(t.diverged);
    CHECK(t.records.size() < 201);
}

TEST_CASE("mean aggregation equals sum aggregation with eta / N") {
    const Dataset ds = fixtures::standard_dataset(6);
    TrainConfig sum;
    sum.epochs = 3;
    sum.learning_rate = 1e-3;
    TrainConfig mean = sum;
    mean.aggregation = Aggregation::mean;
    mean.learning_rate = 1e-3 * 20;
    const auto a = train(fixtures::linear_model(6), ds, sum).final_model.flatten();
    const auto b = train(fixtures::linear_model(6), ds, mean).final_model.flatten();
    CHECK(max_abs(a - b) <= 1e-14);
}

TEST_CASE("single-sample linearized prediction matches block arithmetic") {
    ModelState m = two_by_two();
    m.head.V << 1, 2, -1, 0.5;
    m.head.b << 0.1, -0.2;
    const Dataset ds = single(Eigen::Vector2d(1, -1), 2, 2);
    const Eigen::RowVector2d probe(0.5, 2);
    const double eta = 0.01;
    const Eigen::VectorXd delta = residuals(m, ds).row(0).transpose();
    const Eigen::VectorXd x = ds.samples.row(0).transpose();
    const Eigen::VectorXd px = probe.transpose();
    const double inner = px.dot(x);  // <x, x_i>, and phi = x since B = I
    const Eigen::MatrixXd block = (inner + 1.0) * Eigen::MatrixXd::Identity(2, 2) + inner * m.head.V * m.head.V.transpose();
    const LinearizedPrediction p = linearized_one_epoch(m, ds, eta, probe);
    CHECK(max_abs(p.logit_delta.row(0).transpose() - eta * block * delta) <= 1e-12);
    CHECK(max_abs(p.feature_delta.row(0).transpose() - eta * inner * m.head.V.transpose() * delta) <= 1e-12);
}

TEST_CASE("trace CSV has the documented header and one row per record") {
    TrainConfig cfg;
    cfg.epochs = 4;
    const TrainingTrace t = train(fixtures::linear_model(7), fixtures::standard_dataset(7), cfg);
    const std::string csv = trace_to_csv(t);
    CHECK(csv.rfind(std::string(kTraceCsvHeader) + "\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
}

TEST_CASE("invalid configurations are rejected") {
    TrainConfig cfg;
    cfg.learning_rate = -1;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    CHECK_THROWS(parse_train_mode("sgd"));
    CHECK(parse_train_mode("lp-ft") == TrainMode::lp_ft);
}

}
