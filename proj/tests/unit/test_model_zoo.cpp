#include "helpers.hpp"
#include "lpft/errors.hpp"
#include "lpft/model.hpp"

#include <doctest.h>

#include <filesystem>

using namespace lpft;
using lpft::test::fd_jacobian;
using lpft::test::rel_err;

namespace {

ModelState hand_linear() {
    ModelState m;
    m.feature = LinearFeatureParams{Eigen::MatrixXd::Identity(2, 2)};
    m.head.V = (Eigen::MatrixXd(2, 2) << 2, 0, 0, 3).finished();
    m.head.b = Eigen::Vector2d(1, 1);
    return m;
}

ModelState random_model(Architecture kind, std::uint64_t seed) {
    ArchitectureSpec spec;
    spec.kind = kind == Architecture::lora ? Architecture::linear : kind;
    spec.mlp_hidden_layers = 2;
    spec.mlp_width = 5;
    ModelState m = init_model(spec, 3, 4, 3, {HeadInit::Kind::gaussian, 0.7}, seed);
    if (kind == Architecture::lora) {
        m = attach_lora(m, 2, 0.5, seed + 1);
        // Move B_lora off zero so the A_lora columns of the Jacobian are exercised.
        Eigen::VectorXd theta = m.flatten();
        for (Eigen::Index p = m.layout().feature.offset; p < theta.size(); ++p) theta(p) += 0.1 * std::sin(static_cast<double>(p));
        m = m.with_parameters(theta);
    }
    return m;
}

}  // namespace

TEST_SUITE("model_zoo") {

TEST_CASE("hand linear forward pass") {
    const ForwardResult r = forward(hand_linear(), Eigen::Vector2d(1, 1));
    CHECK(r.logits(0) == 3.0);
    CHECK(r.logits(1) == 4.0);
}

TEST_CASE("linear feature Jacobian is x kron I_h") {
    ModelState m;
    m.feature = LinearFeatureParams{Eigen::MatrixXd::Ones(2, 1)};
    m.head.V = Eigen::MatrixXd::Identity(2, 2);
    m.head.b = Eigen::Vector2d::Zero();
    const Eigen::MatrixXd j = feature_jacobian(m, Eigen::VectorXd::Constant(1, 3.0));
    CHECK(j.isApprox((Eigen::MatrixXd(2, 2) << 3, 0, 0, 3).finished()));
}

TEST_CASE("full Jacobian matches central differences") {
    for (Architecture kind : {Architecture::linear, Architecture::mlp, Architecture::lora}) {
        CAPTURE(to_string(kind));
        const ModelState m = random_model(kind, 3);
        const Eigen::VectorXd x = Eigen::Vector3d(0.4, -1.1, 0.7);
        CHECK(rel_err(full_jacobian(m, x), fd_jacobian(m, x)) <= 1e-5);
    }
}

TEST_CASE("feature VJP agrees with the explicit Jacobian") {
    for (Architecture kind : {Architecture::linear, Architecture::mlp, Architecture::lora}) {
        const ModelState m = random_model(kind, 5);
        const Eigen::VectorXd x = Eigen::Vector3d(-0.3, 0.2, 1.5);
        const Eigen::VectorXd g = Eigen::Vector4d(0.5, -1, 2, 0.25);
        CHECK(rel_err(feature_vjp(m, x, g), feature_jacobian(m, x).transpose() * g) <= 1e-13);
    }
}

TEST_CASE("LoRA attaches with B_lora = 0 and the base features unchanged") {
    const ModelState base = random_model(Architecture::linear, 7);
    const ModelState lora = attach_lora(base, 3, 0.25, 1);
    CHECK(lora.arch() == Architecture::lora);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 3);
    CHECK(features_of(lora, x) == features_of(base, x));
    CHECK(std::get<LoraAdapter>(lora.feature).lora_b.isZero(0.0));
    CHECK_THROWS_AS(attach_lora(random_model(Architecture::mlp, 1), 2, 1.0, 1), UnsupportedArchitectureError);
}

TEST_CASE("flatten and with_parameters are inverse") {
    for (Architecture kind : {Architecture::linear, Architecture::mlp, Architecture::lora}) {
        const ModelState m = random_model(kind, 9);
        CHECK(m.with_parameters(m.flatten()) == m);
        CHECK(m.layout().total == m.flatten().size());
    }
}

TEST_CASE("checkpoint round-trip is bit exact") {
    for (Architecture kind : {Architecture::linear, Architecture::mlp, Architecture::lora}) {
        const ModelState m = random_model(kind, 13);
        CHECK(parse_model(serialize_model(m)) == m);
        const auto path = std::filesystem::temp_directory_path() / "lpft_model_roundtrip.txt";
        save_model(m, path);
        const ModelState back = load_model(path);
        CHECK(back == m);
        CHECK(back.fingerprint() == m.fingerprint());
        std::filesystem::remove(path);
    }
}

TEST_CASE("dimension mismatches are reported") {
    CHECK_THROWS_AS(forward(hand_linear(), Eigen::Vector3d(1, 1, 1)), DimensionError);
}

}
