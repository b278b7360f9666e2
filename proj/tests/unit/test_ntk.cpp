#include "helpers.hpp"
#include "lpft/errors.hpp"
#include "lpft/fixtures.hpp"
#include "lpft/ntk.hpp"
#include "lpft/training.hpp"

#include <doctest.h>

using namespace lpft;
using lpft::test::max_abs;
using lpft::test::rel_err;

namespace {

ModelState identity_linear(int d) {
    ModelState m;
    m.feature = LinearFeatureParams{Eigen::MatrixXd::Identity(d, d)};
    m.head.V = Eigen::MatrixXd::Identity(d, d);
    m.head.b = Eigen::VectorXd::Zero(d);
    return m;
}

ModelState scaled_head(ModelState m, double s) {
    m.head.V *= s;
    return m;
}

}  // namespace

TEST_SUITE("ntk_engine") {

TEST_CASE("orthogonal inputs give a zero F block") {
    Eigen::MatrixXd xs(2, 2);
    xs << 1, 0, 0, 1;
    const KernelDecomposition k = compute_decomposition(identity_linear(2), xs);
    CHECK(k.f_block(0, 1).isZero(0.0));
    CHECK(k.f_block(0, 0).isApprox(Eigen::MatrixXd::Identity(2, 2)));
}

TEST_CASE("P + F equals the brute-force J J^T") {
    const Dataset ds = fixtures::standard_dataset(1);
    for (const ModelState& m : {fixtures::linear_model(1), fixtures::mlp_model(1)}) {
        const KernelDecomposition k = compute_decomposition(m, ds.samples);
        CHECK(max_abs(k.total() - brute_force_ntk(m, ds.samples)) <= 1e-10);
        CHECK(k.anchor == m.fingerprint());
    }
}

TEST_CASE("P blocks are (<phi, phi'> + 1) I_C") {
    const ModelState m = fixtures::mlp_model(2);
    const Dataset ds = fixtures::standard_dataset(2);
    const KernelDecomposition k = compute_decomposition(m, ds.samples);
    const Eigen::MatrixXd phi = features_of(m, ds.samples);
    const double g = phi.row(3).dot(phi.row(7)) + 1.0;
    CHECK(rel_err(k.p_block(3, 7), g * Eigen::MatrixXd::Identity(3, 3)) <= 1e-14);
}

TEST_CASE("linear phi kernel closed form: ||x||^2 I_h") {
    const Eigen::VectorXd x = Eigen::Vector2d(1, 2);
    CHECK(linear_phi_kernel_closed_form(x, x, 3).isApprox(5.0 * Eigen::MatrixXd::Identity(3, 3)));
    const ModelState m = fixtures::linear_model(3);
    const Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(8, -1, 1);
    const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(8, 2, 0.5);
    CHECK(rel_err(compute_phi_kernel(m, a, b), linear_phi_kernel_closed_form(a, b, 16)) <= 1e-14);
    CHECK(rel_err(ft_component(m, a.transpose(), b.transpose()), linear_ft_block_closed_form(a, b, m.head.V)) <= 1e-13);
}

TEST_CASE("MLP phi kernel matches finite-difference Jacobians") {
    const ModelState m = fixtures::mlp_model(4);
    const Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(8, -0.5, 0.5);
    const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(8, 1, -1);
    auto fd = [&](const Eigen::VectorXd& x) {
        const Eigen::VectorXd theta = m.flatten_feature();
        Eigen::MatrixXd j(m.feature_dim(), theta.size());
        for (Eigen::Index p = 0; p < theta.size(); ++p) {
            Eigen::VectorXd up = theta, down = theta;
            up(p) += 1e-6;
            down(p) -= 1e-6;
            j.col(p) = (forward(m.with_feature_parameters(up), x).features - forward(m.with_feature_parameters(down), x).features) / 2e-6;
        }
        return j;
    };
    CHECK(rel_err(compute_phi_kernel(m, a, b), fd(a) * fd(b).transpose()) <= 1e-5);
}

TEST_CASE("LoRA F at init is <A x, A x'> V0 V0^T") {
    const ModelState base = fixtures::linear_model(5);
    const ModelState lora = attach_lora(base, 4, 0.5, 17);
    const Eigen::MatrixXd a = std::get<LoraAdapter>(lora.feature).lora_a;
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(8, -1, 2);
    const Eigen::VectorXd x2 = Eigen::VectorXd::LinSpaced(8, 0.3, -0.6);
    const Eigen::MatrixXd expected = (a * x).dot(a * x2) * base.head.V * base.head.V.transpose();
    CHECK(rel_err(ft_component(lora, x.transpose(), x2.transpose()), expected) <= 1e-13);
    CHECK(pretrain_component(lora, x.transpose(), x2.transpose()) == pretrain_component(base, x.transpose(), x2.transpose()));
}

TEST_CASE("head scaling: F by s^2, P bit-identical") {
    const Dataset ds = fixtures::standard_dataset(6);
    for (const ModelState& m : {fixtures::linear_model(6), fixtures::mlp_model(6)}) {
        const KernelDecomposition k = compute_decomposition(m, ds.samples);
        for (double s : {0.1, 3.0, 50.0}) {
            const KernelDecomposition ks = compute_decomposition(scaled_head(m, s), ds.samples);
            CHECK(ks.P == k.P);
            CHECK(max_abs(ks.F - s * s * k.F) <= 1e-12 * max_abs(s * s * k.F));
        }
    }
}

TEST_CASE("with fixed residuals the predicted feature delta scales by s") {
    const Dataset ds = fixtures::standard_dataset(7);
    const ModelState m = fixtures::linear_model(7);
    const Eigen::MatrixXd delta = residuals(m, ds);
    const Eigen::MatrixXd probes = ds.samples.topRows(4);
    const LinearizedPrediction base = linearized_one_epoch(m, ds, 1e-2, probes, delta);
    const LinearizedPrediction scaled = linearized_one_epoch(scaled_head(m, 4.0), ds, 1e-2, probes, delta);
    CHECK(max_abs(scaled.feature_delta - 4.0 * base.feature_delta) <= 1e-12 * max_abs(4.0 * base.feature_delta));
}

TEST_CASE("kernel statistics of a rank-one outer product") {
    const Eigen::VectorXd u = Eigen::Vector3d(2, 0, 0);
    const KernelStats s = kernel_stats(u * u.transpose());
    CHECK(s.rank == 1);
    CHECK(s.frobenius_norm == doctest::Approx(4.0).epsilon(1e-14));
    REQUIRE(s.normalized_singular_values.size() == 1);
    CHECK(s.normalized_singular_values[0] == 1.0);
}

TEST_CASE("rank of P is C times the rank of the Gram-plus-one matrix") {
    const ModelState m = fixtures::linear_model(8);
    const Eigen::MatrixXd xs = fixtures::standard_dataset(8).samples.topRows(5);
    const Eigen::MatrixXd phi = features_of(m, xs);
    const Eigen::MatrixXd gram = phi * phi.transpose() + Eigen::MatrixXd::Ones(5, 5);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(gram);
    const auto sv = svd.singularValues();
    const int gram_rank = static_cast<int>((sv.array() > 1e-10 * sv(0)).count());
    CHECK(kernel_stats(pretrain_component(m, xs, xs)).rank == 3 * gram_rank);
}

TEST_CASE("FT ratio is in [0, 1] for a linear model and skips degenerate rows") {
    const Dataset ds = fixtures::standard_dataset(9);
    const ModelState m = fixtures::linear_model(9);
    const FtRatio r = ft_ratio(compute_decomposition(m, ds.samples), residuals(m, ds));
    CHECK(r.ratio > 0.0);
    CHECK(r.ratio <= 1.0);
    CHECK(r.used == 20);
    const KernelDecomposition k = compute_decomposition(m, ds.samples);
    CHECK_THROWS_AS(ft_ratio(k, Eigen::MatrixXd::Zero(20, 3)), PreconditionError);
}

}
