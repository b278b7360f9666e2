#include "lpft/errors.hpp"
#include "lpft/kernel_regression.hpp"
#include "toy_kernel.hpp"

#include <doctest.h>

using namespace lpft;
using namespace lpft::test;

TEST_SUITE("kernel_regression") {

TEST_CASE("toy fixture matches the convex-solver oracle") {
    const KernelRegressionResult r = fit_kernel_regression(toy_kernel(), kToyLabels, 2, kToyLambda);
    for (int i = 0; i < 8; ++i) CHECK(std::abs(r.alpha(i) - kToyAlpha[static_cast<std::size_t>(i)]) <= 1e-6);
    CHECK(r.objective == doctest::Approx(kToyObjective).epsilon(1e-10));
    CHECK(r.train_accuracy == 1.0);
    const KernelPrediction p = predict_kernel_regression(toy_test_kernel(), r);
    CHECK(p.labels == kToyTestLabels);
}

TEST_CASE("scaling K by s and lambda by s leaves labels unchanged") {
    const KernelRegressionResult base = fit_kernel_regression(toy_kernel(), kToyLabels, 2, kToyLambda);
    const auto labels = predict_kernel_regression(toy_test_kernel(), base).labels;
    for (double s : {1e-2, 0.5, 3.0, 1e3}) {
        const KernelRegressionResult r = fit_kernel_regression(s * toy_kernel(), kToyLabels, 2, s * kToyLambda);
        CHECK(predict_kernel_regression(s * toy_test_kernel(), r).labels == labels);
        CHECK(predict_kernel_regression(s * toy_kernel(), r).labels == kToyLabels);
        CHECK((s * r.alpha - base.alpha).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("a large identity kernel memorizes separable labels") {
    const std::vector<int> labels{1, 2, 3, 1, 2};
    const KernelRegressionResult r = fit_kernel_regression(1e3 * Eigen::MatrixXd::Identity(15, 15), labels, 3, 1e-4);
    CHECK(r.train_accuracy == 1.0);
}

TEST_CASE("heavy regularization drives alpha to zero") {
    const std::vector<int> labels{1, 1, 1, 2};
    const KernelRegressionResult r = fit_kernel_regression(toy_kernel(), labels, 2, 1e8);
    CHECK(r.alpha.cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(kernel_logits(toy_kernel(), r).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("predicting on the train kernel reproduces the train accuracy") {
    const KernelRegressionResult r = fit_kernel_regression(toy_kernel(), {1, 1, 2, 2}, 2, 1.0);
    CHECK(*predict_kernel_regression(toy_kernel(), r, {1, 1, 2, 2}).accuracy == r.train_accuracy);
}

TEST_CASE("zero test rows predict class 1") {
    const KernelRegressionResult r = fit_kernel_regression(toy_kernel(), kToyLabels, 2, kToyLambda);
    CHECK(predict_kernel_regression(Eigen::MatrixXd::Zero(6, 8), r).labels == std::vector<int>{1, 1, 1});
}

TEST_CASE("fits are bit-for-bit deterministic") {
    const auto a = fit_kernel_regression(toy_kernel(), kToyLabels, 2, kToyLambda).alpha;
    const auto b = fit_kernel_regression(toy_kernel(), kToyLabels, 2, kToyLambda).alpha;
    CHECK(a == b);
}

TEST_CASE("rank-deficient kernels still converge") {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(12, 2);
    for (int i = 0; i < 12; ++i) g.row(i) << std::cos(i), std::sin(0.3 * i);
    const std::vector<int> labels{1, 2, 1, 2, 2, 1};
    for (double lambda : {1e-4, 1e-2, 1.0}) CHECK_NOTHROW(fit_kernel_regression(g * g.transpose(), labels, 2, lambda));
}

TEST_CASE("PSD projection clips tiny negative eigenvalues and rejects large ones") {
    Eigen::MatrixXd k = Eigen::MatrixXd::Identity(2, 2);
    k(1, 1) = -1e-10;
    const Eigen::MatrixXd p = project_psd(k);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p).eigenvalues().minCoeff() >= -1e-15);
    k(1, 1) = -1e-3;
    CHECK_THROWS_AS(project_psd(k), PreconditionError);
    CHECK_THROWS_AS(fit_kernel_regression(k, {1}, 2, 1.0), PreconditionError);
}

TEST_CASE("dimension errors") {
    const KernelRegressionResult r = fit_kernel_regression(toy_kernel(), kToyLabels, 2, kToyLambda);
    CHECK_THROWS_AS(predict_kernel_regression(Eigen::MatrixXd::Zero(2, 6), r), DimensionError);
    CHECK_THROWS_AS(fit_kernel_regression(toy_kernel(), {1, 2, 1}, 2, 1.0), DimensionError);
}

TEST_CASE("cross-validation picks a grid value") {
    const std::vector<double> grid{1e-3, 1e-1, 10};
    const double l = cross_validate_kernel_lambda(toy_kernel(), kToyLabels, 2, grid, 2, 1);
    CHECK(std::find(grid.begin(), grid.end(), l) != grid.end());
}

}
