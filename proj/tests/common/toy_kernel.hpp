#pragma once

// 4-sample, 2-class kernel regression fixture. Reference values come from
// tests/oracles/kernel_regression_oracle.py and are frozen here.

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace lpft::test {

inline Eigen::MatrixXd toy_kernel() {
    Eigen::MatrixXd k(8, 8);
    k << 4, 0.2, 1, 0, 0, 0, 1, 0,
         0.2, 3, 0, 1, 0, 1, 0, 0,
         1, 0, 3, 0.2, 1, 0, 0, 0,
         0, 1, 0.2, 3, 0, 0, 0, 1,
         0, 0, 1, 0, 2, 0.2, 0.5, 0,
         0, 1, 0, 0, 0.2, 4, 0, 1,
         1, 0, 0, 0, 0.5, 0, 3, 0.2,
         0, 0, 0, 1, 0, 1, 0.2, 3;
    return k;
}

/// Two test points; only the per-class diagonal entries are read, the rest is filler.
inline Eigen::MatrixXd toy_test_kernel() {
    const double t11[2][4] = {{2, 0.5, 1, 0}, {0, 1, 0, 2}};
    const double t22[2][4] = {{0.5, 2, 0, 1}, {1, 0, 3, 0.5}};
    Eigen::MatrixXd k = Eigen::MatrixXd::Constant(4, 8, 7.0);
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 4; ++i) {
            k(j * 2, i * 2) = t11[j][i];
            k(j * 2 + 1, i * 2 + 1) = t22[j][i];
        }
    return k;
}

inline const std::vector<int> kToyLabels{1, 2, 1, 2};
inline constexpr double kToyLambda = 0.1;

inline constexpr std::array<double, 8> kToyAlpha{
    3.653788048898524e-01, -3.653788048898525e-01, -3.994903638183736e-01, 3.994903638183736e-01,
    3.844083457788624e-01, -3.844083457788622e-01, -3.779694064672280e-01, 3.779694064672280e-01};
inline constexpr double kToyObjective = 2.965297667122904e-01;
inline const std::vector<int> kToyTestLabels{2, 1};

}  // namespace lpft::test
