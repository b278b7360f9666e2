#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace lpft {

/// Coefficients of f_c(x) = sum_i alpha_(i,c) K[(x,c),(x_i,c)], indexed i*C+c.
struct KernelRegressionResult {
    Eigen::VectorXd alpha;
    double lambda = 0.0;
    int num_classes = 0;
    double train_accuracy = 0.0;
    std::optional<double> test_accuracy;
    double objective = 0.0;
    int iterations = 0;
};

/// Symmetrizes the kernel, rejects eigenvalues below -psd_tol * max(1, max|K|)
/// and clips the remaining negative ones to zero.
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& kernel, double psd_tol = 1e-8);

/// Minimizes the mean multinomial cross-entropy plus
/// (lambda/2) sum_c alpha_c^T K_cc alpha_c. Labels are 1-based. alpha is the
/// minimum-norm solution, lying in the range of each K_cc.
KernelRegressionResult fit_kernel_regression(const Eigen::MatrixXd& kernel_train, const std::vector<int>& labels,
                                             int num_classes, double lambda);

/// Logits (M x C) from a test-vs-train kernel of shape MC x NC.
Eigen::MatrixXd kernel_logits(const Eigen::MatrixXd& kernel_test_train, const KernelRegressionResult& result);

struct KernelPrediction {
    std::vector<int> labels;  // 1-based, ties toward the lower class
    std::optional<double> accuracy;
};

KernelPrediction predict_kernel_regression(const Eigen::MatrixXd& kernel_test_train, const KernelRegressionResult& result,
                                           const std::vector<int>& true_labels = {});

/// Fold-wise held-out cross-entropy; ties go to the earlier grid entry.
double cross_validate_kernel_lambda(const Eigen::MatrixXd& kernel_train, const std::vector<int>& labels,
                                    int num_classes, const std::vector<double>& grid, int folds, std::uint64_t seed);

}  // namespace lpft
