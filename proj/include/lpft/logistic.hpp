#pragma once

#include <Eigen/Dense>

#include <vector>

namespace lpft {

/// Result of an L2-regularized multinomial logistic fit.
struct MultinomialFit {
    Eigen::VectorXd weights;
    double objective = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
};

/// Minimizes (1/N) sum_i CE(z_i, y_i) + (lambda/2) w^T R w, where the logit
/// z_{i,k} is row i*C + k of `design` times w. `classes` are zero-based.
/// Damped Newton with backtracking; stops at gradient norm <= tol.
/// Throws ConvergenceError after max_iterations.
MultinomialFit fit_multinomial(const Eigen::MatrixXd& design, const std::vector<int>& classes, int num_classes,
                               const Eigen::MatrixXd& regularizer, double lambda, double tol = 1e-8,
                               int max_iterations = 100000);

/// Mean cross-entropy of the logits design * w.
double multinomial_loss(const Eigen::MatrixXd& design, const std::vector<int>& classes, int num_classes,
                        const Eigen::VectorXd& w);

/// Numerically stable softmax and log-sum-exp.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
double log_sum_exp(const Eigen::VectorXd& logits);
/// -log softmax(logits)[label], computed without forming the probabilities.
double cross_entropy(const Eigen::VectorXd& logits, int label);

/// Index of the largest entry; ties go to the lower index.
int argmax(const Eigen::VectorXd& v);

}  // namespace lpft
