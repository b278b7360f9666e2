#pragma once

#include "lpft/dataset.hpp"
#include "lpft/model.hpp"
#include "lpft/ntk.hpp"
#include "lpft/report.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace lpft {

inline constexpr double kDecompositionTol = 1e-10;
inline constexpr double kMonteCarloSlack = 3.0;  // multiples of the Wilson half-width

/// 4 exp(-(eps^2 - eps^3) k / 4).
double jl_failure_bound(double epsilon, long k);

/// max |(P+F) - J J^T| over all entries.
CheckReport check_decomposition(const ModelState& model, const Dataset& data, double tol = kDecompositionTol);
/// Same comparison against a caller-supplied decomposition (used for fault injection).
CheckReport check_decomposition(const KernelDecomposition& decomp, const ModelState& model, const Dataset& data,
                                double tol = kDecompositionTol);

/// Largest ||phi_t(p) - phi_0(p)|| / ||p|| over the rows p of `points` after
/// `steps` full-batch steps on all parameters.
double max_relative_feature_drift(const ModelState& model, const Dataset& data, const Eigen::MatrixXd& points,
                                  int steps, double eta);

CheckReport check_orthogonal_invariance(const ModelState& linear_model, const Dataset& data,
                                        const Eigen::MatrixXd& probes, int steps, double eta);

struct LoraCheckConfig {
    int rank = 256;
    double variance = 1.0 / 256.0;
    double epsilon = 0.25;
    long trials = 1000;
    std::optional<double> norm_bound;  // c; defaults to the largest input norm
    std::uint64_t seed = 0;
};

/// <A x, A x2> for `trials` independent A with N(0, variance) entries, r rows.
std::vector<double> lora_projection_samples(const Eigen::VectorXd& x, const Eigen::VectorXd& x2, int rank,
                                            double variance, long trials, std::uint64_t seed);

CheckReport check_lora_equivalence(const ModelState& base_linear, const Dataset& data, const LoraCheckConfig& config);

struct JlCheckConfig {
    long k = 100;
    double epsilon = 0.3;
    long trials = 100000;
    Eigen::VectorXd u;
    Eigen::VectorXd v;
    std::optional<double> norm_bound;  // c; defaults to max(||u||, ||v||)
    std::uint64_t seed = 0;
};

/// Unit vectors in R^dim at the given angle.
JlCheckConfig jl_unit_pair(long k, double epsilon, long trials, int dim, double angle, std::uint64_t seed);

CheckReport check_jl_lemma(const JlCheckConfig& config);

/// sum_i ([softmax f(x_i)]_k - 1{k = y_i}) ||phi(x_i)|| cos tau_ki, for every k.
Eigen::VectorXd norm_derivative_closed_form(const ModelState& model, const Dataset& data);

CheckReport check_norm_derivatives(const ModelState& model, const Dataset& data);

/// Multi-class perceptron (with bias) on the given features; true when it
/// reaches zero training errors within `max_epochs`.
bool perceptron_separable(const Eigen::MatrixXd& features, const std::vector<int>& labels, int num_classes,
                          int max_epochs = 1000);

struct NormGrowthConfig {
    double lp_learning_rate = 0.005;
    double ft_learning_rate = 0.005;
    int steps = 500;
    int perceptron_epochs = 1000;
};

CheckReport check_norm_growth(const ModelState& model, const Dataset& data, const NormGrowthConfig& config);

struct LinearizationErrors {
    std::vector<double> etas;
    std::vector<double> logit_errors;
    std::vector<double> feature_errors;
};

LinearizationErrors linearization_errors(const ModelState& model, const Dataset& data, const std::vector<double>& etas);

/// Least-squares slope of log(err) against log(eta).
double log_log_slope(const std::vector<double>& etas, const std::vector<double>& errors);

CheckReport check_linearization_order(const ModelState& model, const Dataset& data, const std::vector<double>& etas);

}  // namespace lpft
