#pragma once

#include "lpft/dataset.hpp"
#include "lpft/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lpft {

enum class TrainMode { lp, ft, lora, lp_ft, lp_lora };
enum class LpSolver { gradient_descent, ridge_logistic };
/// How per-sample gradients are combined. `sum` makes one step reproduce the
/// linearized logit/feature updates verbatim; `mean` divides the step by N.
enum class Aggregation { sum, mean };

std::string_view to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view text);
std::string_view to_string(LpSolver solver);
LpSolver parse_lp_solver(std::string_view text);
std::string_view to_string(Aggregation agg);
Aggregation parse_aggregation(std::string_view text);

/// Lambda grid searched by cross-validation: 1e-4 ... 1e2.
const std::vector<double>& default_lambda_grid();

struct TrainConfig {
    TrainMode mode = TrainMode::ft;
    double learning_rate = 1e-2;
    int epochs = 100;
    LpSolver lp_solver = LpSolver::ridge_logistic;
    std::optional<double> lp_lambda;  // unset: 5-fold CV over default_lambda_grid()
    int lp_epochs = 100;              // gradient-descent LP steps (LP mode uses `epochs`)
    std::optional<double> lp_learning_rate;
    Aggregation aggregation = Aggregation::sum;
    int lora_rank = 1;
    double lora_variance = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Which parameter groups a gradient step may touch.
struct Trainable {
    bool head_weight = false;
    bool head_bias = false;
    bool feature = false;

    static Trainable head_only() { return {true, true, false}; }
    static Trainable all() { return {true, true, true}; }
    bool any() const { return head_weight || head_bias || feature; }
};

/// delta_i = e_{y_i} - softmax(f(x_i)), N x C.
Eigen::MatrixXd residuals(const ModelState& model, const Eigen::MatrixXd& inputs, const std::vector<int>& labels);
inline Eigen::MatrixXd residuals(const ModelState& model, const Dataset& data) {
    return residuals(model, data.samples, data.labels);
}

/// Mean cross-entropy (the empirical risk) and training accuracy.
double empirical_risk(const ModelState& model, const Dataset& data);
double accuracy(const ModelState& model, const Dataset& data);

/// sum_i J_i^T delta_i split per parameter group: the negative gradient of the
/// summed cross-entropy.
struct ParamDirection {
    Eigen::MatrixXd head_weight;
    Eigen::VectorXd head_bias;
    Eigen::VectorXd feature;
};
ParamDirection descent_direction(const ModelState& model, const Dataset& data);

/// One full-batch step theta <- theta + eta * sum_i J_i^T delta_i on the
/// trainable groups; other groups are copied bit-for-bit.
/// Throws DivergenceError if the update is non-finite.
ModelState gd_step(const ModelState& model, const Dataset& data, double eta, const Trainable& trainable);

struct TraceRecord {
    long step = 0;
    std::string phase;
    double loss = 0.0;
    double accuracy = 0.0;
    double head_weight_norm = 0.0;  // ||V||_F
    double head_bias_norm = 0.0;    // ||b||
    double mean_logit_norm = 0.0;
    double mean_feature_drift = 0.0;  // mean ||phi_t(x) - phi_0(x)|| over the training rows
};

struct TrainingTrace {
    std::vector<TraceRecord> records;
    ModelState final_model;
    std::optional<ModelState> lp_model;  // end of the LP stage in two-stage modes
    std::optional<double> lp_lambda;     // ridge strength actually used
    bool diverged = false;
    std::string message;
};

/// CSV column order of a trace export.
inline constexpr std::string_view kTraceCsvHeader =
    "step,phase,loss,accuracy,head_weight_norm,head_bias_norm,mean_logit_norm,mean_feature_drift";
std::string trace_to_csv(const TrainingTrace& trace);

/// Linear-probe head fitted by ridge logistic regression on frozen features.
HeadParams fit_ridge_head(const ModelState& model, const Dataset& data, double lambda);
/// Lambda with the lowest mean held-out cross-entropy over `folds` folds.
double cross_validate_lambda(const ModelState& model, const Dataset& data, const std::vector<double>& grid,
                             int folds, std::uint64_t seed);

/// Runs the configured mode on the train rows of `data`. Divergence stops the
/// run early and is reported through `diverged`, keeping the partial trace.
TrainingTrace train(const ModelState& model, const Dataset& data, const TrainConfig& config);

/// Right-hand sides of the one-step linearized logit and feature updates at
/// `probes`, computed from the anchor model's kernels and residuals.
struct LinearizedPrediction {
    Eigen::MatrixXd logit_delta;    // M x C: eta sum_i (P + F)(x, x_i) delta_i
    Eigen::MatrixXd feature_delta;  // M x h: eta sum_i Theta_phi(x, x_i) V0^T delta_i
};
LinearizedPrediction linearized_one_epoch(const ModelState& model, const Dataset& data, double eta,
                                          const Eigen::MatrixXd& probes);
/// Same with the residuals supplied instead of taken from `model`.
LinearizedPrediction linearized_one_epoch(const ModelState& model, const Dataset& data, double eta,
                                          const Eigen::MatrixXd& probes, const Eigen::MatrixXd& residuals);

}  // namespace lpft
