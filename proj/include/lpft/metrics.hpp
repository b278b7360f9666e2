#pragma once

#include "lpft/model.hpp"
#include "lpft/report.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace lpft {

struct FdrResult {
    double value = 0.0;    // +inf when the within-class scatter vanishes
    bool infinite = false;
};

/// trace(S_B) / trace(S_W). Labels are 1-based; every class present needs at
/// least two samples and at least two classes must be present.
FdrResult fdr(const Eigen::MatrixXd& features, const std::vector<int>& labels);

struct FeatureChangeStats {
    double mean_cosine_similarity = 0.0;
    double mean_diff_norm = 0.0;
    std::optional<FdrResult> fdr;  // of features_after; empty when its preconditions fail
    int excluded_rows = 0;         // rows with a zero vector, skipped by the cosine mean
};

FeatureChangeStats feature_change_stats(const Eigen::MatrixXd& features_before, const Eigen::MatrixXd& features_after,
                                        const std::vector<int>& labels);

struct CalibrationBin {
    double mean_confidence = 0.0;
    double accuracy = 0.0;
    long count = 0;
};

struct CalibrationReport {
    double ece = 0.0;
    double mce = 0.0;
    double nll = 0.0;
    double accuracy = 0.0;
    std::optional<double> temperature;
    int n_bins = 15;
    std::vector<CalibrationBin> bins;
};

inline constexpr int kDefaultCalibrationBins = 15;

/// Equal-width confidence bins: bin i holds confidences in [i/n, (i+1)/n),
/// and a confidence of exactly 1 falls in the last bin.
CalibrationReport ece_mce(const Eigen::MatrixXd& probabilities, const std::vector<int>& labels,
                          int n_bins = kDefaultCalibrationBins);

/// Row-wise softmax(logits / T).
Eigen::MatrixXd apply_temperature(const Eigen::MatrixXd& logits, double temperature);

/// Mean negative log-likelihood of softmax(logits / T).
double temperature_nll(const Eigen::MatrixXd& logits, const std::vector<int>& labels, double temperature);

struct TemperatureFit {
    double temperature = 1.0;
    double nll = 0.0;
    double initial_nll = 0.0;
    long steps = 0;
};

/// Adam on T (lr 1e-3) from T = 1, early stopping on NLL with patience 10,
/// at most 1e5 steps. Returns the best T seen.
TemperatureFit fit_temperature(const Eigen::MatrixXd& logits, const std::vector<int>& labels);

/// softmax(f(x)/T) against the forward pass of the head (V/T, b/T), plus argmax agreement.
CheckReport head_scaling_equivalence(const ModelState& model, double temperature, const Eigen::MatrixXd& inputs);

}  // namespace lpft
