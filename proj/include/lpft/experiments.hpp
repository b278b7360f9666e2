#pragma once

#include "lpft/dataset.hpp"
#include "lpft/model.hpp"
#include "lpft/training.hpp"

#include <string>
#include <vector>

namespace lpft {

/// Head-norm grid of the classifier scaling sweep.
const std::vector<double>& default_norm_scales();

struct SweepRow {
    double scale = 1.0;
    double feature_diff = 0.0;  // mean ||phi_after - phi_start||, NaN when training diverged
    double start_head_norm = 0.0;
    double final_loss = 0.0;
    double final_accuracy = 0.0;
    bool diverged = false;
    bool baseline = false;
};

/// For each scale s, multiplies (V, b) by s where fine-tuning starts (after
/// the LP stage for two-stage modes), runs the fine-tuning stage and records
/// the mean feature change over the training rows.
std::vector<SweepRow> head_norm_sweep(const ModelState& model, const Dataset& data, const std::vector<double>& scales,
                                      const TrainConfig& config);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace lpft
