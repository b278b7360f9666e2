#include "lpft/experiments.hpp"

#include "lpft/errors.hpp"
#include "lpft/text_format.hpp"

#include <cmath>
#include <limits>

namespace lpft {

const std::vector<double>& default_norm_scales() {
    static const std::vector<double> scales{0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0};
    return scales;
}

std::vector<SweepRow> head_norm_sweep(const ModelState& model, const Dataset& data, const std::vector<double>& scales,
                                      const TrainConfig& config) {
    if (config.mode == TrainMode::lp) throw ParameterError("head_norm_sweep: LP mode has no fine-tuning stage");
    for (double s : scales)
        if (!(s > 0.0) || !std::isfinite(s)) throw ParameterError("head_norm_sweep: scales must be positive");

    const Dataset train_rows = data.select(Split::train);
    ModelState start = model;
    TrainConfig stage = config;
    if (config.mode == TrainMode::lp_ft || config.mode == TrainMode::lp_lora) {
        TrainConfig lp = config;
        lp.mode = TrainMode::lp;
        lp.epochs = config.lp_epochs;
        if (config.lp_learning_rate) lp.learning_rate = *config.lp_learning_rate;
        const TrainingTrace lp_trace = train(model, data, lp);
        if (lp_trace.diverged) throw DivergenceError("head_norm_sweep: LP stage diverged", 0);
        start = lp_trace.final_model;
        stage.mode = config.mode == TrainMode::lp_ft ? TrainMode::ft : TrainMode::lora;
    }

    std::vector<SweepRow> rows;
    for (double s : scales) {
        HeadParams head = start.head;
        head.V *= s;
        head.b *= s;
        ModelState scaled = start.with_head(head);
        if (stage.mode == TrainMode::lora && scaled.arch() != Architecture::lora)
            scaled = attach_lora(scaled, stage.lora_rank, stage.lora_variance, stage.seed);
        SweepRow row;
        row.scale = s;
        row.baseline = s == 1.0;
        row.start_head_norm = head.V.norm();
        const TrainingTrace trace = train(scaled, data, stage);
        row.diverged = trace.diverged;
        if (trace.diverged) {
            row.feature_diff = row.final_loss = row.final_accuracy = std::numeric_limits<double>::quiet_NaN();
        } else {
            const Eigen::MatrixXd diff =
                features_of(trace.final_model, train_rows.samples) - features_of(scaled, train_rows.samples);
            row.feature_diff = diff.rowwise().norm().mean();
            row.final_loss = trace.records.back().loss;
            row.final_accuracy = trace.records.back().accuracy;
        }
        rows.push_back(row);
    }
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::string out = "scale,feature_diff,start_head_norm,final_loss,final_accuracy,diverged,baseline\n";
    for (const auto& r : rows)
        out += text::format_double(r.scale) + ',' + text::format_double(r.feature_diff) + ',' +
               text::format_double(r.start_head_norm) + ',' + text::format_double(r.final_loss) + ',' +
               text::format_double(r.final_accuracy) + ',' + (r.diverged ? "1" : "0") + ',' + (r.baseline ? "1" : "0") +
               '\n';
    return out;
}

}  // namespace lpft
