#include "lpft/training.hpp"

#include "lpft/errors.hpp"
#include "lpft/logistic.hpp"
#include "lpft/ntk.hpp"
#include "lpft/rng.hpp"
#include "lpft/text_format.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace lpft {

namespace {

constexpr double kDivergenceLoss = 1e6;

void check_data(const ModelState& model, const Eigen::MatrixXd& inputs, const std::vector<int>& labels) {
    if (inputs.cols() != model.input_dim()) throw DimensionError("data dimension does not match the model");
    if (static_cast<std::size_t>(inputs.rows()) != labels.size())
        throw DimensionError("label count does not match sample rows");
    for (int y : labels)
        if (y < 1 || y > model.num_classes()) throw ParameterError("label outside 1..C");
}

}  // namespace

std::string_view to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::lp: return "LP";
        case TrainMode::ft: return "FT";
        case TrainMode::lora: return "LoRA";
        case TrainMode::lp_ft: return "LP-FT";
        case TrainMode::lp_lora: return "LP-LoRA";
    }
    return "FT";
}

TrainMode parse_train_mode(std::string_view text) {
    if (text == "LP" || text == "lp") return TrainMode::lp;
    if (text == "FT" || text == "ft") return TrainMode::ft;
    if (text == "LoRA" || text == "lora") return TrainMode::lora;
    if (text == "LP-FT" || text == "lp-ft") return TrainMode::lp_ft;
    if (text == "LP-LoRA" || text == "lp-lora") return TrainMode::lp_lora;
    throw ParameterError("unknown training mode '" + std::string(text) + "'");
}

std::string_view to_string(LpSolver solver) {
    return solver == LpSolver::gradient_descent ? "gradient_descent" : "ridge_logistic";
}

LpSolver parse_lp_solver(std::string_view text) {
    if (text == "gradient_descent") return LpSolver::gradient_descent;
    if (text == "ridge_logistic") return LpSolver::ridge_logistic;
    throw ParameterError("unknown LP solver '" + std::string(text) + "'");
}

std::string_view to_string(Aggregation agg) { return agg == Aggregation::sum ? "sum" : "mean"; }

Aggregation parse_aggregation(std::string_view text) {
    if (text == "sum") return Aggregation::sum;
    if (text == "mean") return Aggregation::mean;
    throw ParameterError("unknown aggregation '" + std::string(text) + "'");
}

const std::vector<double>& default_lambda_grid() {
    static const std::vector<double> grid{1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2};
    return grid;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ParameterError("learning_rate must be > 0");
    if (epochs < 0) throw ParameterError("epochs must be >= 0");
    const bool two_stage = mode == TrainMode::lp_ft || mode == TrainMode::lp_lora;
    if (two_stage && lp_solver == LpSolver::gradient_descent && lp_epochs < 0)
        throw ParameterError("two-stage modes need lp_epochs >= 0");
    if (lp_learning_rate && !(*lp_learning_rate > 0.0)) throw ParameterError("lp_learning_rate must be > 0");
    if (lp_lambda && !(*lp_lambda >= 0.0)) throw ParameterError("lp_lambda must be >= 0");
    if (mode == TrainMode::lora || mode == TrainMode::lp_lora) {
        if (lora_rank < 1) throw ParameterError("lora_rank must be >= 1");
        if (!(lora_variance > 0.0)) throw ParameterError("lora_variance must be > 0");
    }
}

Eigen::MatrixXd residuals(const ModelState& model, const Eigen::MatrixXd& inputs, const std::vector<int>& labels) {
    check_data(model, inputs, labels);
    const Eigen::MatrixXd logits = logits_of(model, inputs);
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::VectorXd delta = -softmax(logits.row(i).transpose());
        delta(labels[static_cast<std::size_t>(i)] - 1) += 1.0;
        out.row(i) = delta.transpose();
    }
    return out;
}

double empirical_risk(const ModelState& model, const Dataset& data) {
    check_data(model, data.samples, data.labels);
    const Eigen::MatrixXd logits = logits_of(model, data.samples);
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) total += cross_entropy(logits.row(i).transpose(), data.class_index(i));
    return total / static_cast<double>(logits.rows());
}

double accuracy(const ModelState& model, const Dataset& data) {
    const Eigen::MatrixXd logits = logits_of(model, data.samples);
    int correct = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i)
        if (argmax(logits.row(i).transpose()) == data.class_index(i)) ++correct;
    return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

ParamDirection descent_direction(const ModelState& model, const Dataset& data) {
    const Eigen::MatrixXd delta = residuals(model, data);
    const Eigen::MatrixXd feats = features_of(model, data.samples);
    ParamDirection dir;
    dir.head_weight = delta.transpose() * feats;
    dir.head_bias = delta.colwise().sum().transpose();
    dir.feature = Eigen::VectorXd::Zero(model.feature_param_count());
    for (Eigen::Index i = 0; i < data.size(); ++i)
        dir.feature += feature_vjp(model, data.samples.row(i).transpose(), model.head.V.transpose() * delta.row(i).transpose());
    return dir;
}

ModelState gd_step(const ModelState& model, const Dataset& data, double eta, const Trainable& trainable) {
    if (!trainable.any()) throw ParameterError("gd_step: no trainable parameter group");
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw ParameterError("gd_step: learning rate must be finite and >= 0");
    const ParamDirection dir = descent_direction(model, data);
    if (!dir.head_weight.allFinite() || !dir.head_bias.allFinite() || !dir.feature.allFinite())
        throw DivergenceError("gd_step: non-finite gradient", 0);
    ModelState out = model;
    if (eta == 0.0) return out;
    if (trainable.head_weight) out.head.V += eta * dir.head_weight;
    if (trainable.head_bias) out.head.b += eta * dir.head_bias;
    if (trainable.feature) out = out.with_feature_parameters(model.flatten_feature() + eta * dir.feature);
    if (!out.flatten().allFinite()) throw DivergenceError("gd_step: non-finite parameters after update", 0);
    return out;
}

std::string trace_to_csv(const TrainingTrace& trace) {
    std::string out(kTraceCsvHeader);
    out += '\n';
    for (const auto& r : trace.records) {
        out += std::to_string(r.step) + ',' + r.phase + ',' + text::format_double(r.loss) + ',' +
               text::format_double(r.accuracy) + ',' + text::format_double(r.head_weight_norm) + ',' +
               text::format_double(r.head_bias_norm) + ',' + text::format_double(r.mean_logit_norm) + ',' +
               text::format_double(r.mean_feature_drift) + '\n';
    }
    return out;
}

HeadParams fit_ridge_head(const ModelState& model, const Dataset& data, double lambda) {
    const Eigen::MatrixXd feats = features_of(model, data.samples);
    const Eigen::Index n = feats.rows();
    const Eigen::Index h = feats.cols();
    const Eigen::Index c = model.num_classes();
    const Eigen::Index p = c * h + c;
    Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n * c, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < c; ++k) {
            design.block(i * c + k, k * h, 1, h) = feats.row(i);
            design(i * c + k, c * h + k) = 1.0;
        }
    Eigen::MatrixXd reg = Eigen::MatrixXd::Zero(p, p);
    reg.diagonal().head(c * h).setOnes();
    std::vector<int> classes;
    for (Eigen::Index i = 0; i < n; ++i) classes.push_back(data.class_index(i));
    const MultinomialFit fit = fit_multinomial(design, classes, static_cast<int>(c), reg, lambda);
    HeadParams head;
    head.V.resize(c, h);
    for (Eigen::Index k = 0; k < c; ++k) head.V.row(k) = fit.weights.segment(k * h, h).transpose();
    head.b = fit.weights.tail(c);
    return head;
}

double cross_validate_lambda(const ModelState& model, const Dataset& data, const std::vector<double>& grid,
                             int folds, std::uint64_t seed) {
    if (grid.empty()) throw ParameterError("cross_validate_lambda: empty grid");
    const auto n = static_cast<std::size_t>(data.size());
    if (folds < 2 || static_cast<std::size_t>(folds) > n) throw ParameterError("cross_validate_lambda: need 2 <= folds <= N");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(seed, 20);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    auto subset = [&](int fold, bool held_out) {
        Dataset out;
        out.num_classes = data.num_classes;
        std::vector<Eigen::Index> rows;
        for (std::size_t r = 0; r < n; ++r)
            if ((static_cast<int>(r % static_cast<std::size_t>(folds)) == fold) == held_out)
                rows.push_back(static_cast<Eigen::Index>(order[r]));
        out.samples.resize(static_cast<Eigen::Index>(rows.size()), data.dim());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out.samples.row(static_cast<Eigen::Index>(r)) = data.samples.row(rows[r]);
            out.labels.push_back(data.labels[static_cast<std::size_t>(rows[r])]);
            out.splits.push_back(Split::train);
        }
        return out;
    };

    double best_lambda = grid.front();
    double best_loss = std::numeric_limits<double>::infinity();
    for (double lambda : grid) {
        double total = 0.0;
        for (int f = 0; f < folds; ++f) {
            const Dataset fit_part = subset(f, false);
            const Dataset held = subset(f, true);
            const ModelState probe = model.with_head(fit_ridge_head(model, fit_part, lambda));
            total += empirical_risk(probe, held) * static_cast<double>(held.size());
        }
        const double loss = total / static_cast<double>(n);
        if (loss < best_loss) {
            best_loss = loss;
            best_lambda = lambda;
        }
    }
    return best_lambda;
}

namespace {

class TraceRecorder {
public:
    TraceRecorder(const Dataset& data, const ModelState& anchor)
        : data_(data), anchor_features_(features_of(anchor, data.samples)) {}

    TraceRecord record(long step, const std::string& phase, const ModelState& model) {
        TraceRecord r;
        r.step = step;
        r.phase = phase;
        const Eigen::MatrixXd logits = logits_of(model, data_.samples);
        const Eigen::MatrixXd feats = features_of(model, data_.samples);
        double loss = 0.0;
        int correct = 0;
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            const Eigen::VectorXd z = logits.row(i).transpose();
            loss += cross_entropy(z, data_.class_index(i));
            if (argmax(z) == data_.class_index(i)) ++correct;
        }
        const double n = static_cast<double>(logits.rows());
        r.loss = loss / n;
        r.accuracy = correct / n;
        r.head_weight_norm = model.head.V.norm();
        r.head_bias_norm = model.head.b.norm();
        r.mean_logit_norm = logits.rowwise().norm().sum() / n;
        r.mean_feature_drift = (feats - anchor_features_).rowwise().norm().sum() / n;
        return r;
    }

private:
    const Dataset& data_;
    Eigen::MatrixXd anchor_features_;
};

struct PhaseResult {
    ModelState model;
    bool diverged = false;
    std::string message;
};

PhaseResult run_gd_phase(ModelState model, const Dataset& data, double eta, int steps, const Trainable& trainable,
                         const std::string& phase, long& step, TraceRecorder& recorder, TrainingTrace& trace) {
    for (int s = 0; s < steps; ++s) {
        try {
            model = gd_step(model, data, eta, trainable);
        } catch (const DivergenceError& e) {
            return {model, true, std::string(e.what()) + " at step " + std::to_string(step + 1)};
        }
        ++step;
        TraceRecord r = recorder.record(step, phase, model);
        const bool finite = std::isfinite(r.loss) && std::isfinite(r.head_weight_norm) &&
                            std::isfinite(r.mean_logit_norm) && std::isfinite(r.mean_feature_drift);
        if (!finite || r.loss > kDivergenceLoss) {
            return {model, true, "loss diverged at step " + std::to_string(step)};
        }
        trace.records.push_back(r);
    }
    return {model, false, {}};
}

}  // namespace

TrainingTrace train(const ModelState& model, const Dataset& data, const TrainConfig& config) {
    config.validate();
    const Dataset train_rows = data.select(Split::train);
    if (train_rows.size() == 0) throw PreconditionError("train: dataset has no train rows");
    check_data(model, train_rows.samples, train_rows.labels);

    const double scale = config.aggregation == Aggregation::mean ? 1.0 / static_cast<double>(train_rows.size()) : 1.0;
    const double eta = config.learning_rate * scale;
    const double lp_eta = config.lp_learning_rate.value_or(config.learning_rate) * scale;

    TrainingTrace trace;
    TraceRecorder recorder(train_rows, model);
    long step = 0;
    trace.records.push_back(recorder.record(step, "init", model));
    ModelState current = model;

    auto finish = [&](PhaseResult r) {
        trace.final_model = std::move(r.model);
        trace.diverged = r.diverged;
        trace.message = std::move(r.message);
        return trace;
    };

    auto linear_probe = [&](int gd_steps, double gd_eta) -> PhaseResult {
        if (config.lp_solver == LpSolver::ridge_logistic) {
            const double lambda = config.lp_lambda ? *config.lp_lambda
                                                   : cross_validate_lambda(current, train_rows, default_lambda_grid(), 5, config.seed);
            trace.lp_lambda = lambda;
            ModelState probed = current.with_head(fit_ridge_head(current, train_rows, lambda));
            ++step;
            trace.records.push_back(recorder.record(step, "lp", probed));
            return {probed, false, {}};
        }
        return run_gd_phase(current, train_rows, gd_eta, gd_steps, Trainable::head_only(), "lp", step, recorder, trace);
    };

    auto as_lora = [&](const ModelState& m) {
        return m.arch() == Architecture::lora ? m : attach_lora(m, config.lora_rank, config.lora_variance, config.seed);
    };

    switch (config.mode) {
        case TrainMode::lp: return finish(linear_probe(config.epochs, eta));
        case TrainMode::ft:
            return finish(run_gd_phase(current, train_rows, eta, config.epochs, Trainable::all(), "ft", step, recorder, trace));
        case TrainMode::lora:
            return finish(run_gd_phase(as_lora(current), train_rows, eta, config.epochs, Trainable::all(), "lora", step,
                                       recorder, trace));
        case TrainMode::lp_ft:
        case TrainMode::lp_lora: {
            PhaseResult lp = linear_probe(config.lp_epochs, lp_eta);
            trace.lp_model = lp.model;
            if (lp.diverged) return finish(std::move(lp));
            current = config.mode == TrainMode::lp_ft ? lp.model : as_lora(lp.model);
            const std::string phase = config.mode == TrainMode::lp_ft ? "ft" : "lora";
            return finish(run_gd_phase(current, train_rows, eta, config.epochs, Trainable::all(), phase, step, recorder, trace));
        }
    }
    return trace;
}

LinearizedPrediction linearized_one_epoch(const ModelState& model, const Dataset& data, double eta,
                                          const Eigen::MatrixXd& probes) {
    return linearized_one_epoch(model, data, eta, probes, residuals(model, data));
}

LinearizedPrediction linearized_one_epoch(const ModelState& model, const Dataset& data, double eta,
                                          const Eigen::MatrixXd& probes, const Eigen::MatrixXd& delta) {
    if (probes.cols() != model.input_dim()) throw DimensionError("linearized_one_epoch: probe dimension mismatch");
    const Eigen::Index c = model.num_classes();
    const Eigen::Index h = model.feature_dim();
    if (delta.rows() != data.size() || delta.cols() != c) throw DimensionError("linearized_one_epoch: residuals must be N x C");

    Eigen::VectorXd delta_flat(delta.size());
    for (Eigen::Index i = 0; i < delta.rows(); ++i) delta_flat.segment(i * c, c) = delta.row(i).transpose();

    LinearizedPrediction out;
    const KernelDecomposition k = compute_cross_decomposition(model, probes, data.samples);
    const Eigen::VectorXd logit_flat = eta * (k.P * delta_flat + k.F * delta_flat);
    out.logit_delta.resize(probes.rows(), c);
    for (Eigen::Index m = 0; m < probes.rows(); ++m) out.logit_delta.row(m) = logit_flat.segment(m * c, c).transpose();

    std::vector<Eigen::MatrixXd> train_jac;
    train_jac.reserve(static_cast<std::size_t>(data.size()));
    for (Eigen::Index i = 0; i < data.size(); ++i) train_jac.push_back(feature_jacobian(model, data.samples.row(i).transpose()));
    out.feature_delta = Eigen::MatrixXd::Zero(probes.rows(), h);
    for (Eigen::Index m = 0; m < probes.rows(); ++m) {
        const Eigen::MatrixXd jx = feature_jacobian(model, probes.row(m).transpose());
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(h);
        for (Eigen::Index i = 0; i < data.size(); ++i) {
            const Eigen::MatrixXd theta_phi = jx * train_jac[static_cast<std::size_t>(i)].transpose();
            acc += theta_phi * (model.head.V.transpose() * delta.row(i).transpose());
        }
        out.feature_delta.row(m) = eta * acc.transpose();
    }
    return out;
}

}  // namespace lpft
