#include "lpft/metrics.hpp"

#include "lpft/errors.hpp"
#include "lpft/logistic.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace lpft {

FdrResult fdr(const Eigen::MatrixXd& features, const std::vector<int>& labels) {
    if (static_cast<std::size_t>(features.rows()) != labels.size())
        throw DimensionError("fdr: label count does not match feature rows");
    std::map<int, std::vector<Eigen::Index>> members;
    for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(static_cast<Eigen::Index>(i));
    if (members.size() < 2) throw PreconditionError("fdr: need at least two classes");
    for (const auto& [label, rows] : members)
        if (rows.size() < 2) throw PreconditionError("fdr: class " + std::to_string(label) + " has fewer than 2 samples");

    const Eigen::RowVectorXd global_mean = features.colwise().mean();
    double between = 0.0;
    double within = 0.0;
    for (const auto& [label, rows] : members) {
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(features.cols());
        for (auto r : rows) mean += features.row(r);
        mean /= static_cast<double>(rows.size());
        between += static_cast<double>(rows.size()) * (mean - global_mean).squaredNorm();
        for (auto r : rows) within += (features.row(r) - mean).squaredNorm();
    }
    if (within == 0.0) return {std::numeric_limits<double>::infinity(), true};
    return {between / within, false};
}

FeatureChangeStats feature_change_stats(const Eigen::MatrixXd& before, const Eigen::MatrixXd& after,
                                        const std::vector<int>& labels) {
    if (before.rows() != after.rows() || before.cols() != after.cols())
        throw DimensionError("feature_change_stats: shape mismatch");
    if (before.rows() == 0) throw PreconditionError("feature_change_stats: no samples");
    FeatureChangeStats out;
    double cos_sum = 0.0;
    int used = 0;
    for (Eigen::Index i = 0; i < before.rows(); ++i) {
        out.mean_diff_norm += (after.row(i) - before.row(i)).norm();
        const double nb = before.row(i).norm();
        const double na = after.row(i).norm();
        if (nb == 0.0 || na == 0.0) {
            ++out.excluded_rows;
            continue;
        }
        cos_sum += before.row(i).dot(after.row(i)) / (nb * na);
        ++used;
    }
    if (used == 0) throw PreconditionError("feature_change_stats: every row has a zero feature vector");
    out.mean_cosine_similarity = cos_sum / used;
    out.mean_diff_norm /= static_cast<double>(before.rows());
    try {
        out.fdr = fdr(after, labels);
    } catch (const PreconditionError&) {
        out.fdr.reset();
    }
    return out;
}

CalibrationReport ece_mce(const Eigen::MatrixXd& probabilities, const std::vector<int>& labels, int n_bins) {
    if (n_bins < 1) throw ParameterError("ece_mce: n_bins must be >= 1");
    const Eigen::Index n = probabilities.rows();
    if (n == 0) throw PreconditionError("ece_mce: no samples");
    if (static_cast<std::size_t>(n) != labels.size()) throw DimensionError("ece_mce: label count mismatch");
    const auto c = static_cast<int>(probabilities.cols());

    CalibrationReport report;
    report.n_bins = n_bins;
    std::vector<double> conf_sum(static_cast<std::size_t>(n_bins), 0.0);
    std::vector<long> correct(static_cast<std::size_t>(n_bins), 0);
    std::vector<long> count(static_cast<std::size_t>(n_bins), 0);
    long total_correct = 0;
    double nll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd p = probabilities.row(i).transpose();
        if (!p.allFinite() || (p.array() < -1e-12).any() || std::abs(p.sum() - 1.0) > 1e-9)
            throw ParameterError("ece_mce: row " + std::to_string(i) + " is not a probability vector");
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 1 || y > c) throw ParameterError("ece_mce: label outside 1..C");
        const int pred = argmax(p);
        const double conf = p(pred);
        auto bin = static_cast<int>(std::floor(conf * n_bins));
        bin = std::clamp(bin, 0, n_bins - 1);
        const auto b = static_cast<std::size_t>(bin);
        conf_sum[b] += conf;
        ++count[b];
        if (pred == y - 1) {
            ++correct[b];
            ++total_correct;
        }
        nll -= std::log(p(y - 1));
    }
    const double dn = static_cast<double>(n);
    for (std::size_t b = 0; b < count.size(); ++b) {
        CalibrationBin bin;
        bin.count = count[b];
        if (count[b] > 0) {
            bin.mean_confidence = conf_sum[b] / static_cast<double>(count[b]);
            bin.accuracy = static_cast<double>(correct[b]) / static_cast<double>(count[b]);
            const double gap = std::abs(bin.accuracy - bin.mean_confidence);
            report.ece += static_cast<double>(count[b]) / dn * gap;
            report.mce = std::max(report.mce, gap);
        }
        report.bins.push_back(bin);
    }
    report.nll = nll / dn;
    report.accuracy = static_cast<double>(total_correct) / dn;
    return report;
}

Eigen::MatrixXd apply_temperature(const Eigen::MatrixXd& logits, double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ParameterError("temperature must be finite and > 0");
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i)
        out.row(i) = softmax(logits.row(i).transpose() / temperature).transpose();
    return out;
}

double temperature_nll(const Eigen::MatrixXd& logits, const std::vector<int>& labels, double temperature) {
    if (!(temperature > 0.0)) throw ParameterError("temperature must be > 0");
    if (static_cast<std::size_t>(logits.rows()) != labels.size()) throw DimensionError("label count mismatch");
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i)
        total += cross_entropy(logits.row(i).transpose() / temperature, labels[static_cast<std::size_t>(i)] - 1);
    return total / static_cast<double>(logits.rows());
}

namespace {

double temperature_gradient(const Eigen::MatrixXd& logits, const std::vector<int>& labels, double t) {
    double g = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const Eigen::VectorXd z = logits.row(i).transpose();
        const Eigen::VectorXd p = softmax(z / t);
        g += (z(labels[static_cast<std::size_t>(i)] - 1) - p.dot(z)) / (t * t);
    }
    return g / static_cast<double>(logits.rows());
}

}  // namespace

TemperatureFit fit_temperature(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
    if (logits.rows() < 1) throw PreconditionError("fit_temperature: need at least one sample");
    if (static_cast<std::size_t>(logits.rows()) != labels.size()) throw DimensionError("label count mismatch");
    for (int y : labels)
        if (y < 1 || y > logits.cols()) throw ParameterError("fit_temperature: label outside 1..C");

    constexpr double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    constexpr long max_steps = 100000;
    constexpr int patience = 10;

    TemperatureFit fit;
    double t = 1.0;
    fit.initial_nll = temperature_nll(logits, labels, t);
    if (!std::isfinite(fit.initial_nll)) throw ConvergenceError("fit_temperature: non-finite NLL at T = 1");
    fit.nll = fit.initial_nll;
    double m = 0.0, v = 0.0;
    int stale = 0;
    for (long step = 1; step <= max_steps; ++step) {
        const double g = temperature_gradient(logits, labels, t);
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        const double m_hat = m / (1.0 - std::pow(beta1, static_cast<double>(step)));
        const double v_hat = v / (1.0 - std::pow(beta2, static_cast<double>(step)));
        const double next = t - lr * m_hat / (std::sqrt(v_hat) + eps);
        fit.steps = step;
        if (!(next > 0.0)) break;
        t = next;
        const double nll = temperature_nll(logits, labels, t);
        if (!std::isfinite(nll)) throw ConvergenceError("fit_temperature: non-finite NLL at T = " + std::to_string(t));
        if (nll < fit.nll) {
            fit.nll = nll;
            fit.temperature = t;
            stale = 0;
        } else if (++stale >= patience) {
            break;
        }
    }
    return fit;
}

CheckReport head_scaling_equivalence(const ModelState& model, double temperature, const Eigen::MatrixXd& inputs) {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ParameterError("temperature must be finite and > 0");
    const Eigen::MatrixXd logits = logits_of(model, inputs);
    const Eigen::MatrixXd scaled = apply_temperature(logits, temperature);
    HeadParams head = model.head;
    head.V /= temperature;
    head.b /= temperature;
    const Eigen::MatrixXd rescaled_logits = logits_of(model.with_head(head), inputs);
    Eigen::MatrixXd via_head(rescaled_logits.rows(), rescaled_logits.cols());
    long argmax_mismatch = 0;
    for (Eigen::Index i = 0; i < rescaled_logits.rows(); ++i) {
        via_head.row(i) = softmax(rescaled_logits.row(i).transpose()).transpose();
        if (argmax(scaled.row(i).transpose()) != argmax(logits.row(i).transpose())) ++argmax_mismatch;
    }
    CheckReport r;
    r.name = "head_scaling_equivalence";
    const double deviation = inputs.rows() > 0 ? (scaled - via_head).cwiseAbs().maxCoeff() : 0.0;
    r.measure("temperature", temperature);
    r.measure("max_probability_deviation", deviation);
    r.measure("argmax_mismatches", static_cast<double>(argmax_mismatch));
    r.tolerance("max_probability_deviation", 1e-12);
    r.pass = deviation <= 1e-12 && argmax_mismatch == 0;
    return r;
}

}  // namespace lpft
