#include "lpft/checks.hpp"

#include "lpft/errors.hpp"
#include "lpft/logistic.hpp"
#include "lpft/rng.hpp"
#include "lpft/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lpft {

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

std::uint64_t trial_seed(std::uint64_t seed, long trial) {
    return mix64(seed ^ 0x6a09e667f3bcc909ULL) + static_cast<std::uint64_t>(trial);
}

// Pass rule shared by the Monte-Carlo checks.
void judge_rate(CheckReport& r, double rate, long trials, double bound) {
    const double half = wilson_half_width(rate, trials);
    r.trials = trials;
    r.violation_rate = rate;
    r.bound = bound;
    r.measure("wilson_half_width", half);
    r.tolerance("allowed_rate", bound + kMonteCarloSlack * half);
    r.pass = rate <= bound + kMonteCarloSlack * half;
}

double normal_entry(const CounterRng& rng, std::uint64_t index) {
    const auto [a, b] = rng.normal_pair_at(index / 2);
    return index % 2 == 0 ? a : b;
}

}  // namespace

double jl_failure_bound(double epsilon, long k) {
    return 4.0 * std::exp(-(epsilon * epsilon - epsilon * epsilon * epsilon) * static_cast<double>(k) / 4.0);
}

CheckReport check_decomposition(const KernelDecomposition& decomp, const ModelState& model, const Dataset& data,
                                double tol) {
    const Eigen::MatrixXd reference = brute_force_ntk(model, data.samples);
    if (decomp.P.rows() != reference.rows() || decomp.P.cols() != reference.cols() ||
        decomp.F.rows() != reference.rows() || decomp.F.cols() != reference.cols())
        throw DimensionError("check_decomposition: decomposition shape does not match the dataset");
    CheckReport r;
    r.name = "decomposition";
    const double err = max_abs(decomp.P + decomp.F - reference);
    r.measure("max_abs_error", err);
    r.measure("kernel_max_abs", max_abs(reference));
    r.tolerance("max_abs_error", tol);
    r.pass = err <= tol;
    r.notes.push_back(std::string("architecture ") + std::string(to_string(model.arch())));
    return r;
}

CheckReport check_decomposition(const ModelState& model, const Dataset& data, double tol) {
    return check_decomposition(compute_decomposition(model, data.samples), model, data, tol);
}

double max_relative_feature_drift(const ModelState& model, const Dataset& data, const Eigen::MatrixXd& points,
                                  int steps, double eta) {
    ModelState current = model;
    for (int s = 0; s < steps; ++s) current = gd_step(current, data, eta, Trainable::all());
    const Eigen::MatrixXd before = features_of(model, points);
    const Eigen::MatrixXd after = features_of(current, points);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const double norm = points.row(i).norm();
        const double drift = (after.row(i) - before.row(i)).norm();
        worst = std::max(worst, norm > 0.0 ? drift / norm : drift);
    }
    return worst;
}

CheckReport check_orthogonal_invariance(const ModelState& linear_model, const Dataset& data,
                                        const Eigen::MatrixXd& probes, int steps, double eta) {
    if (linear_model.arch() != Architecture::linear)
        throw UnsupportedArchitectureError("orthogonal invariance holds for the linear feature extractor only");
    if (steps < 1) throw ParameterError("check_orthogonal_invariance: steps must be >= 1");
    CheckReport r;
    r.name = "orthogonal_invariance";
    const LinearizedPrediction pred = linearized_one_epoch(linear_model, data, eta, probes);
    const double predicted = max_abs(pred.feature_delta);
    const double drift = max_relative_feature_drift(linear_model, data, probes, steps, eta);
    r.measure("predicted_feature_delta_max", predicted);
    r.measure("trained_relative_drift_max", drift);
    r.measure("steps", steps);
    r.measure("learning_rate", eta);
    r.tolerance("predicted_feature_delta_max", 1e-14);
    r.tolerance("trained_relative_drift_max", 1e-12);
    r.pass = predicted <= 1e-14 && drift <= 1e-12;
    return r;
}

std::vector<double> lora_projection_samples(const Eigen::VectorXd& x, const Eigen::VectorXd& x2, int rank,
                                            double variance, long trials, std::uint64_t seed) {
    if (x.size() != x2.size()) throw DimensionError("lora_projection_samples: vector sizes differ");
    if (rank < 1 || !(variance >= 0.0) || trials < 1) throw ParameterError("lora_projection_samples: bad parameters");
    const double sd = std::sqrt(variance);
    const auto d = static_cast<std::uint64_t>(x.size());
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(trials));
    for (long t = 0; t < trials; ++t) {
        const CounterRng rng(trial_seed(seed, t), 30);
        double dot = 0.0;
        for (int a = 0; a < rank; ++a) {
            double ax = 0.0, ax2 = 0.0;
            for (std::uint64_t j = 0; j < d; ++j) {
                const double entry = sd * normal_entry(rng, static_cast<std::uint64_t>(a) * d + j);
                ax += entry * x(static_cast<Eigen::Index>(j));
                ax2 += entry * x2(static_cast<Eigen::Index>(j));
            }
            dot += ax * ax2;
        }
        out.push_back(dot);
    }
    return out;
}

CheckReport check_lora_equivalence(const ModelState& base_linear, const Dataset& data, const LoraCheckConfig& config) {
    if (base_linear.arch() != Architecture::linear)
        throw UnsupportedArchitectureError("LoRA equivalence is stated for the linear feature extractor");
    if (config.trials < 100) throw ParameterError("check_lora_equivalence: trials must be >= 100");
    if (!(config.epsilon > 0.0 && config.epsilon < 1.0)) throw ParameterError("epsilon must lie in (0, 1)");
    const double c = config.norm_bound.value_or(data.input_norm_bound());
    if (c < data.input_norm_bound() * (1.0 - 1e-12))
        throw PreconditionError("norm bound c is smaller than the largest input norm");

    const Eigen::MatrixXd& X = data.samples;
    const Eigen::MatrixXd p_ft = pretrain_component(base_linear, X, X);
    const Eigen::MatrixXd vvt = base_linear.head.V * base_linear.head.V.transpose();
    const double vvt_norm = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(vvt).eigenvalues().cwiseAbs().maxCoeff();
    const Eigen::MatrixXd gram = X * X.transpose();
    const double sr = config.variance * config.rank;
    const double threshold = c * sr * config.epsilon * vvt_norm;
    const double statement_threshold = c * config.epsilon * vvt_norm;

    double p_err = 0.0;
    long trial_violations = 0;
    long pair_violations = 0;
    long statement_violations = 0;
    double worst_ratio = 0.0;
    const Eigen::Index n = X.rows();
    for (long t = 0; t < config.trials; ++t) {
        const ModelState lora = attach_lora(base_linear, config.rank, config.variance, trial_seed(config.seed, t));
        p_err = std::max(p_err, max_abs(pretrain_component(lora, X, X) - p_ft));
        const auto& adapter = std::get<LoraAdapter>(lora.feature);
        const Eigen::MatrixXd projected = adapter.lora_a * X.transpose();  // r x N
        const Eigen::MatrixXd lora_gram = projected.transpose() * projected;
        bool any = false;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i; j < n; ++j) {
                const Eigen::MatrixXd diff = (lora_gram(i, j) - sr * gram(i, j)) * vvt;
                const double dev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(diff, Eigen::EigenvaluesOnly)
                                       .eigenvalues()
                                       .cwiseAbs()
                                       .maxCoeff();
                if (dev > threshold) {
                    ++pair_violations;
                    any = true;
                }
                if (dev > statement_threshold) ++statement_violations;
                if (threshold > 0.0) worst_ratio = std::max(worst_ratio, dev / threshold);
            }
        if (any) ++trial_violations;
    }

    CheckReport r;
    r.name = "lora_equivalence";
    r.seed = config.seed;
    const long pairs = n * (n + 1) / 2;
    r.measure("p_block_max_abs_difference", p_err);
    r.tolerance("p_block_max_abs_difference", 1e-14);
    r.measure("rank", config.rank);
    r.measure("variance", config.variance);
    r.measure("epsilon", config.epsilon);
    r.measure("norm_bound_c", c);
    r.measure("vvt_spectral_norm", vvt_norm);
    r.measure("pairs_per_trial", static_cast<double>(pairs));
    r.measure("trials_with_any_violation", static_cast<double>(trial_violations));
    r.measure("worst_deviation_over_bound", worst_ratio);
    r.measure("statement_bound_pair_violation_rate",
              static_cast<double>(statement_violations) / static_cast<double>(pairs * config.trials));
    r.tolerance("proof_bound_threshold", threshold);
    r.tolerance("statement_bound_threshold", statement_threshold);
    // Pairs within a trial share A, so the interval uses the trial count.
    const double rate = static_cast<double>(pair_violations) / static_cast<double>(pairs * config.trials);
    judge_rate(r, rate, config.trials, jl_failure_bound(config.epsilon, config.rank));
    r.pass = r.pass && p_err <= 1e-14;
    r.notes.push_back("deviation measured against c*sigma^2*r*eps*||V0 V0^T||; statement form c*eps*||V0 V0^T|| reported alongside");
    return r;
}

JlCheckConfig jl_unit_pair(long k, double epsilon, long trials, int dim, double angle, std::uint64_t seed) {
    if (dim < 2) throw ParameterError("jl_unit_pair: dim must be >= 2");
    JlCheckConfig cfg;
    cfg.k = k;
    cfg.epsilon = epsilon;
    cfg.trials = trials;
    cfg.seed = seed;
    cfg.u = Eigen::VectorXd::Zero(dim);
    cfg.v = Eigen::VectorXd::Zero(dim);
    cfg.u(0) = 1.0;
    cfg.v(0) = std::cos(angle);
    cfg.v(1) = std::sin(angle);
    return cfg;
}

CheckReport check_jl_lemma(const JlCheckConfig& config) {
    if (config.k < 1) throw ParameterError("check_jl_lemma: k must be >= 1");
    if (!(config.epsilon > 0.0 && config.epsilon < 1.0)) throw ParameterError("epsilon must lie in (0, 1)");
    if (config.trials < 100) throw ParameterError("check_jl_lemma: trials must be >= 100");
    if (config.u.size() != config.v.size() || config.u.size() == 0) throw DimensionError("u and v must share a dimension");
    const double c = config.norm_bound.value_or(std::max(config.u.norm(), config.v.norm()));
    const double threshold = c * config.epsilon;
    const double target = config.u.dot(config.v);
    const auto d = static_cast<std::uint64_t>(config.u.size());

    // Columns of A that meet a zero coordinate of both u and v never matter.
    std::vector<std::uint64_t> support;
    for (std::uint64_t j = 0; j < d; ++j)
        if (config.u(static_cast<Eigen::Index>(j)) != 0.0 || config.v(static_cast<Eigen::Index>(j)) != 0.0)
            support.push_back(j);

    long violations = 0;
    double max_dev = 0.0;
    double mean_dev = 0.0;
    const double inv_k = 1.0 / static_cast<double>(config.k);
    for (long t = 0; t < config.trials; ++t) {
        const CounterRng rng(trial_seed(config.seed, t), 31);
        double dot = 0.0;
        for (long a = 0; a < config.k; ++a) {
            double au = 0.0, av = 0.0;
            for (std::uint64_t j : support) {
                const double entry = normal_entry(rng, static_cast<std::uint64_t>(a) * d + j);
                au += entry * config.u(static_cast<Eigen::Index>(j));
                av += entry * config.v(static_cast<Eigen::Index>(j));
            }
            dot += au * av;
        }
        const double dev = std::abs(dot * inv_k - target);
        if (dev > threshold) ++violations;
        max_dev = std::max(max_dev, dev);
        mean_dev += dev;
    }
    CheckReport r;
    r.name = "jl_lemma";
    r.seed = config.seed;
    r.measure("k", static_cast<double>(config.k));
    r.measure("epsilon", config.epsilon);
    r.measure("norm_bound_c", c);
    r.measure("max_deviation", max_dev);
    r.measure("mean_deviation", mean_dev / static_cast<double>(config.trials));
    r.tolerance("deviation_threshold", threshold);
    r.measure("violations", static_cast<double>(violations));
    judge_rate(r, static_cast<double>(violations) / static_cast<double>(config.trials), config.trials,
               jl_failure_bound(config.epsilon, config.k));
    r.notes.push_back("inner product normalized by 1/k");
    return r;
}

Eigen::VectorXd norm_derivative_closed_form(const ModelState& model, const Dataset& data) {
    const Eigen::Index c = model.num_classes();
    const Eigen::MatrixXd feats = features_of(model, data.samples);
    const Eigen::MatrixXd logits = logits_of(model, data.samples);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(c);
    for (Eigen::Index k = 0; k < c; ++k) {
        const double vnorm = model.head.V.row(k).norm();
        if (vnorm <= 1e-12) throw PreconditionError("degenerate angle: head row " + std::to_string(k + 1) + " has zero norm");
        for (Eigen::Index i = 0; i < data.size(); ++i) {
            const double fnorm = feats.row(i).norm();
            const double cos_tau = fnorm > 0.0 ? feats.row(i).dot(model.head.V.row(k)) / (fnorm * vnorm) : 0.0;
            const double p = softmax(logits.row(i).transpose())(k);
            if (k == data.class_index(i))
                out(k) -= (1.0 - p) * fnorm * cos_tau;
            else
                out(k) += p * fnorm * cos_tau;
        }
    }
    return out;
}

namespace {

double summed_risk(const ModelState& model, const Dataset& data) {
    const Eigen::MatrixXd logits = logits_of(model, data.samples);
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) total += cross_entropy(logits.row(i).transpose(), data.class_index(i));
    return total;
}

}  // namespace

CheckReport check_norm_derivatives(const ModelState& model, const Dataset& data) {
    constexpr double step = 1e-6;
    const Eigen::VectorXd analytic = norm_derivative_closed_form(model, data);
    const Eigen::Index c = model.num_classes();
    const Eigen::Index h = model.feature_dim();

    double worst_norm = 0.0;
    for (Eigen::Index k = 0; k < c; ++k) {
        const Eigen::RowVectorXd dir = model.head.V.row(k) / model.head.V.row(k).norm();
        HeadParams plus = model.head, minus = model.head;
        plus.V.row(k) += step * dir;
        minus.V.row(k) -= step * dir;
        const double fd = (summed_risk(model.with_head(plus), data) - summed_risk(model.with_head(minus), data)) / (2.0 * step);
        worst_norm = std::max(worst_norm, std::abs(fd - analytic(k)) / std::max(std::abs(analytic(k)), 1.0));
    }

    // Per-sample gradient identity dl/dv_k = (p_k - 1{k=y}) phi, checked coordinate-wise.
    double worst_grad = 0.0;
    double worst_projection = 0.0;
    const Eigen::MatrixXd feats = features_of(model, data.samples);
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        const Dataset one = [&] {
            Dataset d;
            d.samples = data.samples.row(i);
            d.labels = {data.labels[static_cast<std::size_t>(i)]};
            d.splits = {Split::train};
            d.num_classes = data.num_classes;
            return d;
        }();
        const Eigen::VectorXd p = softmax(logits_of(model, one.samples).row(0).transpose());
        for (Eigen::Index k = 0; k < c; ++k) {
            const double coeff = p(k) - (k == one.class_index(0) ? 1.0 : 0.0);
            const Eigen::RowVectorXd expected = coeff * feats.row(i);
            Eigen::RowVectorXd fd_grad(h);
            for (Eigen::Index a = 0; a < h; ++a) {
                HeadParams plus = model.head, minus = model.head;
                plus.V(k, a) += step;
                minus.V(k, a) -= step;
                fd_grad(a) = (summed_risk(model.with_head(plus), one) - summed_risk(model.with_head(minus), one)) / (2.0 * step);
            }
            worst_grad = std::max(worst_grad, (fd_grad - expected).cwiseAbs().maxCoeff() / std::max(expected.norm(), 1.0));
            const double vnorm = model.head.V.row(k).norm();
            const double fnorm = feats.row(i).norm();
            const double cos_tau = fnorm > 0.0 ? feats.row(i).dot(model.head.V.row(k)) / (fnorm * vnorm) : 0.0;
            const double projected = expected.dot(model.head.V.row(k)) / vnorm;
            worst_projection = std::max(worst_projection, std::abs(projected - coeff * fnorm * cos_tau));
        }
    }

    CheckReport r;
    r.name = "norm_derivatives";
    r.measure("max_norm_derivative_relative_error", worst_norm);
    r.measure("max_per_sample_gradient_relative_error", worst_grad);
    r.measure("max_projection_error", worst_projection);
    for (Eigen::Index k = 0; k < c; ++k) r.measure("dL_dnorm_v" + std::to_string(k + 1), analytic(k));
    r.tolerance("max_norm_derivative_relative_error", 1e-6);
    r.tolerance("max_per_sample_gradient_relative_error", 1e-6);
    r.tolerance("max_projection_error", 1e-12);
    r.pass = worst_norm <= 1e-6 && worst_grad <= 1e-6 && worst_projection <= 1e-12;
    r.notes.push_back("finite differences of the summed risk, central step 1e-6");
    return r;
}

bool perceptron_separable(const Eigen::MatrixXd& features, const std::vector<int>& labels, int num_classes,
                          int max_epochs) {
    const Eigen::Index n = features.rows();
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(num_classes, features.cols() + 1);
    Eigen::MatrixXd aug(n, features.cols() + 1);
    aug << features, Eigen::VectorXd::Ones(n);
    for (int epoch = 0; epoch < max_epochs; ++epoch) {
        long mistakes = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int y = labels[static_cast<std::size_t>(i)] - 1;
            const Eigen::VectorXd scores = w * aug.row(i).transpose();
            const int pred = argmax(scores);
            // A tie with the true class still counts as a mistake.
            bool wrong = pred != y;
            for (Eigen::Index k = 0; k < scores.size() && !wrong; ++k)
                if (k != y && scores(k) >= scores(y)) wrong = true;
            if (wrong) {
                ++mistakes;
                const int other = pred != y ? pred : (y == 0 ? 1 : 0);
                w.row(y) += aug.row(i);
                w.row(other) -= aug.row(i);
            }
        }
        if (mistakes == 0) return true;
    }
    return false;
}

CheckReport check_norm_growth(const ModelState& model, const Dataset& data, const NormGrowthConfig& config) {
    if (config.steps < 5) throw ParameterError("check_norm_growth: steps must be >= 5");
    if (!(config.lp_learning_rate >= 0.0) || !(config.ft_learning_rate >= 0.0))
        throw ParameterError("check_norm_growth: learning rates must be >= 0");
    if (perceptron_separable(features_of(model, data.samples), data.labels, model.num_classes(), config.perceptron_epochs))
        throw PreconditionError("check_norm_growth: features are linearly separable");

    CheckReport r;
    r.name = "norm_growth";
    const double init_norm = model.head.V.norm();
    std::vector<double> lp_norms{init_norm};
    ModelState lp = model;
    ModelState ft = model;
    for (int s = 0; s < config.steps; ++s) {
        lp = gd_step(lp, data, config.lp_learning_rate, Trainable::head_only());
        ft = gd_step(ft, data, config.ft_learning_rate, Trainable::all());
        lp_norms.push_back(lp.head.V.norm());
    }
    const double lp_increase = lp_norms.back() - init_norm;
    const double ft_increase = ft.head.V.norm() - init_norm;
    const auto first = static_cast<std::size_t>(std::floor(0.2 * config.steps));
    double worst_drop = 0.0;
    for (std::size_t t = first; t + 1 < lp_norms.size(); ++t)
        worst_drop = std::max(worst_drop, (lp_norms[t] - lp_norms[t + 1]) / std::max(lp_norms[t], 1e-300));
    r.measure("initial_head_norm", init_norm);
    r.measure("lp_final_head_norm", lp_norms.back());
    r.measure("ft_final_head_norm", ft.head.V.norm());
    r.measure("lp_norm_increase", lp_increase);
    r.measure("ft_norm_increase", ft_increase);
    r.measure("lp_max_relative_drop_last80", worst_drop);
    r.measure("steps", config.steps);
    r.tolerance("lp_max_relative_drop_last80", 1e-12);
    if (config.lp_learning_rate == 0.0 || lp_increase == 0.0) {
        r.notes.push_back("degenerate: no training signal");
        r.pass = false;
        return r;
    }
    r.pass = worst_drop <= 1e-12 && lp_increase > ft_increase;
    return r;
}

LinearizationErrors linearization_errors(const ModelState& model, const Dataset& data, const std::vector<double>& etas) {
    if (etas.size() < 3) throw PreconditionError("linearization check needs at least 3 learning rates");
    for (std::size_t i = 0; i < etas.size(); ++i) {
        if (!(etas[i] > 0.0)) throw PreconditionError("linearization check: learning rates must be > 0");
        if (i > 0 && !(etas[i] < etas[i - 1])) throw PreconditionError("linearization check: grid must strictly decrease");
    }
    LinearizationErrors out;
    out.etas = etas;
    const Eigen::MatrixXd logits0 = logits_of(model, data.samples);
    const Eigen::MatrixXd feats0 = features_of(model, data.samples);
    for (double eta : etas) {
        const LinearizedPrediction pred = linearized_one_epoch(model, data, eta, data.samples);
        const ModelState stepped = gd_step(model, data, eta, Trainable::all());
        const Eigen::MatrixXd dlogit = logits_of(stepped, data.samples) - logits0;
        const Eigen::MatrixXd dfeat = features_of(stepped, data.samples) - feats0;
        const double ln = pred.logit_delta.norm();
        const double fn = pred.feature_delta.norm();
        out.logit_errors.push_back(ln > 0.0 ? (dlogit - pred.logit_delta).norm() / ln : (dlogit - pred.logit_delta).norm());
        out.feature_errors.push_back(fn > 0.0 ? (dfeat - pred.feature_delta).norm() / fn : (dfeat - pred.feature_delta).norm());
    }
    return out;
}

double log_log_slope(const std::vector<double>& etas, const std::vector<double>& errors) {
    if (etas.size() != errors.size() || etas.size() < 2) throw DimensionError("log_log_slope: need matching series of length >= 2");
    double mx = 0.0, my = 0.0;
    const double n = static_cast<double>(etas.size());
    for (std::size_t i = 0; i < etas.size(); ++i) {
        if (!(errors[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        mx += std::log(etas[i]);
        my += std::log(errors[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < etas.size(); ++i) {
        const double dx = std::log(etas[i]) - mx;
        sxy += dx * (std::log(errors[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

CheckReport check_linearization_order(const ModelState& model, const Dataset& data, const std::vector<double>& etas) {
    constexpr double exact_tol = 1e-12;
    const LinearizationErrors errs = linearization_errors(model, data, etas);
    const double logit_slope = log_log_slope(errs.etas, errs.logit_errors);
    const double feature_slope = log_log_slope(errs.etas, errs.feature_errors);
    const double feature_max = *std::max_element(errs.feature_errors.begin(), errs.feature_errors.end());
    const bool feature_exact = feature_max <= exact_tol;
    auto in_band = [](double s) { return s >= 0.8 && s <= 1.2; };

    CheckReport r;
    r.name = "linearization_order";
    for (std::size_t i = 0; i < errs.etas.size(); ++i) {
        const std::string tag = "eta_" + std::to_string(i);
        r.measure(tag, errs.etas[i]);
        r.measure(tag + "_logit_relative_error", errs.logit_errors[i]);
        r.measure(tag + "_feature_relative_error", errs.feature_errors[i]);
    }
    r.measure("logit_slope", logit_slope);
    r.measure("feature_slope", feature_slope);
    r.measure("feature_max_relative_error", feature_max);
    r.tolerance("slope_low", 0.8);
    r.tolerance("slope_high", 1.2);
    r.tolerance("feature_exact", exact_tol);
    r.notes.push_back(std::string("architecture ") + std::string(to_string(model.arch())));
    if (feature_exact)
        r.notes.push_back("feature deltas match the prediction to rounding; one step is exactly linear in the feature parameters");
    r.pass = in_band(logit_slope) && (in_band(feature_slope) || feature_exact);
    return r;
}

}  // namespace lpft
