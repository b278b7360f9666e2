#include "lpft/logistic.hpp"

#include "lpft/errors.hpp"

#include <cmath>
#include <limits>

namespace lpft {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - m).exp().matrix();
    return e / e.sum();
}

double log_sum_exp(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    return m + std::log((logits.array() - m).exp().sum());
}

double cross_entropy(const Eigen::VectorXd& logits, int label) {
    // log(1 + sum_{k != y} exp(z_k - z_y)) keeps tiny losses accurate.
    const double m = logits.maxCoeff();
    if (logits(label) == m) {
        double tail = 0.0;
        bool skipped_self = false;
        for (Eigen::Index k = 0; k < logits.size(); ++k) {
            if (k == label && !skipped_self) {
                skipped_self = true;
                continue;
            }
            tail += std::exp(logits(k) - m);
        }
        return std::log1p(tail);
    }
    return log_sum_exp(logits) - logits(label);
}

int argmax(const Eigen::VectorXd& v) {
    int best = 0;
    for (Eigen::Index k = 1; k < v.size(); ++k)
        if (v(k) > v(best)) best = static_cast<int>(k);
    return best;
}

double multinomial_loss(const Eigen::MatrixXd& design, const std::vector<int>& classes, int num_classes,
                        const Eigen::VectorXd& w) {
    const Eigen::VectorXd z = design * w;
    double total = 0.0;
    for (std::size_t i = 0; i < classes.size(); ++i)
        total += cross_entropy(z.segment(static_cast<Eigen::Index>(i) * num_classes, num_classes), classes[i]);
    return total / static_cast<double>(classes.size());
}

MultinomialFit fit_multinomial(const Eigen::MatrixXd& design, const std::vector<int>& classes, int num_classes,
                               const Eigen::MatrixXd& regularizer, double lambda, double tol, int max_iterations) {
    const Eigen::Index n = static_cast<Eigen::Index>(classes.size());
    const Eigen::Index c = num_classes;
    const Eigen::Index p = design.cols();
    if (n == 0) throw ParameterError("fit_multinomial: no samples");
    if (design.rows() != n * c) throw DimensionError("fit_multinomial: design must have N*C rows");
    if (regularizer.rows() != p || regularizer.cols() != p) throw DimensionError("fit_multinomial: regularizer must be p x p");
    if (!(lambda >= 0.0)) throw ParameterError("fit_multinomial: lambda must be >= 0");

    const double inv_n = 1.0 / static_cast<double>(n);
    auto objective = [&](const Eigen::VectorXd& w) {
        return multinomial_loss(design, classes, num_classes, w) + 0.5 * lambda * w.dot(regularizer * w);
    };

    MultinomialFit fit;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    double f = objective(w);
    for (int iter = 0; iter < max_iterations; ++iter) {
        const Eigen::VectorXd z = design * w;
        Eigen::VectorXd grad = lambda * (regularizer * w);
        Eigen::MatrixXd hess = lambda * regularizer;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto rows = design.middleRows(i * c, c);
            const Eigen::VectorXd prob = softmax(z.segment(i * c, c));
            Eigen::VectorXd resid = prob;
            resid(classes[static_cast<std::size_t>(i)]) -= 1.0;
            grad.noalias() += inv_n * (rows.transpose() * resid);
            Eigen::MatrixXd curvature = -prob * prob.transpose();
            curvature.diagonal() += prob;
            hess.noalias() += inv_n * (rows.transpose() * curvature * rows);
        }
        fit.gradient_norm = grad.norm();
        fit.iterations = iter;
        if (fit.gradient_norm <= tol) {
            fit.weights = w;
            fit.objective = f;
            return fit;
        }

        // Damped Newton direction; damping grows until the solve gives descent.
        double damping = 1e-12 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
        Eigen::VectorXd step;
        for (int tries = 0; tries < 40; ++tries) {
            Eigen::MatrixXd shifted = hess;
            shifted.diagonal().array() += damping;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(shifted);
            step = -ldlt.solve(grad);
            if (ldlt.info() == Eigen::Success && step.allFinite() && step.dot(grad) < 0) break;
            damping *= 10.0;
            step.resize(0);
        }
        if (step.size() == 0) step = -grad;

        double t = 1.0;
        const double slope = step.dot(grad);
        Eigen::VectorXd candidate;
        double f_new = f;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            candidate = w + t * step;
            f_new = objective(candidate);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            // No decrease representable in double precision: at the optimum up to rounding.
            if (fit.gradient_norm <= 1e3 * tol) {
                fit.weights = w;
                fit.objective = f;
                return fit;
            }
            throw ConvergenceError("fit_multinomial: line search failed at gradient norm " +
                                   std::to_string(fit.gradient_norm));
        }
        w = candidate;
        f = f_new;
    }
    throw ConvergenceError("fit_multinomial: no convergence within " + std::to_string(max_iterations) + " iterations");
}

}  // namespace lpft
