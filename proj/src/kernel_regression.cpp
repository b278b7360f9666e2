#include "lpft/kernel_regression.hpp"

#include "lpft/errors.hpp"
#include "lpft/logistic.hpp"
#include "lpft/rng.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace lpft {

namespace {

void check_labels(const std::vector<int>& labels, int num_classes) {
    if (num_classes < 2) throw ParameterError("kernel regression needs at least 2 classes");
    for (int y : labels)
        if (y < 1 || y > num_classes) throw ParameterError("kernel regression: label outside 1..C");
}

// Design matrix whose row (j,c) holds K[(j,c),(i,c)] at column i*C+c.
Eigen::MatrixXd block_diagonal_design(const Eigen::MatrixXd& kernel, Eigen::Index c) {
    Eigen::MatrixXd design = Eigen::MatrixXd::Zero(kernel.rows(), kernel.cols());
    const Eigen::Index rows = kernel.rows() / c;
    const Eigen::Index cols = kernel.cols() / c;
    for (Eigen::Index j = 0; j < rows; ++j)
        for (Eigen::Index i = 0; i < cols; ++i)
            for (Eigen::Index k = 0; k < c; ++k) design(j * c + k, i * c + k) = kernel(j * c + k, i * c + k);
    return design;
}

Eigen::MatrixXd sub_kernel(const Eigen::MatrixXd& kernel, const std::vector<Eigen::Index>& rows,
                           const std::vector<Eigen::Index>& cols, Eigen::Index c) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()) * c, static_cast<Eigen::Index>(cols.size()) * c);
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < cols.size(); ++b)
            out.block(static_cast<Eigen::Index>(a) * c, static_cast<Eigen::Index>(b) * c, c, c) =
                kernel.block(rows[a] * c, cols[b] * c, c, c);
    return out;
}

}  // namespace

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& kernel, double psd_tol) {
    if (kernel.rows() != kernel.cols()) throw DimensionError("kernel must be square");
    if (!kernel.allFinite()) throw ParameterError("kernel has non-finite entries");
    const double scale = std::max(1.0, kernel.cwiseAbs().maxCoeff());
    if ((kernel - kernel.transpose()).cwiseAbs().maxCoeff() > psd_tol * scale)
        throw PreconditionError("kernel is not symmetric within tolerance");
    const Eigen::MatrixXd sym = 0.5 * (kernel + kernel.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    const double min_eig = eig.eigenvalues().minCoeff();
    if (min_eig < -psd_tol * scale)
        throw PreconditionError("kernel is not positive semidefinite (eigenvalue " + std::to_string(min_eig) + ")");
    if (min_eig >= 0.0) return sym;
    const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
    return eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
}

KernelRegressionResult fit_kernel_regression(const Eigen::MatrixXd& kernel_train, const std::vector<int>& labels,
                                             int num_classes, double lambda) {
    check_labels(labels, num_classes);
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ParameterError("lambda must be finite and >= 0");
    const Eigen::Index c = num_classes;
    if (kernel_train.rows() != static_cast<Eigen::Index>(labels.size()) * c)
        throw DimensionError("kernel must be NC x NC for N labels");
    const Eigen::MatrixXd kernel = project_psd(kernel_train);
    const Eigen::Index n = static_cast<Eigen::Index>(labels.size());

    // Per class, K_cc = U S U^T. With beta_c = S^(1/2) U^T alpha_c the logits are
    // U S^(1/2) beta_c and the penalty is |beta_c|^2, a plain ridge problem that
    // stays well conditioned when K_cc is rank deficient.
    std::vector<Eigen::MatrixXd> back(static_cast<std::size_t>(c));
    std::vector<Eigen::Index> offset(static_cast<std::size_t>(c) + 1, 0);
    std::vector<Eigen::MatrixXd> factor(static_cast<std::size_t>(c));
    for (Eigen::Index k = 0; k < c; ++k) {
        Eigen::MatrixXd block(n, n);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i) block(j, i) = kernel(j * c + k, i * c + k);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block);
        const double cutoff = 1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
        std::vector<Eigen::Index> keep;
        for (Eigen::Index e = 0; e < n; ++e)
            if (eig.eigenvalues()(e) > cutoff) keep.push_back(e);
        const auto r = static_cast<Eigen::Index>(keep.size());
        factor[static_cast<std::size_t>(k)].resize(n, r);
        back[static_cast<std::size_t>(k)].resize(n, r);
        for (Eigen::Index e = 0; e < r; ++e) {
            const double root = std::sqrt(eig.eigenvalues()(keep[static_cast<std::size_t>(e)]));
            const auto u = eig.eigenvectors().col(keep[static_cast<std::size_t>(e)]);
            factor[static_cast<std::size_t>(k)].col(e) = u * root;
            back[static_cast<std::size_t>(k)].col(e) = u / root;
        }
        offset[static_cast<std::size_t>(k) + 1] = offset[static_cast<std::size_t>(k)] + r;
    }
    const Eigen::Index p = offset.back();
    Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n * c, p);
    for (Eigen::Index k = 0; k < c; ++k)
        for (Eigen::Index j = 0; j < n; ++j)
            design.block(j * c + k, offset[static_cast<std::size_t>(k)], 1, factor[static_cast<std::size_t>(k)].cols()) =
                factor[static_cast<std::size_t>(k)].row(j);

    std::vector<int> classes;
    classes.reserve(labels.size());
    for (int y : labels) classes.push_back(y - 1);
    const MultinomialFit fit = fit_multinomial(design, classes, num_classes, Eigen::MatrixXd::Identity(p, p), lambda);

    Eigen::VectorXd alpha(n * c);
    for (Eigen::Index k = 0; k < c; ++k) {
        const Eigen::VectorXd a = back[static_cast<std::size_t>(k)] *
                                  fit.weights.segment(offset[static_cast<std::size_t>(k)], factor[static_cast<std::size_t>(k)].cols());
        for (Eigen::Index i = 0; i < n; ++i) alpha(i * c + k) = a(i);
    }

    KernelRegressionResult out;
    out.alpha = alpha;
    out.lambda = lambda;
    out.num_classes = num_classes;
    out.objective = fit.objective;
    out.iterations = fit.iterations;
    out.train_accuracy = *predict_kernel_regression(kernel, out, labels).accuracy;
    return out;
}

Eigen::MatrixXd kernel_logits(const Eigen::MatrixXd& kernel_test_train, const KernelRegressionResult& result) {
    const Eigen::Index c = result.num_classes;
    if (c < 1 || kernel_test_train.cols() != result.alpha.size())
        throw DimensionError("test kernel column count does not match alpha");
    if (kernel_test_train.rows() % c != 0) throw DimensionError("test kernel rows are not a multiple of C");
    const Eigen::VectorXd flat = block_diagonal_design(kernel_test_train, c) * result.alpha;
    Eigen::MatrixXd logits(kernel_test_train.rows() / c, c);
    for (Eigen::Index m = 0; m < logits.rows(); ++m) logits.row(m) = flat.segment(m * c, c).transpose();
    return logits;
}

KernelPrediction predict_kernel_regression(const Eigen::MatrixXd& kernel_test_train, const KernelRegressionResult& result,
                                           const std::vector<int>& true_labels) {
    const Eigen::MatrixXd logits = kernel_logits(kernel_test_train, result);
    KernelPrediction out;
    for (Eigen::Index m = 0; m < logits.rows(); ++m) out.labels.push_back(argmax(logits.row(m).transpose()) + 1);
    if (!true_labels.empty()) {
        if (true_labels.size() != out.labels.size()) throw DimensionError("true label count does not match test rows");
        long correct = 0;
        for (std::size_t i = 0; i < out.labels.size(); ++i)
            if (out.labels[i] == true_labels[i]) ++correct;
        out.accuracy = static_cast<double>(correct) / static_cast<double>(out.labels.size());
    }
    return out;
}

double cross_validate_kernel_lambda(const Eigen::MatrixXd& kernel_train, const std::vector<int>& labels,
                                    int num_classes, const std::vector<double>& grid, int folds, std::uint64_t seed) {
    check_labels(labels, num_classes);
    if (grid.empty()) throw ParameterError("empty lambda grid");
    const std::size_t n = labels.size();
    if (folds < 2 || static_cast<std::size_t>(folds) > n) throw ParameterError("need 2 <= folds <= N");
    const Eigen::Index c = num_classes;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(seed, 21);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double best_lambda = grid.front();
    double best_loss = std::numeric_limits<double>::infinity();
    for (double lambda : grid) {
        double total = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<Eigen::Index> fit_rows, held_rows;
            std::vector<int> fit_labels, held_classes;
            for (std::size_t r = 0; r < n; ++r) {
                const auto idx = static_cast<Eigen::Index>(order[r]);
                if (static_cast<int>(r % static_cast<std::size_t>(folds)) == f) {
                    held_rows.push_back(idx);
                    held_classes.push_back(labels[order[r]] - 1);
                } else {
                    fit_rows.push_back(idx);
                    fit_labels.push_back(labels[order[r]]);
                }
            }
            const KernelRegressionResult res =
                fit_kernel_regression(sub_kernel(kernel_train, fit_rows, fit_rows, c), fit_labels, num_classes, lambda);
            const Eigen::MatrixXd logits = kernel_logits(sub_kernel(kernel_train, held_rows, fit_rows, c), res);
            for (Eigen::Index m = 0; m < logits.rows(); ++m)
                total += cross_entropy(logits.row(m).transpose(), held_classes[static_cast<std::size_t>(m)]);
        }
        const double loss = total / static_cast<double>(n);
        if (loss < best_loss) {
            best_loss = loss;
            best_lambda = lambda;
        }
    }
    return best_lambda;
}

}  // namespace lpft
