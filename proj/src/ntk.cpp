#include "lpft/ntk.hpp"

#include "lpft/errors.hpp"

#include <algorithm>
#include <cmath>

namespace lpft {

namespace {

void check_size(const ModelState& model, const Eigen::MatrixXd& rows, const Eigen::MatrixXd& cols) {
    if (rows.cols() != model.input_dim() || cols.cols() != model.input_dim())
        throw DimensionError("kernel inputs do not match the model input dimension");
    const Eigen::Index c = model.num_classes();
    if (rows.rows() * c > kMaxKernelRows || cols.rows() * c > kMaxKernelRows)
        throw ParameterError("kernel would exceed " + std::to_string(kMaxKernelRows) + " rows (N*C)");
}

// Stacked V J_phi(x_i), (N*C) x p_phi.
Eigen::MatrixXd stacked_head_jacobians(const ModelState& model, const Eigen::MatrixXd& inputs) {
    const Eigen::Index c = model.num_classes();
    Eigen::MatrixXd out(inputs.rows() * c, model.feature_param_count());
    for (Eigen::Index i = 0; i < inputs.rows(); ++i)
        out.middleRows(i * c, c) = model.head.V * feature_jacobian(model, inputs.row(i).transpose());
    return out;
}

void symmetrize(Eigen::MatrixXd& m) {
    Eigen::MatrixXd t = m.transpose();
    m = 0.5 * (m + t);
}

}  // namespace

Eigen::MatrixXd pretrain_component(const ModelState& model, const Eigen::MatrixXd& rows, const Eigen::MatrixXd& cols) {
    check_size(model, rows, cols);
    const Eigen::Index c = model.num_classes();
    const Eigen::MatrixXd gram = features_of(model, rows) * features_of(model, cols).transpose();
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(rows.rows() * c, cols.rows() * c);
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
        for (Eigen::Index j = 0; j < cols.rows(); ++j)
            for (Eigen::Index k = 0; k < c; ++k) p(i * c + k, j * c + k) = gram(i, j) + 1.0;
    return p;
}

Eigen::MatrixXd ft_component(const ModelState& model, const Eigen::MatrixXd& rows, const Eigen::MatrixXd& cols) {
    check_size(model, rows, cols);
    const Eigen::MatrixXd left = stacked_head_jacobians(model, rows);
    if (&rows == &cols) return left * left.transpose();
    return left * stacked_head_jacobians(model, cols).transpose();
}

KernelDecomposition compute_decomposition(const ModelState& model, const Eigen::MatrixXd& samples) {
    KernelDecomposition out;
    out.num_classes = model.num_classes();
    out.anchor = model.fingerprint();
    out.P = pretrain_component(model, samples, samples);
    out.F = ft_component(model, samples, samples);
    symmetrize(out.P);
    symmetrize(out.F);
    return out;
}

KernelDecomposition compute_cross_decomposition(const ModelState& model, const Eigen::MatrixXd& rows,
                                                const Eigen::MatrixXd& cols) {
    KernelDecomposition out;
    out.num_classes = model.num_classes();
    out.anchor = model.fingerprint();
    out.P = pretrain_component(model, rows, cols);
    out.F = ft_component(model, rows, cols);
    return out;
}

Eigen::MatrixXd brute_force_ntk(const ModelState& model, const Eigen::MatrixXd& samples) {
    check_size(model, samples, samples);
    const Eigen::Index c = model.num_classes();
    Eigen::MatrixXd j(samples.rows() * c, model.layout().total);
    for (Eigen::Index i = 0; i < samples.rows(); ++i)
        j.middleRows(i * c, c) = full_jacobian(model, samples.row(i).transpose());
    return j * j.transpose();
}

Eigen::MatrixXd compute_phi_kernel(const ModelState& model, const Eigen::VectorXd& x, const Eigen::VectorXd& x2) {
    return feature_jacobian(model, x) * feature_jacobian(model, x2).transpose();
}

Eigen::MatrixXd linear_phi_kernel_closed_form(const Eigen::VectorXd& x, const Eigen::VectorXd& x2, Eigen::Index h) {
    return x.dot(x2) * Eigen::MatrixXd::Identity(h, h);
}

Eigen::MatrixXd linear_ft_block_closed_form(const Eigen::VectorXd& x, const Eigen::VectorXd& x2,
                                            const Eigen::MatrixXd& V) {
    return x.dot(x2) * (V * V.transpose());
}

FtRatio ft_ratio(const KernelDecomposition& decomp, const Eigen::MatrixXd& residuals) {
    const Eigen::Index c = decomp.num_classes;
    if (residuals.cols() != c || residuals.rows() != decomp.num_cols())
        throw DimensionError("ft_ratio: residuals must be N x C matching the kernel columns");
    Eigen::VectorXd delta(residuals.size());
    for (Eigen::Index i = 0; i < residuals.rows(); ++i) delta.segment(i * c, c) = residuals.row(i).transpose();
    const Eigen::VectorXd ft_term = decomp.F * delta;
    const Eigen::VectorXd full_term = decomp.P * delta + ft_term;

    FtRatio out;
    double sum = 0.0;
    for (Eigen::Index a = 0; a < decomp.num_rows(); ++a) {
        const double den = full_term.segment(a * c, c).norm();
        if (den < 1e-15) {
            ++out.skipped;
            continue;
        }
        sum += ft_term.segment(a * c, c).norm() / den;
        ++out.used;
    }
    if (out.used == 0) throw PreconditionError("ft_ratio: degenerate residuals (every denominator vanishes)");
    out.ratio = sum / out.used;
    return out;
}

KernelStats kernel_stats(const Eigen::MatrixXd& kernel, double rank_rel_tol) {
    if (kernel.rows() != kernel.cols()) throw DimensionError("kernel_stats: matrix must be square");
    const double scale = std::max(1.0, kernel.cwiseAbs().maxCoeff());
    const double asym = (kernel - kernel.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale)
        throw PreconditionError("kernel_stats: matrix is not symmetric (max |K - K^T| = " + std::to_string(asym) + ")");
    if (!(rank_rel_tol >= 0.0)) throw ParameterError("kernel_stats: rank_rel_tol must be >= 0");

    KernelStats out;
    out.frobenius_norm = kernel.norm();
    if (kernel.size() == 0) return out;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (kernel + kernel.transpose()), Eigen::EigenvaluesOnly);
    std::vector<double> sv(static_cast<std::size_t>(kernel.rows()));
    for (Eigen::Index i = 0; i < kernel.rows(); ++i) sv[static_cast<std::size_t>(i)] = std::abs(eig.eigenvalues()(i));
    std::sort(sv.begin(), sv.end(), std::greater<>());
    const double sigma_max = sv.front();
    if (sigma_max == 0.0) return out;
    for (double s : sv) {
        if (s > rank_rel_tol * sigma_max) ++out.rank;
        if (s > 0.0) out.normalized_singular_values.push_back(s / sigma_max);
    }
    return out;
}

}  // namespace lpft
