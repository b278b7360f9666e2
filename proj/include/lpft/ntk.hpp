#pragma once

#include "lpft/model.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace lpft {

/// Largest N*C a dense kernel may have.
inline constexpr Eigen::Index kMaxKernelRows = 2048;

/// Empirical NTK of a model over a sample set, split into the part coming from
/// the head parameters (P) and the part coming from the feature extractor (F).
/// Row/column (i, k) of either matrix sits at index i * C + k.
struct KernelDecomposition {
    Eigen::MatrixXd P;
    Eigen::MatrixXd F;
    Eigen::Index num_classes = 0;
    std::string anchor;  // ModelState::fingerprint() of the anchor model

    Eigen::Index num_rows() const { return P.rows() / num_classes; }
    Eigen::Index num_cols() const { return P.cols() / num_classes; }
    Eigen::MatrixXd total() const { return P + F; }
    Eigen::MatrixXd p_block(Eigen::Index i, Eigen::Index j) const {
        return P.block(i * num_classes, j * num_classes, num_classes, num_classes);
    }
    Eigen::MatrixXd f_block(Eigen::Index i, Eigen::Index j) const {
        return F.block(i * num_classes, j * num_classes, num_classes, num_classes);
    }
};

/// (<phi(x_i), phi(x_j)> + 1) I_C blocks.
Eigen::MatrixXd pretrain_component(const ModelState& model, const Eigen::MatrixXd& rows,
                                   const Eigen::MatrixXd& cols);
/// V J_phi(x_i) J_phi(x_j)^T V^T blocks.
Eigen::MatrixXd ft_component(const ModelState& model, const Eigen::MatrixXd& rows, const Eigen::MatrixXd& cols);

/// Square decomposition over one sample set; both parts are symmetrized.
KernelDecomposition compute_decomposition(const ModelState& model, const Eigen::MatrixXd& samples);
/// Rectangular decomposition K(rows, cols), used for test-vs-train kernels and probes.
KernelDecomposition compute_cross_decomposition(const ModelState& model, const Eigen::MatrixXd& rows,
                                                const Eigen::MatrixXd& cols);

/// Brute-force J J^T from full_jacobian, the reference for the decomposition.
Eigen::MatrixXd brute_force_ntk(const ModelState& model, const Eigen::MatrixXd& samples);

/// Theta^phi(x, x') = J_phi(x) J_phi(x')^T, h x h.
Eigen::MatrixXd compute_phi_kernel(const ModelState& model, const Eigen::VectorXd& x, const Eigen::VectorXd& x2);

/// Closed forms of the linear feature extractor phi(x) = B x.
Eigen::MatrixXd linear_phi_kernel_closed_form(const Eigen::VectorXd& x, const Eigen::VectorXd& x2, Eigen::Index h);
Eigen::MatrixXd linear_ft_block_closed_form(const Eigen::VectorXd& x, const Eigen::VectorXd& x2,
                                            const Eigen::MatrixXd& V);

struct FtRatio {
    double ratio = 0.0;
    int used = 0;
    int skipped = 0;  // samples whose denominator fell below 1e-15
};

/// Mean over samples a of ||sum_i F(a,i) delta_i|| / ||sum_i (P+F)(a,i) delta_i||.
/// `residuals` is N x C. Throws PreconditionError("degenerate residuals") when
/// every denominator vanishes.
FtRatio ft_ratio(const KernelDecomposition& decomp, const Eigen::MatrixXd& residuals);

struct KernelStats {
    int rank = 0;
    double frobenius_norm = 0.0;
    std::vector<double> normalized_singular_values;  // descending, sigma_i / sigma_max, sigma_i > 0
    std::optional<double> ft_ratio;
};

KernelStats kernel_stats(const Eigen::MatrixXd& kernel, double rank_rel_tol = 1e-10);

}  // namespace lpft
