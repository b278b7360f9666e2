#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lpft {

enum class Split { train, val, test, ood };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

/// Labelled samples. Labels are class indices in 1..num_classes.
struct Dataset {
    Eigen::MatrixXd samples;  // N x d, one sample per row
    std::vector<int> labels;
    std::vector<Split> splits;
    int num_classes = 0;
    std::uint64_t seed = 0;

    Eigen::Index size() const { return samples.rows(); }
    Eigen::Index dim() const { return samples.cols(); }
    /// Zero-based class of row i.
    int class_index(Eigen::Index i) const { return labels[static_cast<std::size_t>(i)] - 1; }
    /// Maximum Euclidean row norm (the bound c on input norms).
    double input_norm_bound() const;

    /// Rows carrying the given split tag, in original order.
    Dataset select(Split split) const;

    /// Throws ParameterError / FormatError if any invariant is violated.
    void validate() const;

    bool operator==(const Dataset&) const = default;
};

/// Isotropic Gaussian classes around separation * mu_k, where the mu_k are
/// the first C columns of a seeded random orthogonal matrix. All rows are
/// tagged train.
Dataset gen_gaussian_clusters(int n_per_class, int num_classes, int dim, double separation,
                              double noise_scale, std::uint64_t seed);

/// Re-tags rows as val/test by a seeded permutation; remaining rows stay train.
Dataset assign_splits(Dataset dataset, double val_fraction, double test_fraction,
                      std::uint64_t seed);

/// Scales every row to unit norm (zero rows are left untouched).
Dataset normalize_rows(Dataset dataset);

/// Orthonormal basis (as columns) of the row space of `samples`, computed with
/// modified Gram-Schmidt plus a re-orthogonalization pass. Rows whose residual
/// falls below rel_tol times their norm are treated as dependent.
Eigen::MatrixXd row_space_basis(const Eigen::MatrixXd& samples, double rel_tol = 1e-12);

/// m unit-norm points orthogonal to every training sample (m x d).
Eigen::MatrixXd gen_orthogonal_probe(const Dataset& dataset, int m, std::uint64_t seed);

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

std::string serialize_dataset(const Dataset& dataset);
Dataset parse_dataset(std::string_view text);

}  // namespace lpft
