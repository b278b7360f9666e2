#include "lpft/dataset.hpp"

#include "lpft/errors.hpp"
#include "lpft/rng.hpp"
#include "lpft/text_format.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lpft {

std::string_view to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
        case Split::ood: return "ood";
    }
    return "train";
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::train;
    if (text == "val") return Split::val;
    if (text == "test") return Split::test;
    if (text == "ood") return Split::ood;
    throw FormatError("unknown split tag '" + std::string(text) + "'");
}

double Dataset::input_norm_bound() const {
    if (samples.rows() == 0) return 0.0;
    return samples.rowwise().norm().maxCoeff();
}

Dataset Dataset::select(Split split) const {
    Dataset out;
    out.num_classes = num_classes;
    out.seed = seed;
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < size(); ++i)
        if (splits[static_cast<std::size_t>(i)] == split) rows.push_back(i);
    out.samples.resize(static_cast<Eigen::Index>(rows.size()), dim());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.samples.row(static_cast<Eigen::Index>(r)) = samples.row(rows[r]);
        out.labels.push_back(labels[static_cast<std::size_t>(rows[r])]);
        out.splits.push_back(split);
    }
    return out;
}

void Dataset::validate() const {
    if (samples.rows() < 1 || samples.cols() < 1) throw ParameterError("dataset needs N >= 1 and d >= 1");
    if (num_classes < 2) throw ParameterError("dataset needs at least 2 classes");
    if (labels.size() != static_cast<std::size_t>(samples.rows()) || splits.size() != labels.size())
        throw DimensionError("dataset label/split count does not match sample rows");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 1 || labels[i] > num_classes)
            throw FormatError("row " + std::to_string(i) + ": label " + std::to_string(labels[i]) +
                              " outside 1.." + std::to_string(num_classes));
        if (!samples.row(static_cast<Eigen::Index>(i)).allFinite())
            throw FormatError("row " + std::to_string(i) + ": non-finite sample entry");
    }
}

namespace {

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, CounterRng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

}  // namespace

Dataset gen_gaussian_clusters(int n_per_class, int num_classes, int dim, double separation,
                              double noise_scale, std::uint64_t seed) {
    if (n_per_class < 1) throw ParameterError("gen_gaussian_clusters: n_per_class must be >= 1");
    if (num_classes < 2) throw ParameterError("gen_gaussian_clusters: need at least 2 classes");
    if (dim < 2) throw ParameterError("gen_gaussian_clusters: dim must be >= 2");
    if (num_classes > dim)
        throw ParameterError("gen_gaussian_clusters: orthogonal class means need num_classes <= dim");
    if (!(noise_scale > 0.0) || !std::isfinite(noise_scale))
        throw ParameterError("gen_gaussian_clusters: noise_scale must be positive");
    if (!std::isfinite(separation)) throw ParameterError("gen_gaussian_clusters: separation must be finite");

    CounterRng mean_rng(seed, 1);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_matrix(dim, dim, mean_rng));
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd means = q.leftCols(num_classes);

    CounterRng noise_rng(seed, 2);
    Dataset ds;
    ds.num_classes = num_classes;
    ds.seed = seed;
    const int n = n_per_class * num_classes;
    ds.samples.resize(n, dim);
    for (int k = 0; k < num_classes; ++k) {
        for (int s = 0; s < n_per_class; ++s) {
            const int row = k * n_per_class + s;
            for (int j = 0; j < dim; ++j)
                ds.samples(row, j) = separation * means(j, k) + noise_scale * noise_rng.normal();
            ds.labels.push_back(k + 1);
            ds.splits.push_back(Split::train);
        }
    }
    return ds;
}

Dataset assign_splits(Dataset dataset, double val_fraction, double test_fraction, std::uint64_t seed) {
    if (val_fraction < 0 || test_fraction < 0 || val_fraction + test_fraction >= 1.0)
        throw ParameterError("assign_splits: fractions must be >= 0 and sum below 1");
    const auto n = static_cast<std::size_t>(dataset.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(seed, 3);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n)));
    for (std::size_t r = 0; r < n; ++r) {
        Split tag = Split::train;
        if (r < n_val) tag = Split::val;
        else if (r < n_val + n_test) tag = Split::test;
        dataset.splits[order[r]] = tag;
    }
    return dataset;
}

Dataset normalize_rows(Dataset dataset) {
    for (Eigen::Index i = 0; i < dataset.size(); ++i) {
        const double norm = dataset.samples.row(i).norm();
        if (norm > 0.0) dataset.samples.row(i) /= norm;
    }
    return dataset;
}

Eigen::MatrixXd row_space_basis(const Eigen::MatrixXd& samples, double rel_tol) {
    const Eigen::Index d = samples.cols();
    std::vector<Eigen::VectorXd> basis;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        Eigen::VectorXd w = samples.row(i).transpose();
        const double norm0 = w.norm();
        if (norm0 == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : basis) w -= q.dot(w) * q;
        const double residual = w.norm();
        if (residual > rel_tol * norm0 && static_cast<Eigen::Index>(basis.size()) < d)
            basis.push_back(w / residual);
    }
    Eigen::MatrixXd out(d, static_cast<Eigen::Index>(basis.size()));
    for (std::size_t k = 0; k < basis.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = basis[k];
    return out;
}

Eigen::MatrixXd gen_orthogonal_probe(const Dataset& dataset, int m, std::uint64_t seed) {
    if (m < 1) throw ParameterError("gen_orthogonal_probe: m must be >= 1");
    const Eigen::MatrixXd q = row_space_basis(dataset.samples);
    const Eigen::Index d = dataset.dim();
    if (q.cols() >= d) throw PreconditionError("gen_orthogonal_probe: empty orthogonal complement");

    CounterRng rng(seed, 4);
    Eigen::MatrixXd probes(m, d);
    for (int p = 0; p < m; ++p) {
        Eigen::VectorXd g(d);
        // Redraw in the (measure-zero) event that g lands in the row space.
        for (int attempt = 0;; ++attempt) {
            for (Eigen::Index j = 0; j < d; ++j) g(j) = rng.normal();
            const double g_norm = g.norm();
            for (int pass = 0; pass < 2; ++pass)
                for (Eigen::Index k = 0; k < q.cols(); ++k) g -= q.col(k).dot(g) * q.col(k);
            if (g.norm() > 1e-8 * g_norm) break;
            if (attempt > 100) throw Error("gen_orthogonal_probe: failed to draw a complement vector");
        }
        probes.row(p) = (g / g.norm()).transpose();
    }
    return probes;
}

std::string serialize_dataset(const Dataset& dataset) {
    std::string out = "lpft-dataset 1\n";
    out += "samples " + std::to_string(dataset.size()) + "\n";
    out += "dim " + std::to_string(dataset.dim()) + "\n";
    out += "num_classes " + std::to_string(dataset.num_classes) + "\n";
    out += "seed " + std::to_string(dataset.seed) + "\n";
    out += "rows\n";
    for (Eigen::Index i = 0; i < dataset.size(); ++i) {
        out += std::to_string(dataset.labels[static_cast<std::size_t>(i)]);
        out += ' ';
        out += to_string(dataset.splits[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < dataset.dim(); ++j) {
            out += ' ';
            out += text::format_double(dataset.samples(i, j));
        }
        out += '\n';
    }
    out += "end\n";
    return out;
}

namespace {

long expect_header(text::LineReader& reader, std::string_view key) {
    std::string_view line;
    if (!reader.next(line)) throw FormatError("dataset: missing '" + std::string(key) + "' line");
    auto tok = text::split_ws(line);
    long value = 0;
    if (tok.size() != 2 || tok[0] != key || !text::parse_long(tok[1], value))
        throw FormatError("dataset line " + std::to_string(reader.line_number()) + ": expected '" +
                          std::string(key) + " <integer>'");
    return value;
}

}  // namespace

Dataset parse_dataset(std::string_view text_in) {
    text::LineReader reader(text_in);
    std::string_view line;
    if (!reader.next(line) || text::split_ws(line) != std::vector<std::string_view>{"lpft-dataset", "1"})
        throw FormatError("dataset: missing 'lpft-dataset 1' header");
    const long n = expect_header(reader, "samples");
    const long d = expect_header(reader, "dim");
    const long c = expect_header(reader, "num_classes");
    const long seed = expect_header(reader, "seed");
    if (n < 1 || d < 1) throw FormatError("dataset: samples and dim must be positive");
    if (c < 2) throw FormatError("dataset: num_classes must be >= 2");
    if (!reader.next(line) || line != "rows") throw FormatError("dataset: missing 'rows' marker");

    Dataset ds;
    ds.num_classes = static_cast<int>(c);
    ds.seed = static_cast<std::uint64_t>(seed);
    ds.samples.resize(n, d);
    for (long i = 0; i < n; ++i) {
        const std::string where = "dataset row " + std::to_string(i) + " (line ";
        if (!reader.next(line)) throw FormatError("dataset: expected " + std::to_string(n) + " rows, got " + std::to_string(i));
        const std::string loc = where + std::to_string(reader.line_number()) + ")";
        auto tok = text::split_ws(line);
        if (static_cast<long>(tok.size()) != d + 2) throw FormatError(loc + ": expected label, split and " + std::to_string(d) + " values");
        long label = 0;
        if (!text::parse_long(tok[0], label)) throw FormatError(loc + ": bad label '" + std::string(tok[0]) + "'");
        if (label < 1 || label > c)
            throw FormatError(loc + ": label " + std::to_string(label) + " outside 1.." + std::to_string(c));
        Split split;
        try {
            split = parse_split(tok[1]);
        } catch (const FormatError& e) {
            throw FormatError(loc + ": " + e.what());
        }
        for (long j = 0; j < d; ++j) {
            double v = 0;
            if (!text::parse_double(tok[static_cast<std::size_t>(j + 2)], v) || !std::isfinite(v))
                throw FormatError(loc + ": non-finite or malformed value '" + std::string(tok[static_cast<std::size_t>(j + 2)]) + "'");
            ds.samples(i, j) = v;
        }
        ds.labels.push_back(static_cast<int>(label));
        ds.splits.push_back(split);
    }
    if (!reader.next(line) || line != "end") throw FormatError("dataset: missing 'end' marker after rows");
    return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    dataset.validate();
    text::write_file(path.string(), serialize_dataset(dataset));
}

Dataset load_dataset(const std::filesystem::path& path) { return parse_dataset(text::read_file(path.string())); }

}  // namespace lpft
