#include "lpft/model.hpp"

#include "lpft/errors.hpp"
#include "lpft/rng.hpp"
#include "lpft/text_format.hpp"

#include <cmath>
#include <cstring>
#include <iomanip>
#include <sstream>

namespace lpft {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void append_row_major(const Eigen::MatrixXd& m, Eigen::VectorXd& out, Eigen::Index& pos) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out(pos++) = m(i, j);
}

void read_row_major(Eigen::MatrixXd& m, const Eigen::VectorXd& in, Eigen::Index& pos) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = in(pos++);
}

void append_vector(const Eigen::VectorXd& v, Eigen::VectorXd& out, Eigen::Index& pos) {
    out.segment(pos, v.size()) = v;
    pos += v.size();
}

void check_input(const ModelState& model, const Eigen::VectorXd& x) {
    if (x.size() != model.input_dim())
        throw DimensionError("input has dimension " + std::to_string(x.size()) + ", model expects " +
                             std::to_string(model.input_dim()));
}

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, CounterRng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = stddev * rng.normal();
    return m;
}

// Activations a_0 = x, a_l = tanh(W_l a_{l-1} + c_l).
std::vector<Eigen::VectorXd> mlp_activations(const MlpFeatureParams& p, const Eigen::VectorXd& x) {
    std::vector<Eigen::VectorXd> acts;
    acts.reserve(p.weights.size() + 1);
    acts.push_back(x);
    for (std::size_t l = 0; l < p.weights.size(); ++l)
        acts.push_back((p.weights[l] * acts.back() + p.biases[l]).array().tanh().matrix());
    return acts;
}

std::vector<Eigen::Index> mlp_offsets(const MlpFeatureParams& p) {
    std::vector<Eigen::Index> offsets;
    Eigen::Index pos = 0;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        offsets.push_back(pos);
        pos += p.weights[l].size() + p.biases[l].size();
    }
    offsets.push_back(pos);
    return offsets;
}

}  // namespace

std::string_view to_string(Architecture arch) {
    switch (arch) {
        case Architecture::linear: return "linear";
        case Architecture::mlp: return "mlp";
        case Architecture::lora: return "lora";
    }
    return "linear";
}

Architecture parse_architecture(std::string_view text) {
    if (text == "linear") return Architecture::linear;
    if (text == "mlp") return Architecture::mlp;
    if (text == "lora") return Architecture::lora;
    throw ParameterError("unknown architecture '" + std::string(text) + "'");
}

Architecture ModelState::arch() const {
    return std::visit(Overloaded{[](const LinearFeatureParams&) { return Architecture::linear; },
                                 [](const MlpFeatureParams&) { return Architecture::mlp; },
                                 [](const LoraAdapter&) { return Architecture::lora; }},
                      feature);
}

Eigen::Index ModelState::input_dim() const {
    return std::visit(Overloaded{[](const LinearFeatureParams& p) { return p.B.cols(); },
                                 [](const MlpFeatureParams& p) { return p.weights.front().cols(); },
                                 [](const LoraAdapter& p) { return p.base.cols(); }},
                      feature);
}

Eigen::Index ModelState::feature_dim() const {
    return std::visit(Overloaded{[](const LinearFeatureParams& p) { return p.B.rows(); },
                                 [](const MlpFeatureParams& p) { return p.weights.back().rows(); },
                                 [](const LoraAdapter& p) { return p.base.rows(); }},
                      feature);
}

Eigen::Index ModelState::feature_param_count() const {
    return std::visit(Overloaded{[](const LinearFeatureParams& p) { return p.B.size(); },
                                 [](const MlpFeatureParams& p) { return mlp_offsets(p).back(); },
                                 [](const LoraAdapter& p) { return p.lora_b.size() + p.lora_a.size(); }},
                      feature);
}

ParamLayout ModelState::layout() const {
    ParamLayout l;
    l.head_weight = {0, head.V.size()};
    l.head_bias = {head.V.size(), head.b.size()};
    l.feature = {head.V.size() + head.b.size(), feature_param_count()};
    l.total = l.feature.offset + l.feature.size;
    return l;
}

Eigen::VectorXd ModelState::flatten_feature() const {
    Eigen::VectorXd out(feature_param_count());
    Eigen::Index pos = 0;
    std::visit(Overloaded{[&](const LinearFeatureParams& p) { append_row_major(p.B, out, pos); },
                          [&](const MlpFeatureParams& p) {
                              for (std::size_t l = 0; l < p.weights.size(); ++l) {
                                  append_row_major(p.weights[l], out, pos);
                                  append_vector(p.biases[l], out, pos);
                              }
                          },
                          [&](const LoraAdapter& p) {
                              append_row_major(p.lora_b, out, pos);
                              append_row_major(p.lora_a, out, pos);
                          }},
               feature);
    return out;
}

Eigen::VectorXd ModelState::flatten() const {
    const ParamLayout l = layout();
    Eigen::VectorXd out(l.total);
    Eigen::Index pos = 0;
    append_row_major(head.V, out, pos);
    append_vector(head.b, out, pos);
    out.segment(l.feature.offset, l.feature.size) = flatten_feature();
    return out;
}

ModelState ModelState::with_feature_parameters(const Eigen::VectorXd& theta_phi) const {
    if (theta_phi.size() != feature_param_count())
        throw DimensionError("feature parameter vector has wrong length");
    ModelState out = *this;
    Eigen::Index pos = 0;
    std::visit(Overloaded{[&](LinearFeatureParams& p) { read_row_major(p.B, theta_phi, pos); },
                          [&](MlpFeatureParams& p) {
                              for (std::size_t l = 0; l < p.weights.size(); ++l) {
                                  read_row_major(p.weights[l], theta_phi, pos);
                                  p.biases[l] = theta_phi.segment(pos, p.biases[l].size());
                                  pos += p.biases[l].size();
                              }
                          },
                          [&](LoraAdapter& p) {
                              read_row_major(p.lora_b, theta_phi, pos);
                              read_row_major(p.lora_a, theta_phi, pos);
                          }},
               out.feature);
    return out;
}

ModelState ModelState::with_parameters(const Eigen::VectorXd& theta) const {
    const ParamLayout l = layout();
    if (theta.size() != l.total) throw DimensionError("parameter vector has wrong length");
    ModelState out = with_feature_parameters(theta.segment(l.feature.offset, l.feature.size));
    Eigen::Index pos = 0;
    read_row_major(out.head.V, theta, pos);
    out.head.b = theta.segment(l.head_bias.offset, l.head_bias.size);
    return out;
}

ModelState ModelState::with_head(HeadParams new_head) const {
    if (new_head.V.rows() != head.V.rows() || new_head.V.cols() != head.V.cols() ||
        new_head.b.size() != head.b.size())
        throw DimensionError("replacement head has wrong shape");
    ModelState out = *this;
    out.head = std::move(new_head);
    return out;
}

std::string ModelState::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](const void* data, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    const auto tag = static_cast<int>(arch());
    feed(&tag, sizeof tag);
    const Eigen::VectorXd theta = flatten();
    feed(theta.data(), static_cast<std::size_t>(theta.size()) * sizeof(double));
    if (const auto* lora = std::get_if<LoraAdapter>(&feature))
        feed(lora->base.data(), static_cast<std::size_t>(lora->base.size()) * sizeof(double));
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << h;
    return ss.str();
}

ModelState init_model(const ArchitectureSpec& arch, int input_dim, int feature_dim, int num_classes,
                      const HeadInit& head_init, std::uint64_t seed) {
    if (input_dim < 1 || feature_dim < 1 || num_classes < 1)
        throw ParameterError("init_model: dimensions must be positive");
    if (head_init.kind == HeadInit::Kind::gaussian && !(head_init.scale > 0.0))
        throw ParameterError("init_model: gaussian head scale must be positive");

    CounterRng head_rng(seed, 10);
    CounterRng feature_rng(seed, 11);
    ModelState model;
    if (head_init.kind == HeadInit::Kind::zeros) {
        model.head.V = Eigen::MatrixXd::Zero(num_classes, feature_dim);
        model.head.b = Eigen::VectorXd::Zero(num_classes);
    } else {
        model.head.V = gaussian(num_classes, feature_dim, head_init.scale, head_rng);
        model.head.b = gaussian(num_classes, 1, head_init.scale, head_rng).col(0);
    }

    const double base_std = 1.0 / std::sqrt(static_cast<double>(input_dim));
    switch (arch.kind) {
        case Architecture::linear:
            model.feature = LinearFeatureParams{gaussian(feature_dim, input_dim, base_std, feature_rng)};
            break;
        case Architecture::mlp: {
            if (arch.mlp_hidden_layers < 0 || arch.mlp_width < 1)
                throw ParameterError("init_model: MLP needs hidden_layers >= 0 and width >= 1");
            MlpFeatureParams p;
            int fan_in = input_dim;
            for (int l = 0; l <= arch.mlp_hidden_layers; ++l) {
                const int fan_out = l == arch.mlp_hidden_layers ? feature_dim : arch.mlp_width;
                p.weights.push_back(gaussian(fan_out, fan_in, 1.0 / std::sqrt(static_cast<double>(fan_in)), feature_rng));
                p.biases.push_back(gaussian(fan_out, 1, 0.1, feature_rng).col(0));
                fan_in = fan_out;
            }
            model.feature = std::move(p);
            break;
        }
        case Architecture::lora: {
            ModelState base = model;
            base.feature = LinearFeatureParams{gaussian(feature_dim, input_dim, base_std, feature_rng)};
            return attach_lora(base, arch.lora_rank, arch.lora_variance, seed);
        }
    }
    return model;
}

ModelState attach_lora(const ModelState& linear_model, int rank, double variance, std::uint64_t seed) {
    const auto* lin = std::get_if<LinearFeatureParams>(&linear_model.feature);
    if (lin == nullptr) throw UnsupportedArchitectureError("LoRA attaches only to the linear feature extractor");
    const Eigen::Index h = lin->B.rows();
    const Eigen::Index d = lin->B.cols();
    if (rank < 1 || rank > std::min(h, d))
        throw ParameterError("LoRA rank " + std::to_string(rank) + " must lie in 1..min(h, d) = " +
                             std::to_string(std::min(h, d)));
    if (!(variance > 0.0)) throw ParameterError("LoRA init variance must be positive");
    CounterRng rng(seed, 12);
    LoraAdapter adapter;
    adapter.base = lin->B;
    adapter.lora_a = gaussian(rank, d, std::sqrt(variance), rng);
    adapter.lora_b = Eigen::MatrixXd::Zero(h, rank);
    adapter.init_variance = variance;
    ModelState out;
    out.head = linear_model.head;
    out.feature = std::move(adapter);
    return out;
}

namespace {

Eigen::VectorXd features_only(const ModelState& model, const Eigen::VectorXd& x) {
    return std::visit(Overloaded{[&](const LinearFeatureParams& p) -> Eigen::VectorXd { return p.B * x; },
                                 [&](const MlpFeatureParams& p) -> Eigen::VectorXd { return mlp_activations(p, x).back(); },
                                 [&](const LoraAdapter& p) -> Eigen::VectorXd {
                                     return p.base * x + p.lora_b * (p.lora_a * x);
                                 }},
                      model.feature);
}

}  // namespace

ForwardResult forward(const ModelState& model, const Eigen::VectorXd& x) {
    check_input(model, x);
    ForwardResult out;
    out.features = features_only(model, x);
    out.logits = model.head.V * out.features + model.head.b;
    return out;
}

Eigen::MatrixXd features_of(const ModelState& model, const Eigen::MatrixXd& inputs) {
    Eigen::MatrixXd out(inputs.rows(), model.feature_dim());
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
        const Eigen::VectorXd x = inputs.row(i).transpose();
        check_input(model, x);
        out.row(i) = features_only(model, x).transpose();
    }
    return out;
}

Eigen::MatrixXd logits_of(const ModelState& model, const Eigen::MatrixXd& inputs) {
    Eigen::MatrixXd out(inputs.rows(), model.num_classes());
    for (Eigen::Index i = 0; i < inputs.rows(); ++i)
        out.row(i) = forward(model, inputs.row(i).transpose()).logits.transpose();
    return out;
}

Eigen::MatrixXd feature_jacobian(const ModelState& model, const Eigen::VectorXd& x) {
    check_input(model, x);
    const Eigen::Index h = model.feature_dim();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(h, model.feature_param_count());
    std::visit(
        Overloaded{
            [&](const LinearFeatureParams& p) {
                // d(Bx)_a / dB_{a,j} = x_j
                const Eigen::Index d = p.B.cols();
                for (Eigen::Index a = 0; a < h; ++a) jac.block(a, a * d, 1, d) = x.transpose();
            },
            [&](const LoraAdapter& p) {
                const Eigen::Index r = p.lora_a.rows();
                const Eigen::Index d = p.lora_a.cols();
                const Eigen::VectorXd ax = p.lora_a * x;
                for (Eigen::Index a = 0; a < h; ++a) jac.block(a, a * r, 1, r) = ax.transpose();
                // d phi_a / dA_{s,j} = B_lora(a, s) x_j
                const Eigen::Index a_off = h * r;
                for (Eigen::Index a = 0; a < h; ++a)
                    for (Eigen::Index s = 0; s < r; ++s)
                        jac.block(a, a_off + s * d, 1, d) = p.lora_b(a, s) * x.transpose();
            },
            [&](const MlpFeatureParams& p) {
                const auto acts = mlp_activations(p, x);
                const auto offsets = mlp_offsets(p);
                // grad = d phi / d z_l, h x n_l
                Eigen::MatrixXd grad = (1.0 - acts.back().array().square()).matrix().asDiagonal();
                for (std::size_t l = p.weights.size(); l-- > 0;) {
                    const Eigen::VectorXd& input = acts[l];
                    const Eigen::Index rows = p.weights[l].rows();
                    const Eigen::Index cols = p.weights[l].cols();
                    Eigen::Index pos = offsets[l];
                    for (Eigen::Index i = 0; i < rows; ++i)
                        for (Eigen::Index j = 0; j < cols; ++j) jac.col(pos++) = grad.col(i) * input(j);
                    jac.middleCols(pos, rows) = grad;
                    if (l > 0) {
                        const Eigen::ArrayXd slope = 1.0 - input.array().square();
                        grad = (grad * p.weights[l]) * slope.matrix().asDiagonal();
                    }
                }
            }},
        model.feature);
    return jac;
}

Eigen::VectorXd feature_vjp(const ModelState& model, const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
    check_input(model, x);
    if (g.size() != model.feature_dim()) throw DimensionError("feature_vjp: cotangent has wrong length");
    Eigen::VectorXd out(model.feature_param_count());
    std::visit(Overloaded{[&](const LinearFeatureParams& p) {
                              const Eigen::Index d = p.B.cols();
                              for (Eigen::Index a = 0; a < p.B.rows(); ++a) out.segment(a * d, d) = g(a) * x;
                          },
                          [&](const LoraAdapter& p) {
                              const Eigen::Index h = p.lora_b.rows();
                              const Eigen::Index r = p.lora_a.rows();
                              const Eigen::Index d = p.lora_a.cols();
                              const Eigen::VectorXd ax = p.lora_a * x;
                              for (Eigen::Index a = 0; a < h; ++a) out.segment(a * r, r) = g(a) * ax;
                              const Eigen::VectorXd bg = p.lora_b.transpose() * g;
                              for (Eigen::Index s = 0; s < r; ++s) out.segment(h * r + s * d, d) = bg(s) * x;
                          },
                          [&](const MlpFeatureParams& p) {
                              const auto acts = mlp_activations(p, x);
                              const auto offsets = mlp_offsets(p);
                              Eigen::VectorXd delta = g.cwiseProduct((1.0 - acts.back().array().square()).matrix());
                              for (std::size_t l = p.weights.size(); l-- > 0;) {
                                  const Eigen::VectorXd& input = acts[l];
                                  const Eigen::Index rows = p.weights[l].rows();
                                  const Eigen::Index cols = p.weights[l].cols();
                                  Eigen::Index pos = offsets[l];
                                  for (Eigen::Index i = 0; i < rows; ++i) {
                                      out.segment(pos, cols) = delta(i) * input;
                                      pos += cols;
                                  }
                                  out.segment(pos, rows) = delta;
                                  if (l > 0)
                                      delta = (p.weights[l].transpose() * delta)
                                                  .cwiseProduct((1.0 - input.array().square()).matrix());
                              }
                          }},
               model.feature);
    return out;
}

Eigen::MatrixXd full_jacobian(const ModelState& model, const Eigen::VectorXd& x) {
    const ForwardResult fw = forward(model, x);
    const ParamLayout l = model.layout();
    const Eigen::Index c = model.num_classes();
    const Eigen::Index h = model.feature_dim();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(c, l.total);
    // d f_k / d V_{k,a} = phi_a, V row-major
    for (Eigen::Index k = 0; k < c; ++k) jac.block(k, l.head_weight.offset + k * h, 1, h) = fw.features.transpose();
    jac.block(0, l.head_bias.offset, c, c).setIdentity();
    jac.middleCols(l.feature.offset, l.feature.size) = model.head.V * feature_jacobian(model, x);
    return jac;
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

void write_matrix(std::string& out, const std::string& name, const Eigen::MatrixXd& m) {
    out += "matrix " + name + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out += ' ';
            out += text::format_double(m(i, j));
        }
        out += '\n';
    }
}

Eigen::MatrixXd read_matrix(text::LineReader& reader, const std::string& expected_name) {
    std::string_view line;
    if (!reader.next(line)) throw FormatError("model: missing matrix '" + expected_name + "'");
    auto tok = text::split_ws(line);
    long rows = 0, cols = 0;
    if (tok.size() != 4 || tok[0] != "matrix" || tok[1] != expected_name || !text::parse_long(tok[2], rows) ||
        !text::parse_long(tok[3], cols) || rows < 0 || cols < 0)
        throw FormatError("model line " + std::to_string(reader.line_number()) + ": expected 'matrix " +
                          expected_name + " <rows> <cols>'");
    Eigen::MatrixXd m(rows, cols);
    for (long i = 0; i < rows; ++i) {
        if (!reader.next(line)) throw FormatError("model: matrix '" + expected_name + "' truncated");
        auto vals = text::split_ws(line);
        if (static_cast<long>(vals.size()) != cols)
            throw FormatError("model line " + std::to_string(reader.line_number()) + ": expected " +
                              std::to_string(cols) + " values");
        for (long j = 0; j < cols; ++j) {
            double v = 0;
            if (!text::parse_double(vals[static_cast<std::size_t>(j)], v) || !std::isfinite(v))
                throw FormatError("model line " + std::to_string(reader.line_number()) + ": non-finite or malformed value");
            m(i, j) = v;
        }
    }
    return m;
}

}  // namespace

std::string serialize_model(const ModelState& model) {
    std::string out = "lpft-model 1\n";
    out += "arch " + std::string(to_string(model.arch())) + "\n";
    write_matrix(out, "V", model.head.V);
    write_matrix(out, "b", model.head.b);
    std::visit(Overloaded{[&](const LinearFeatureParams& p) { write_matrix(out, "B", p.B); },
                          [&](const MlpFeatureParams& p) {
                              out += "layers " + std::to_string(p.weights.size()) + "\n";
                              for (std::size_t l = 0; l < p.weights.size(); ++l) {
                                  write_matrix(out, "W" + std::to_string(l), p.weights[l]);
                                  write_matrix(out, "c" + std::to_string(l), p.biases[l]);
                              }
                          },
                          [&](const LoraAdapter& p) {
                              out += "init_variance " + text::format_double(p.init_variance) + "\n";
                              write_matrix(out, "B0", p.base);
                              write_matrix(out, "A_lora", p.lora_a);
                              write_matrix(out, "B_lora", p.lora_b);
                          }},
               model.feature);
    out += "end\n";
    return out;
}

ModelState parse_model(std::string_view text_in) {
    text::LineReader reader(text_in);
    std::string_view line;
    if (!reader.next(line) || line != "lpft-model 1") throw FormatError("model: missing 'lpft-model 1' header");
    if (!reader.next(line)) throw FormatError("model: missing arch line");
    auto tok = text::split_ws(line);
    if (tok.size() != 2 || tok[0] != "arch") throw FormatError("model: expected 'arch <name>'");
    const Architecture arch = parse_architecture(tok[1]);
    ModelState model;
    model.head.V = read_matrix(reader, "V");
    model.head.b = read_matrix(reader, "b").col(0);
    switch (arch) {
        case Architecture::linear: model.feature = LinearFeatureParams{read_matrix(reader, "B")}; break;
        case Architecture::mlp: {
            if (!reader.next(line)) throw FormatError("model: missing layers line");
            auto lt = text::split_ws(line);
            long layers = 0;
            if (lt.size() != 2 || lt[0] != "layers" || !text::parse_long(lt[1], layers) || layers < 1)
                throw FormatError("model: expected 'layers <count>'");
            MlpFeatureParams p;
            for (long l = 0; l < layers; ++l) {
                p.weights.push_back(read_matrix(reader, "W" + std::to_string(l)));
                p.biases.push_back(read_matrix(reader, "c" + std::to_string(l)).col(0));
            }
            model.feature = std::move(p);
            break;
        }
        case Architecture::lora: {
            if (!reader.next(line)) throw FormatError("model: missing init_variance line");
            auto vt = text::split_ws(line);
            LoraAdapter p;
            if (vt.size() != 2 || vt[0] != "init_variance" || !text::parse_double(vt[1], p.init_variance))
                throw FormatError("model: expected 'init_variance <value>'");
            p.base = read_matrix(reader, "B0");
            p.lora_a = read_matrix(reader, "A_lora");
            p.lora_b = read_matrix(reader, "B_lora");
            model.feature = std::move(p);
            break;
        }
    }
    if (!reader.next(line) || line != "end") throw FormatError("model: missing 'end' marker");
    return model;
}

void save_model(const ModelState& model, const std::filesystem::path& path) {
    text::write_file(path.string(), serialize_model(model));
}

ModelState load_model(const std::filesystem::path& path) { return parse_model(text::read_file(path.string())); }

}  // namespace lpft
