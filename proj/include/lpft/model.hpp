#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace lpft {

/// Linear classifier head: logits = V * features + b.
struct HeadParams {
    Eigen::MatrixXd V;  // C x h
    Eigen::VectorXd b;  // C

    bool operator==(const HeadParams&) const = default;
};

/// phi(x) = B x.
struct LinearFeatureParams {
    Eigen::MatrixXd B;  // h x d

    bool operator==(const LinearFeatureParams&) const = default;
};

/// phi(x) = tanh(W_L ... tanh(W_1 x + c_1) ... + c_L). The last layer has h outputs.
struct MlpFeatureParams {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    bool operator==(const MlpFeatureParams&) const = default;
};

/// phi(x) = (B0 + B_lora A_lora) x with B0 frozen. B_lora starts at zero.
struct LoraAdapter {
    Eigen::MatrixXd base;    // B0, h x d
    Eigen::MatrixXd lora_a;  // r x d
    Eigen::MatrixXd lora_b;  // h x r
    double init_variance = 0.0;

    int rank() const { return static_cast<int>(lora_a.rows()); }
    bool operator==(const LoraAdapter&) const = default;
};

using FeatureParams = std::variant<LinearFeatureParams, MlpFeatureParams, LoraAdapter>;

enum class Architecture { linear, mlp, lora };

std::string_view to_string(Architecture arch);
Architecture parse_architecture(std::string_view text);

/// Offset/length of one parameter group inside the flattened vector.
struct ParamView {
    Eigen::Index offset = 0;
    Eigen::Index size = 0;
};

/// Flattening order: V row-major, then b, then feature parameters (linear: B
/// row-major; MLP: per layer W row-major then bias; LoRA: B_lora row-major then
/// A_lora row-major). The frozen LoRA base is not a parameter.
struct ParamLayout {
    ParamView head_weight;
    ParamView head_bias;
    ParamView feature;
    Eigen::Index total = 0;
};

struct ModelState {
    HeadParams head;
    FeatureParams feature;

    Architecture arch() const;
    Eigen::Index input_dim() const;
    Eigen::Index feature_dim() const;
    Eigen::Index num_classes() const { return head.V.rows(); }
    Eigen::Index feature_param_count() const;
    ParamLayout layout() const;

    Eigen::VectorXd flatten() const;
    Eigen::VectorXd flatten_feature() const;
    /// Copy of this model with all parameters replaced from a flat vector.
    ModelState with_parameters(const Eigen::VectorXd& theta) const;
    ModelState with_feature_parameters(const Eigen::VectorXd& theta_phi) const;
    ModelState with_head(HeadParams head) const;

    /// 16-hex-digit hash of the architecture tag and every parameter bit.
    std::string fingerprint() const;

    bool operator==(const ModelState&) const = default;
};

struct ArchitectureSpec {
    Architecture kind = Architecture::linear;
    int mlp_hidden_layers = 2;
    int mlp_width = 32;
    int lora_rank = 1;
    double lora_variance = 1.0;
};

struct HeadInit {
    enum class Kind { zeros, gaussian } kind = Kind::zeros;
    double scale = 0.0;
};

/// Feature weights are N(0, 1/fan_in); MLP biases N(0, 0.01); the LoRA branch
/// draws A_lora ~ N(0, lora_variance) and sets B_lora = 0.
ModelState init_model(const ArchitectureSpec& arch, int input_dim, int feature_dim, int num_classes,
                      const HeadInit& head_init, std::uint64_t seed);

/// Wraps the B of a linear model as the frozen base of a fresh LoRA adapter.
ModelState attach_lora(const ModelState& linear_model, int rank, double variance, std::uint64_t seed);

struct ForwardResult {
    Eigen::VectorXd features;
    Eigen::VectorXd logits;
};

ForwardResult forward(const ModelState& model, const Eigen::VectorXd& x);
/// Row-wise features (N x h) and logits (N x C).
Eigen::MatrixXd features_of(const ModelState& model, const Eigen::MatrixXd& inputs);
Eigen::MatrixXd logits_of(const ModelState& model, const Eigen::MatrixXd& inputs);

/// d phi(x) / d theta_phi, h x p_phi.
Eigen::MatrixXd feature_jacobian(const ModelState& model, const Eigen::VectorXd& x);
/// d f(x) / d theta over all parameters, C x p, in layout() order.
Eigen::MatrixXd full_jacobian(const ModelState& model, const Eigen::VectorXd& x);
/// J_phi(x)^T g without materializing the Jacobian.
Eigen::VectorXd feature_vjp(const ModelState& model, const Eigen::VectorXd& x, const Eigen::VectorXd& g);

void save_model(const ModelState& model, const std::filesystem::path& path);
ModelState load_model(const std::filesystem::path& path);
std::string serialize_model(const ModelState& model);
ModelState parse_model(std::string_view text);

}  // namespace lpft
