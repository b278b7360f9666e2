#pragma once

#include "lpft/dataset.hpp"
#include "lpft/model.hpp"
#include "lpft/training.hpp"

#include <cstdint>

namespace lpft::fixtures {

/// 20 samples in R^8, 3 classes (7/7/6), separation 3, noise 1.
Dataset standard_dataset(std::uint64_t seed);

/// phi(x) = B x with h = 16 and a Gaussian head of scale 1/sqrt(3h).
ModelState linear_model(std::uint64_t seed);

/// Two tanh layers of width 32 ending in h = 16, same head as linear_model.
ModelState mlp_model(std::uint64_t seed);

/// 20 unit-norm samples in R^32 so the training span leaves an orthogonal complement,
/// with a matching linear model (h = 16).
Dataset wide_dataset(std::uint64_t seed);
ModelState wide_linear_model(std::uint64_t seed);

/// Overlapping classes (separation 0.5, noise 1), 30 per class in R^4.
Dataset overlap_dataset(std::uint64_t seed);
ModelState overlap_model(std::uint64_t seed);

/// Unit-norm rows in R^256 with a linear base model h = 256, for the LoRA check.
Dataset lora_dataset(std::uint64_t seed);
ModelState lora_base_model(std::uint64_t seed);

/// Head-norm sweep schedule: small enough steps that every scale on the grid
/// stays stable, long enough that every run reaches near-zero loss.
TrainConfig sweep_config(TrainMode mode, std::uint64_t seed);

}  // namespace lpft::fixtures
