#include "lpft/fixtures.hpp"

#include <cmath>

namespace lpft::fixtures {

namespace {

// Standard deviation of a fan-in uniform init U(-1/sqrt(h), 1/sqrt(h)).
const double kHeadScale = 1.0 / std::sqrt(3.0 * 16.0);

Dataset take_rows(const Dataset& ds, Eigen::Index n) {
    Dataset out = ds;
    out.samples = ds.samples.topRows(n);
    out.labels.resize(static_cast<std::size_t>(n));
    out.splits.resize(static_cast<std::size_t>(n));
    return out;
}

}  // namespace

Dataset standard_dataset(std::uint64_t seed) { return take_rows(gen_gaussian_clusters(7, 3, 8, 3.0, 1.0, seed), 20); }

ModelState linear_model(std::uint64_t seed) {
    return init_model({Architecture::linear}, 8, 16, 3, {HeadInit::Kind::gaussian, kHeadScale}, seed);
}

ModelState mlp_model(std::uint64_t seed) {
    ArchitectureSpec spec;
    spec.kind = Architecture::mlp;
    spec.mlp_hidden_layers = 2;
    spec.mlp_width = 32;
    return init_model(spec, 8, 16, 3, {HeadInit::Kind::gaussian, kHeadScale}, seed);
}

Dataset wide_dataset(std::uint64_t seed) {
    return normalize_rows(take_rows(gen_gaussian_clusters(7, 3, 32, 3.0, 1.0, seed), 20));
}

ModelState wide_linear_model(std::uint64_t seed) {
    return init_model({Architecture::linear}, 32, 16, 3, {HeadInit::Kind::gaussian, kHeadScale}, seed);
}

Dataset overlap_dataset(std::uint64_t seed) { return gen_gaussian_clusters(30, 3, 4, 0.5, 1.0, seed); }

ModelState overlap_model(std::uint64_t seed) {
    return init_model({Architecture::linear}, 4, 8, 3, {HeadInit::Kind::gaussian, 0.1}, seed);
}

Dataset lora_dataset(std::uint64_t seed) { return normalize_rows(gen_gaussian_clusters(2, 3, 256, 1.0, 1.0, seed)); }

ModelState lora_base_model(std::uint64_t seed) {
    return init_model({Architecture::linear}, 256, 256, 3, {HeadInit::Kind::gaussian, 0.5}, seed);
}

TrainConfig sweep_config(TrainMode mode, std::uint64_t seed) {
    TrainConfig c;
    c.mode = mode;
    c.learning_rate = 1e-4;
    c.epochs = 20000;
    c.seed = seed;
    return c;
}

}  // namespace lpft::fixtures
