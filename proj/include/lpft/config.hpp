#pragma once

#include "lpft/checks.hpp"
#include "lpft/dataset.hpp"
#include "lpft/model.hpp"
#include "lpft/training.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lpft::config {

using Json = nlohmann::ordered_json;

/// Every key with its default value, section by section.
Json defaults();

/// JSON-schema-style description of the accepted configuration.
std::string schema_document();

/// Builds the effective configuration: defaults, then the file (if any), then
/// LPFT__SECTION__KEY environment variables, then `--set section.key=value`
/// overrides. Throws ConfigError naming the line (for file input) or the
/// override that failed validation.
Json load(const std::optional<std::string>& path, const std::vector<std::string>& overrides,
          const std::map<std::string, std::string>& environment);

/// LPFT__* variables of the current process.
std::map<std::string, std::string> process_environment();

/// 16-hex-digit FNV-1a hash of the compact dump.
std::string hash(const Json& cfg);

struct DataSettings {
    std::optional<std::string> path;
    int n_per_class = 7;
    int num_classes = 3;
    int dim = 8;
    double separation = 3.0;
    double noise = 1.0;
    std::optional<int> max_rows;
    bool normalize = false;
    double val_fraction = 0.0;
    double test_fraction = 0.0;
};

struct ModelSettings {
    ArchitectureSpec arch;
    int feature_dim = 16;
    HeadInit head;
};

DataSettings data_settings(const Json& cfg);
ModelSettings model_settings(const Json& cfg);
TrainConfig train_settings(const Json& cfg);
std::uint64_t seed(const Json& cfg);

/// Dataset from `data.path` or generated from the data section.
Dataset make_dataset(const Json& cfg);
/// Model initialized for the dataset's dimension and class count.
ModelState make_model(const Json& cfg, const Dataset& data);

}  // namespace lpft::config
