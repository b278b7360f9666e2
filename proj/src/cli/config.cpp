#include "lpft/config.hpp"

#include "lpft/errors.hpp"
#include "lpft/text_format.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>

extern char** environ;

namespace lpft::config {

namespace {

enum class Kind { integer, number, string, boolean, integer_list, number_list, string_list };

struct KeySpec {
    std::string section;  // empty for top-level keys
    std::string key;
    Kind kind;
    Json default_value;
    bool nullable = false;
    std::vector<std::string> choices;
    std::optional<double> minimum;
    bool exclusive_minimum = false;
    std::string description;
};

const std::vector<std::string> kSections{"data", "model", "training", "checks", "kernel", "calibration", "reproduce"};

const std::vector<KeySpec>& key_specs() {
    static const std::vector<KeySpec> specs = [] {
        std::vector<KeySpec> s;
        auto add = [&](std::string section, std::string key, Kind kind, Json def, std::string desc) -> KeySpec& {
            s.push_back({std::move(section), std::move(key), kind, std::move(def), false, {}, std::nullopt, false, std::move(desc)});
            return s.back();
        };
        add("", "seed", Kind::integer, 0, "Global seed for data, model and Monte-Carlo streams.").minimum = 0;
        add("", "output_dir", Kind::string, "lpft-out", "Directory receiving artifacts and the manifest.");

        add("data", "path", Kind::string, nullptr, "Load this dataset file instead of generating one.").nullable = true;
        add("data", "n_per_class", Kind::integer, 7, "Samples per class.").minimum = 1;
        add("data", "num_classes", Kind::integer, 3, "Number of classes C.").minimum = 2;
        add("data", "dim", Kind::integer, 8, "Input dimension d.").minimum = 2;
        add("data", "separation", Kind::number, 3.0, "Distance of each class mean from the origin.");
        {
            auto& k = add("data", "noise", Kind::number, 1.0, "Isotropic noise standard deviation.");
            k.minimum = 0;
            k.exclusive_minimum = true;
        }
        {
            auto& k = add("data", "max_rows", Kind::integer, 20, "Keep only the first rows of the generated set.");
            k.nullable = true;
            k.minimum = 2;
        }
        add("data", "normalize", Kind::boolean, false, "Scale every sample to unit norm.");
        add("data", "val_fraction", Kind::number, 0.0, "Fraction of rows tagged val.").minimum = 0;
        add("data", "test_fraction", Kind::number, 0.0, "Fraction of rows tagged test.").minimum = 0;

        add("model", "arch", Kind::string, "linear", "Feature extractor.").choices = {"linear", "mlp"};
        add("model", "feature_dim", Kind::integer, 16, "Feature dimension h.").minimum = 1;
        add("model", "mlp_hidden_layers", Kind::integer, 2, "Hidden tanh layers of the MLP.").minimum = 0;
        add("model", "mlp_width", Kind::integer, 32, "Width of each hidden layer.").minimum = 1;
        add("model", "head_init", Kind::string, "gaussian", "Head initialization.").choices = {"zeros", "gaussian"};
        {
            auto& k = add("model", "head_scale", Kind::number, nullptr, "Gaussian head std; null means 1/sqrt(3h).");
            k.nullable = true;
            k.minimum = 0;
            k.exclusive_minimum = true;
        }

        add("training", "mode", Kind::string, "FT", "Training mode.").choices = {"LP", "FT", "LoRA", "LP-FT", "LP-LoRA"};
        {
            auto& k = add("training", "learning_rate", Kind::number, 0.01, "Step size eta.");
            k.minimum = 0;
            k.exclusive_minimum = true;
        }
        add("training", "epochs", Kind::integer, 100, "Full-batch steps of the (final) stage.").minimum = 0;
        add("training", "lp_solver", Kind::string, "ridge_logistic", "Linear-probe solver.").choices = {
            "ridge_logistic", "gradient_descent"};
        {
            auto& k = add("training", "lp_lambda", Kind::number, nullptr, "Ridge strength; null selects it by 5-fold CV.");
            k.nullable = true;
            k.minimum = 0;
        }
        add("training", "lp_epochs", Kind::integer, 100, "Gradient-descent LP steps in two-stage modes.").minimum = 0;
        {
            auto& k = add("training", "lp_learning_rate", Kind::number, nullptr, "LP step size; null reuses learning_rate.");
            k.nullable = true;
            k.minimum = 0;
            k.exclusive_minimum = true;
        }
        add("training", "aggregation", Kind::string, "sum", "Per-sample gradient aggregation.").choices = {"sum", "mean"};
        add("training", "lora_rank", Kind::integer, 1, "LoRA rank r.").minimum = 1;
        {
            auto& k = add("training", "lora_variance", Kind::number, 1.0, "LoRA A init variance.");
            k.minimum = 0;
            k.exclusive_minimum = true;
        }

        add("checks", "names", Kind::string_list,
            Json::array({"decomposition", "orthogonal_invariance", "lora_equivalence", "jl_lemma", "norm_derivatives",
                         "norm_growth", "linearization_order"}),
            "Checks to run.")
            .choices = {"decomposition",    "orthogonal_invariance", "lora_equivalence",   "jl_lemma",
                        "norm_derivatives", "norm_growth",           "linearization_order"};
        add("checks", "decomposition_tol", Kind::number, 1e-10, "Max-norm tolerance of P + F against J J^T.").minimum = 0;
        add("checks", "orthogonal_steps", Kind::integer, 100, "Full-batch steps before measuring probe drift.").minimum = 1;
        {
            auto& k = add("checks", "orthogonal_learning_rate", Kind::number, 0.1, "Step size for the drift run.");
            k.minimum = 0;
            k.exclusive_minimum = true;
        }
        add("checks", "orthogonal_probes", Kind::integer, 5, "Orthogonal-complement probes.").minimum = 1;
        add("checks", "lora_rank", Kind::integer, 256, "LoRA rank r.").minimum = 1;
        {
            auto& k = add("checks", "lora_variance", Kind::number, 1.0 / 256.0, "LoRA init variance.");
            k.minimum = 0;
            k.exclusive_minimum = true;
        }
        {
            auto& k = add("checks", "lora_epsilon", Kind::number, 0.25, "epsilon of the LoRA bound.");
            k.minimum = 0;
            k.exclusive_minimum = true;
        }
        add("checks", "lora_trials", Kind::integer, 1000, "Independent adapters.").minimum = 100;
        add("checks", "jl_k", Kind::integer_list, Json::array({100, 1000}), "Projection sizes k.");
        add("checks", "jl_epsilon", Kind::number_list, Json::array({0.2, 0.3}), "epsilon values.");
        add("checks", "jl_trials", Kind::integer, 100000, "Trials per (k, epsilon).").minimum = 100;
        add("checks", "jl_angle", Kind::number, 0.7, "Angle in radians between the unit test vectors.");
        add("checks", "eta_grid", Kind::number_list, Json::array({1e-2, 5e-3, 2.5e-3, 1.25e-3}),
            "Strictly decreasing learning rates for the linearization slope.");
        add("checks", "norm_growth_steps", Kind::integer, 500, "LP and FT steps.").minimum = 5;
        {
            auto& k = add("checks", "norm_growth_learning_rate", Kind::number, 0.005, "Step size of both runs.");
            k.minimum = 0;
        }
        add("checks", "derivative_fixtures", Kind::integer, 5, "Seeded fixtures for the derivative check.").minimum = 1;

        add("kernel", "component", Kind::string, "total", "Kernel used for regression.").choices = {"total", "pretrain", "ft"};
        add("kernel", "anchor", Kind::string, "init", "Anchor model: initial or after the LP stage.").choices = {"init", "lp"};
        {
            auto& k = add("kernel", "lambda", Kind::number, nullptr, "Regularization; null selects it by CV.");
            k.nullable = true;
            k.minimum = 0;
        }
        add("kernel", "folds", Kind::integer, 5, "Cross-validation folds.").minimum = 2;
        add("kernel", "train_kernel_path", Kind::string, nullptr, "NC x NC kernel CSV.").nullable = true;
        add("kernel", "train_labels_path", Kind::string, nullptr, "Label CSV for the train kernel.").nullable = true;
        add("kernel", "test_kernel_path", Kind::string, nullptr, "MC x NC kernel CSV.").nullable = true;
        add("kernel", "test_labels_path", Kind::string, nullptr, "Label CSV for the test kernel.").nullable = true;

        add("calibration", "n_bins", Kind::integer, 15, "Equal-width confidence bins.").minimum = 1;
        add("calibration", "val_logits_path", Kind::string, nullptr, "Validation logits CSV (M x C).").nullable = true;
        add("calibration", "val_labels_path", Kind::string, nullptr, "Validation label CSV.").nullable = true;
        add("calibration", "test_logits_path", Kind::string, nullptr, "Test logits CSV; defaults to validation.").nullable = true;
        add("calibration", "test_labels_path", Kind::string, nullptr, "Test label CSV.").nullable = true;

        add("reproduce", "seeds", Kind::integer_list, Json::array({1, 2, 3}), "Seeds of the repeated runs.");
        add("reproduce", "scales", Kind::number_list, Json::array({0.1, 0.5, 1, 2, 5, 10, 50, 100}),
            "Head-norm scales of the sweep.");
        {
            auto& k = add("reproduce", "sweep_learning_rate", Kind::number, 1e-4, "Step size of the sweep runs.");
            k.minimum = 0;
            k.exclusive_minimum = true;
        }
        add("reproduce", "sweep_epochs", Kind::integer, 20000, "Steps of each sweep run.").minimum = 0;
        {
            auto& k = add("reproduce", "curve_learning_rate", Kind::number, 0.005, "Step size of the norm curves.");
            k.minimum = 0;
            k.exclusive_minimum = true;
        }
        add("reproduce", "curve_epochs", Kind::integer, 500, "Steps of the norm curves.").minimum = 1;
        return s;
    }();
    return specs;
}

const KeySpec* find_spec(const std::string& section, const std::string& key) {
    for (const auto& s : key_specs())
        if (s.section == section && s.key == key) return &s;
    return nullptr;
}

std::string path_of(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
}

// Line of each "section.key" in a JSON document, for diagnostics only.
std::map<std::string, int> key_lines(const std::string& text) {
    std::map<std::string, int> out;
    struct Frame {
        bool object;
        std::string key;
        bool expect_key;
    };
    std::vector<Frame> stack;
    int line = 1;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (ch == '\n') ++line;
        else if (ch == '{') stack.push_back({true, {}, true});
        else if (ch == '[') stack.push_back({false, {}, false});
        else if (ch == '}' || ch == ']') {
            if (!stack.empty()) stack.pop_back();
        } else if (ch == ',') {
            if (!stack.empty() && stack.back().object) stack.back().expect_key = true;
        } else if (ch == '"') {
            std::string s;
            ++i;
            for (; i < text.size() && text[i] != '"'; ++i) {
                if (text[i] == '\\' && i + 1 < text.size()) ++i;
                s += text[i];
            }
            if (!stack.empty() && stack.back().object && stack.back().expect_key) {
                stack.back().key = s;
                stack.back().expect_key = false;
                std::string path;
                for (const auto& f : stack)
                    if (f.object && !f.key.empty()) path += (path.empty() ? "" : ".") + f.key;
                out.emplace(path, line);
            }
        }
    }
    return out;
}

struct Source {
    std::string label;                     // "config.json", "--set a.b=c", "LPFT__A__B"
    const std::map<std::string, int>* lines = nullptr;

    std::string where(const std::string& path) const {
        if (lines != nullptr) {
            auto it = lines->find(path);
            if (it != lines->end()) return label + ":" + std::to_string(it->second);
        }
        return label;
    }
};

[[noreturn]] void fail(const Source& src, const std::string& path, const std::string& msg) {
    throw ConfigError(src.where(path) + ": " + path + ": " + msg);
}

bool is_integer(const Json& v) { return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()); }

void check_value(const KeySpec& spec, const Json& v, const Source& src) {
    const std::string path = path_of(spec.section, spec.key);
    if (v.is_null()) {
        if (!spec.nullable) fail(src, path, "must not be null");
        return;
    }
    auto check_min = [&](double x) {
        if (spec.minimum && (spec.exclusive_minimum ? !(x > *spec.minimum) : !(x >= *spec.minimum)))
            fail(src, path, std::string("must be ") + (spec.exclusive_minimum ? "> " : ">= ") + text::format_double(*spec.minimum));
    };
    auto check_choice = [&](const std::string& s) {
        if (!spec.choices.empty() && std::find(spec.choices.begin(), spec.choices.end(), s) == spec.choices.end()) {
            std::string list;
            for (const auto& c : spec.choices) list += (list.empty() ? "" : ", ") + c;
            fail(src, path, "'" + s + "' is not one of: " + list);
        }
    };
    switch (spec.kind) {
        case Kind::integer:
            if (!v.is_number() || !is_integer(v)) fail(src, path, "expected an integer");
            check_min(v.get<double>());
            break;
        case Kind::number:
            if (!v.is_number() || !std::isfinite(v.get<double>())) fail(src, path, "expected a finite number");
            check_min(v.get<double>());
            break;
        case Kind::string:
            if (!v.is_string()) fail(src, path, "expected a string");
            check_choice(v.get<std::string>());
            break;
        case Kind::boolean:
            if (!v.is_boolean()) fail(src, path, "expected true or false");
            break;
        case Kind::integer_list:
        case Kind::number_list:
        case Kind::string_list:
            if (!v.is_array() || v.empty()) fail(src, path, "expected a non-empty array");
            for (const auto& e : v) {
                if (spec.kind == Kind::string_list) {
                    if (!e.is_string()) fail(src, path, "expected an array of strings");
                    check_choice(e.get<std::string>());
                } else if (!e.is_number() || !std::isfinite(e.get<double>()) ||
                           (spec.kind == Kind::integer_list && !is_integer(e))) {
                    fail(src, path, spec.kind == Kind::integer_list ? "expected an array of integers" : "expected an array of numbers");
                }
            }
            break;
    }
}

void apply_value(Json& cfg, const std::string& section, const std::string& key, const Json& value, const Source& src) {
    const KeySpec* spec = find_spec(section, key);
    if (spec == nullptr) fail(src, path_of(section, key), "unknown key");
    check_value(*spec, value, src);
    if (section.empty())
        cfg[key] = value;
    else
        cfg[section][key] = value;
}

void merge_document(Json& cfg, const Json& doc, const Source& src) {
    if (!doc.is_object()) throw ConfigError(src.label + ": top level must be a JSON object");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const std::string& name = it.key();
        if (std::find(kSections.begin(), kSections.end(), name) != kSections.end()) {
            if (!it.value().is_object()) fail(src, name, "section must be an object");
            for (auto kv = it.value().begin(); kv != it.value().end(); ++kv) apply_value(cfg, name, kv.key(), kv.value(), src);
        } else {
            apply_value(cfg, "", name, it.value(), src);
        }
    }
}

Json parse_scalar(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        return Json(text);
    }
}

void apply_override(Json& cfg, const std::string& dotted, const std::string& raw, const Source& src) {
    const auto dot = dotted.find('.');
    std::string section = dot == std::string::npos ? "" : dotted.substr(0, dot);
    std::string key = dot == std::string::npos ? dotted : dotted.substr(dot + 1);
    if (key.empty() || key.find('.') != std::string::npos) throw ConfigError(src.label + ": malformed key path '" + dotted + "'");
    if (!section.empty() && std::find(kSections.begin(), kSections.end(), section) == kSections.end())
        throw ConfigError(src.label + ": unknown section '" + section + "'");
    apply_value(cfg, section, key, parse_scalar(raw), src);
}

void check_cross_field(const Json& cfg) {
    const auto& d = cfg["data"];
    if (d["val_fraction"].get<double>() + d["test_fraction"].get<double>() >= 1.0)
        throw ConfigError("data: val_fraction + test_fraction must be below 1");
    const auto& grid = cfg["checks"]["eta_grid"];
    if (grid.size() < 3) throw ConfigError("checks.eta_grid: needs at least 3 values");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i].get<double>() > 0.0)) throw ConfigError("checks.eta_grid: values must be > 0");
        if (i > 0 && !(grid[i].get<double>() < grid[i - 1].get<double>()))
            throw ConfigError("checks.eta_grid: values must strictly decrease");
    }
    const double eps = cfg["checks"]["lora_epsilon"].get<double>();
    if (!(eps < 1.0)) throw ConfigError("checks.lora_epsilon: must lie in (0, 1)");
    for (const auto& e : cfg["checks"]["jl_epsilon"])
        if (!(e.get<double>() > 0.0 && e.get<double>() < 1.0)) throw ConfigError("checks.jl_epsilon: values must lie in (0, 1)");
    for (const auto& k : cfg["checks"]["jl_k"])
        if (k.get<double>() < 1) throw ConfigError("checks.jl_k: values must be >= 1");
    for (const auto& s : cfg["reproduce"]["scales"])
        if (!(s.get<double>() > 0.0)) throw ConfigError("reproduce.scales: values must be > 0");
    for (const auto& s : cfg["reproduce"]["seeds"])
        if (s.get<double>() < 0) throw ConfigError("reproduce.seeds: values must be >= 0");
}

}  // namespace

Json defaults() {
    Json cfg = Json::object();
    for (const auto& s : key_specs())
        if (s.section.empty()) cfg[s.key] = s.default_value;
    for (const auto& section : kSections) {
        cfg[section] = Json::object();
        for (const auto& s : key_specs())
            if (s.section == section) cfg[section][s.key] = s.default_value;
    }
    return cfg;
}

std::string schema_document() {
    auto type_of = [](const KeySpec& s) -> Json {
        auto base = [&]() -> Json {
            switch (s.kind) {
                case Kind::integer: return "integer";
                case Kind::number: return "number";
                case Kind::string: return "string";
                case Kind::boolean: return "boolean";
                default: return "array";
            }
        }();
        if (s.nullable) return Json::array({base, "null"});
        return base;
    };
    auto describe = [&](const KeySpec& s) {
        Json j;
        j["type"] = type_of(s);
        if (s.kind == Kind::integer_list) j["items"] = {{"type", "integer"}};
        if (s.kind == Kind::number_list) j["items"] = {{"type", "number"}};
        if (s.kind == Kind::string_list) j["items"] = {{"type", "string"}};
        if (!s.choices.empty()) {
            if (s.kind == Kind::string_list)
                j["items"]["enum"] = s.choices;
            else
                j["enum"] = s.choices;
        }
        if (s.minimum) j[s.exclusive_minimum ? "exclusiveMinimum" : "minimum"] = *s.minimum;
        j["default"] = s.default_value;
        j["description"] = s.description;
        return j;
    };
    Json doc;
    doc["$schema"] = "https://json-schema.org/draft/2020-12/schema";
    doc["title"] = "lpft experiment configuration";
    doc["type"] = "object";
    doc["additionalProperties"] = false;
    Json props = Json::object();
    for (const auto& s : key_specs())
        if (s.section.empty()) props[s.key] = describe(s);
    for (const auto& section : kSections) {
        Json sec;
        sec["type"] = "object";
        sec["additionalProperties"] = false;
        Json sp = Json::object();
        for (const auto& s : key_specs())
            if (s.section == section) sp[s.key] = describe(s);
        sec["properties"] = sp;
        props[section] = sec;
    }
    doc["properties"] = props;
    return doc.dump(2) + "\n";
}

Json load(const std::optional<std::string>& path, const std::vector<std::string>& overrides,
          const std::map<std::string, std::string>& environment) {
    Json cfg = defaults();
    if (path) {
        std::string text;
        try {
            text = text::read_file(*path);
        } catch (const IoError& e) {
            throw ConfigError(e.what());
        }
        Json doc;
        try {
            doc = Json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
            const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(end), '\n');
            std::string what = e.what();
            // Drop the library's "[json.exception.parse_error.101] " prefix.
            if (const auto pos = what.find("] "); pos != std::string::npos) what = what.substr(pos + 2);
            throw ConfigError(*path + ":" + std::to_string(line) + ": " + what);
        }
        const auto lines = key_lines(text);
        merge_document(cfg, doc, Source{*path, &lines});
    }
    for (const auto& [name, value] : environment) {
        constexpr std::string_view prefix = "LPFT__";
        if (name.rfind(prefix, 0) != 0) continue;
        std::string rest = name.substr(prefix.size());
        std::string dotted;
        for (std::size_t i = 0; i < rest.size(); ++i) {
            if (rest.compare(i, 2, "__") == 0) {
                dotted += '.';
                ++i;
            } else {
                dotted += static_cast<char>(std::tolower(static_cast<unsigned char>(rest[i])));
            }
        }
        apply_override(cfg, dotted, value, Source{name, nullptr});
    }
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("--set " + o + ": expected section.key=value");
        apply_override(cfg, o.substr(0, eq), o.substr(eq + 1), Source{"--set " + o, nullptr});
    }
    check_cross_field(cfg);
    return cfg;
}

std::map<std::string, std::string> process_environment() {
    std::map<std::string, std::string> out;
    for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
        std::string entry(*e);
        const auto eq = entry.find('=');
        if (eq == std::string::npos) continue;
        if (entry.rfind("LPFT__", 0) == 0) out.emplace(entry.substr(0, eq), entry.substr(eq + 1));
    }
    return out;
}

std::string hash(const Json& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : cfg.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    return out;
}

std::uint64_t seed(const Json& cfg) { return cfg["seed"].get<std::uint64_t>(); }

DataSettings data_settings(const Json& cfg) {
    const auto& d = cfg["data"];
    DataSettings s;
    if (!d["path"].is_null()) s.path = d["path"].get<std::string>();
    s.n_per_class = d["n_per_class"].get<int>();
    s.num_classes = d["num_classes"].get<int>();
    s.dim = d["dim"].get<int>();
    s.separation = d["separation"].get<double>();
    s.noise = d["noise"].get<double>();
    if (!d["max_rows"].is_null()) s.max_rows = d["max_rows"].get<int>();
    s.normalize = d["normalize"].get<bool>();
    s.val_fraction = d["val_fraction"].get<double>();
    s.test_fraction = d["test_fraction"].get<double>();
    return s;
}

ModelSettings model_settings(const Json& cfg) {
    const auto& m = cfg["model"];
    ModelSettings s;
    s.arch.kind = parse_architecture(m["arch"].get<std::string>());
    s.arch.mlp_hidden_layers = m["mlp_hidden_layers"].get<int>();
    s.arch.mlp_width = m["mlp_width"].get<int>();
    s.feature_dim = m["feature_dim"].get<int>();
    if (m["head_init"].get<std::string>() == "zeros") {
        s.head.kind = HeadInit::Kind::zeros;
    } else {
        s.head.kind = HeadInit::Kind::gaussian;
        s.head.scale = m["head_scale"].is_null() ? 1.0 / std::sqrt(3.0 * s.feature_dim) : m["head_scale"].get<double>();
    }
    return s;
}

TrainConfig train_settings(const Json& cfg) {
    const auto& t = cfg["training"];
    TrainConfig c;
    c.mode = parse_train_mode(t["mode"].get<std::string>());
    c.learning_rate = t["learning_rate"].get<double>();
    c.epochs = t["epochs"].get<int>();
    c.lp_solver = parse_lp_solver(t["lp_solver"].get<std::string>());
    if (!t["lp_lambda"].is_null()) c.lp_lambda = t["lp_lambda"].get<double>();
    c.lp_epochs = t["lp_epochs"].get<int>();
    if (!t["lp_learning_rate"].is_null()) c.lp_learning_rate = t["lp_learning_rate"].get<double>();
    c.aggregation = parse_aggregation(t["aggregation"].get<std::string>());
    c.lora_rank = t["lora_rank"].get<int>();
    c.lora_variance = t["lora_variance"].get<double>();
    c.seed = seed(cfg);
    return c;
}

Dataset make_dataset(const Json& cfg) {
    const DataSettings s = data_settings(cfg);
    Dataset ds;
    if (s.path) {
        ds = load_dataset(*s.path);
    } else {
        ds = gen_gaussian_clusters(s.n_per_class, s.num_classes, s.dim, s.separation, s.noise, seed(cfg));
        if (s.max_rows && *s.max_rows < ds.size()) {
            const auto n = static_cast<Eigen::Index>(*s.max_rows);
            ds.samples.conservativeResize(n, Eigen::NoChange);
            ds.labels.resize(static_cast<std::size_t>(n));
            ds.splits.resize(static_cast<std::size_t>(n));
        }
        if (s.val_fraction > 0.0 || s.test_fraction > 0.0) ds = assign_splits(ds, s.val_fraction, s.test_fraction, seed(cfg));
    }
    if (s.normalize) ds = normalize_rows(ds);
    return ds;
}

ModelState make_model(const Json& cfg, const Dataset& data) {
    const ModelSettings s = model_settings(cfg);
    return init_model(s.arch, static_cast<int>(data.dim()), s.feature_dim, data.num_classes, s.head, seed(cfg));
}

}  // namespace lpft::config
