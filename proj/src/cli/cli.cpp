#include "lpft/cli.hpp"

#include "lpft/checks.hpp"
#include "lpft/config.hpp"
#include "lpft/errors.hpp"
#include "lpft/experiments.hpp"
#include "lpft/fixtures.hpp"
#include "lpft/kernel_regression.hpp"
#include "lpft/metrics.hpp"
#include "lpft/ntk.hpp"
#include "lpft/text_format.hpp"
#include "lpft/training.hpp"
#include "lpft/version.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <thread>

namespace lpft::cli {

namespace fs = std::filesystem;
using config::Json;

namespace {

constexpr const char* kAnalogNote = "# synthetic desk-scale analog showing the qualitative property only; values are not comparable to large-model benchmark numbers";

std::string fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    return out;
}

Json number(double v) {
    if (std::isfinite(v)) return v;
    return text::format_double(v);
}

/// Output directory plus the manifest describing what was written to it.
class Artifacts {
public:
    // output_dir is where artifacts go, not part of the experiment, so it is
    // left out of config.json and the hash.
    Artifacts(fs::path dir, std::string subcommand, Json cfg)
        : dir_(std::move(dir)), subcommand_(std::move(subcommand)), cfg_(std::move(cfg)) {
        cfg_.erase("output_dir");
        fs::create_directories(dir_);
        write("config.json", cfg_.dump(2) + "\n");
    }

    void write(const std::string& name, const std::string& contents) {
        text::write_file((dir_ / name).string(), contents);
        files_.push_back({name, contents.size(), fnv1a(contents)});
    }

    void set_target(std::string target) { target_ = std::move(target); }

    void finish(const std::string& status, const std::string& message = {}) {
        Json m;
        m["tool"] = "lpft";
        m["version"] = kVersion;
        m["subcommand"] = subcommand_;
        if (!target_.empty()) m["target"] = target_;
        m["config_hash"] = config::hash(cfg_);
        m["seed"] = config::seed(cfg_);
        m["status"] = status;
        if (!message.empty()) m["message"] = message;
        m["versions"] = {{"lpft", kVersion}, {"eigen", eigen_version()}, {"nlohmann_json", json_version()}};
        Json files = Json::array();
        for (const auto& f : files_) files.push_back({{"name", f.name}, {"bytes", f.bytes}, {"fnv1a", f.hash}});
        m["files"] = files;
        text::write_file((dir_ / "manifest.json").string(), m.dump(2) + "\n");
    }

private:
    struct FileEntry {
        std::string name;
        std::size_t bytes;
        std::string hash;
    };
    fs::path dir_;
    std::string subcommand_;
    std::string target_;
    Json cfg_;
    std::vector<FileEntry> files_;
};

/// Runs fn(i) for i in [0, n) on a bounded pool; results keep index order.
template <typename T>
std::vector<T> parallel_map(std::size_t n, const std::function<T(std::size_t)>& fn) {
    std::vector<T> out(n);
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(n, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) {
                try {
                    out[i] = fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

std::string labels_to_csv(const std::vector<int>& labels) {
    std::string out = "label\n";
    for (int y : labels) out += std::to_string(y) + '\n';
    return out;
}

std::vector<int> labels_from_csv(const std::string& path) {
    const Eigen::MatrixXd m = text::matrix_from_csv(text::read_file(path));
    if (m.cols() != 1) throw FormatError(path + ": label CSV must have exactly one column");
    std::vector<int> out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double v = m(i, 0);
        if (v != std::floor(v) || v < 1) throw FormatError(path + ": row " + std::to_string(i + 1) + ": labels must be integers >= 1");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

Eigen::MatrixXd matrix_from_file(const std::string& path) { return text::matrix_from_csv(text::read_file(path)); }

Json stats_json(const KernelStats& s) {
    Json j;
    j["rank"] = s.rank;
    j["frobenius_norm"] = number(s.frobenius_norm);
    Json sv = Json::array();
    for (double v : s.normalized_singular_values) sv.push_back(number(v));
    j["normalized_singular_values"] = sv;
    if (s.ft_ratio) j["ft_ratio"] = number(*s.ft_ratio);
    return j;
}

Json calibration_json(const CalibrationReport& r) {
    return {{"ece", number(r.ece)}, {"mce", number(r.mce)}, {"nll", number(r.nll)}, {"accuracy", number(r.accuracy)}};
}

std::string bins_csv(const CalibrationReport& r) {
    std::string out = "bin,lower,upper,mean_confidence,accuracy,count\n";
    for (std::size_t b = 0; b < r.bins.size(); ++b) {
        const double n = r.n_bins;
        out += std::to_string(b) + ',' + text::format_double(static_cast<double>(b) / n) + ',' +
               text::format_double(static_cast<double>(b + 1) / n) + ',' + text::format_double(r.bins[b].mean_confidence) +
               ',' + text::format_double(r.bins[b].accuracy) + ',' + std::to_string(r.bins[b].count) + '\n';
    }
    return out;
}

// Model the kernel is anchored at: the initial model or the LP-stage output.
ModelState kernel_anchor(const Json& cfg, const ModelState& model, const Dataset& data) {
    if (cfg["kernel"]["anchor"].get<std::string>() == "init") return model;
    TrainConfig lp = config::train_settings(cfg);
    lp.mode = TrainMode::lp;
    if (lp.lp_solver == LpSolver::gradient_descent) {
        lp.epochs = lp.lp_epochs;
        if (lp.lp_learning_rate) lp.learning_rate = *lp.lp_learning_rate;
    }
    const TrainingTrace trace = train(model, data, lp);
    if (trace.diverged) throw DivergenceError("LP anchor diverged: " + trace.message, 0);
    return trace.final_model;
}

Eigen::MatrixXd select_component(const KernelDecomposition& k, const std::string& component) {
    if (component == "pretrain") return k.P;
    if (component == "ft") return k.F;
    return k.total();
}

// ---- gen-data --------------------------------------------------------------

int cmd_gen_data(const Json& cfg, Artifacts& art, std::ostream& out) {
    const Dataset ds = config::make_dataset(cfg);
    art.write("dataset.txt", serialize_dataset(ds));
    out << "generated " << ds.size() << " samples in R^" << ds.dim() << " with " << ds.num_classes << " classes\n";
    return kExitOk;
}

// ---- train -------------------------------------------------------------------

int cmd_train(const Json& cfg, Artifacts& art, std::ostream& out) {
    const Dataset ds = config::make_dataset(cfg);
    const ModelState model = config::make_model(cfg, ds);
    const TrainConfig tc = config::train_settings(cfg);
    const TrainingTrace trace = train(model, ds, tc);
    art.write("trace.csv", trace_to_csv(trace));
    art.write("model_init.txt", serialize_model(model));
    art.write("model_final.txt", serialize_model(trace.final_model));
    if (trace.lp_model) art.write("model_lp.txt", serialize_model(*trace.lp_model));

    const Dataset train_rows = ds.select(Split::train);
    Json summary;
    summary["mode"] = std::string(to_string(tc.mode));
    summary["steps"] = trace.records.back().step;
    summary["diverged"] = trace.diverged;
    if (trace.diverged) summary["message"] = trace.message;
    summary["final_loss"] = number(trace.records.back().loss);
    summary["final_accuracy"] = number(trace.records.back().accuracy);
    summary["head_weight_norm"] = number(trace.final_model.head.V.norm());
    summary["head_bias_norm"] = number(trace.final_model.head.b.norm());
    if (trace.lp_lambda) summary["lp_lambda"] = number(*trace.lp_lambda);
    try {
        const FeatureChangeStats fc = feature_change_stats(features_of(model, train_rows.samples),
                                                           features_of(trace.final_model, train_rows.samples), train_rows.labels);
        Json f;
        f["mean_cosine_similarity"] = number(fc.mean_cosine_similarity);
        f["mean_diff_norm"] = number(fc.mean_diff_norm);
        f["fdr"] = fc.fdr ? number(fc.fdr->value) : Json(nullptr);
        f["excluded_rows"] = fc.excluded_rows;
        summary["feature_change"] = f;
    } catch (const PreconditionError& e) {
        summary["feature_change"] = {{"error", e.what()}};
    }
    for (Split split : {Split::val, Split::test}) {
        const Dataset part = ds.select(split);
        if (part.size() == 0) continue;
        const std::string tag(to_string(split));
        art.write("logits_" + tag + ".csv", text::matrix_to_csv(logits_of(trace.final_model, part.samples), "logit"));
        art.write("labels_" + tag + ".csv", labels_to_csv(part.labels));
        summary[tag + "_accuracy"] = number(accuracy(trace.final_model, part));
    }
    art.write("summary.json", summary.dump(2) + "\n");
    out << to_string(tc.mode) << ": " << trace.records.back().step << " steps, loss "
        << text::format_double(trace.records.back().loss) << "\n";
    if (trace.diverged) throw DivergenceError("training diverged: " + trace.message, trace.records.back().step);
    return kExitOk;
}

// ---- ntk -------------------------------------------------------------------------

int cmd_ntk(const Json& cfg, Artifacts& art, std::ostream& out) {
    const Dataset ds = config::make_dataset(cfg);
    const Dataset train_rows = ds.select(Split::train);
    const ModelState anchor = kernel_anchor(cfg, config::make_model(cfg, ds), train_rows);
    const KernelDecomposition k = compute_decomposition(anchor, train_rows.samples);
    art.write("kernel_P.csv", text::matrix_to_csv(k.P, "k"));
    art.write("kernel_F.csv", text::matrix_to_csv(k.F, "k"));
    art.write("kernel_total.csv", text::matrix_to_csv(k.total(), "k"));
    art.write("labels_train.csv", labels_to_csv(train_rows.labels));
    Json stats;
    stats["anchor"] = cfg["kernel"]["anchor"];
    stats["anchor_fingerprint"] = k.anchor;
    stats["num_samples"] = train_rows.size();
    stats["num_classes"] = k.num_classes;
    KernelStats total = kernel_stats(k.total());
    total.ft_ratio = ft_ratio(k, residuals(anchor, train_rows)).ratio;
    stats["total"] = stats_json(total);
    stats["pretrain"] = stats_json(kernel_stats(k.P));
    stats["ft"] = stats_json(kernel_stats(k.F));
    const Dataset test_rows = ds.select(Split::test);
    if (test_rows.size() > 0) {
        const KernelDecomposition cross = compute_cross_decomposition(anchor, test_rows.samples, train_rows.samples);
        art.write("kernel_test_train.csv",
                  text::matrix_to_csv(select_component(cross, cfg["kernel"]["component"].get<std::string>()), "k"));
        art.write("labels_test.csv", labels_to_csv(test_rows.labels));
    }
    art.write("stats.json", stats.dump(2) + "\n");
    out << "kernel " << k.P.rows() << "x" << k.P.cols() << ", rank " << total.rank << ", FT ratio "
        << text::format_double(*total.ft_ratio) << "\n";
    return kExitOk;
}

// ---- kernel-reg --------------------------------------------------------------------

int cmd_kernel_reg(const Json& cfg, Artifacts& art, std::ostream& out) {
    const auto& kc = cfg["kernel"];
    Eigen::MatrixXd k_train, k_test;
    std::vector<int> y_train, y_test;
    bool has_test = false;
    if (!kc["train_kernel_path"].is_null()) {
        if (kc["train_labels_path"].is_null()) throw ConfigError("kernel.train_labels_path is required with kernel.train_kernel_path");
        k_train = matrix_from_file(kc["train_kernel_path"].get<std::string>());
        y_train = labels_from_csv(kc["train_labels_path"].get<std::string>());
        if (!kc["test_kernel_path"].is_null()) {
            if (kc["test_labels_path"].is_null()) throw ConfigError("kernel.test_labels_path is required with kernel.test_kernel_path");
            k_test = matrix_from_file(kc["test_kernel_path"].get<std::string>());
            y_test = labels_from_csv(kc["test_labels_path"].get<std::string>());
            has_test = true;
        }
    } else {
        const Dataset ds = config::make_dataset(cfg);
        const Dataset train_rows = ds.select(Split::train);
        const ModelState anchor = kernel_anchor(cfg, config::make_model(cfg, ds), train_rows);
        const std::string component = kc["component"].get<std::string>();
        k_train = select_component(compute_decomposition(anchor, train_rows.samples), component);
        y_train = train_rows.labels;
        const Dataset test_rows = ds.select(Split::test);
        if (test_rows.size() > 0) {
            k_test = select_component(compute_cross_decomposition(anchor, test_rows.samples, train_rows.samples), component);
            y_test = test_rows.labels;
            has_test = true;
        }
    }
    if (y_train.empty() || k_train.rows() % static_cast<Eigen::Index>(y_train.size()) != 0)
        throw DimensionError("train kernel rows must be a multiple of the label count");
    const int c = static_cast<int>(k_train.rows() / static_cast<Eigen::Index>(y_train.size()));
    const bool cv = kc["lambda"].is_null();
    const double lambda = cv ? cross_validate_kernel_lambda(k_train, y_train, c, default_lambda_grid(), kc["folds"].get<int>(),
                                                            config::seed(cfg))
                             : kc["lambda"].get<double>();
    KernelRegressionResult res = fit_kernel_regression(k_train, y_train, c, lambda);
    Json j;
    j["lambda"] = number(lambda);
    j["lambda_source"] = cv ? "cross_validation" : "config";
    j["num_classes"] = c;
    j["train_accuracy"] = number(res.train_accuracy);
    std::string predictions = "label\n";
    if (has_test) {
        const KernelPrediction pred = predict_kernel_regression(k_test, res, y_test);
        res.test_accuracy = pred.accuracy;
        j["test_accuracy"] = number(*pred.accuracy);
        for (int y : pred.labels) predictions += std::to_string(y) + '\n';
        art.write("predictions_test.csv", predictions);
    }
    j["objective"] = number(res.objective);
    j["iterations"] = res.iterations;
    art.write("alpha.csv", text::matrix_to_csv(res.alpha, "alpha"));
    art.write("result.json", j.dump(2) + "\n");
    out << "kernel regression: lambda " << text::format_double(lambda) << ", train accuracy "
        << text::format_double(res.train_accuracy);
    if (res.test_accuracy) out << ", test accuracy " << text::format_double(*res.test_accuracy);
    out << "\n";
    return kExitOk;
}

// ---- calibrate ---------------------------------------------------------------------

struct CalibrationOutcome {
    TemperatureFit fit;
    CalibrationReport before;
    CalibrationReport after;
};

CalibrationOutcome calibrate(const Eigen::MatrixXd& val_logits, const std::vector<int>& val_labels,
                             const Eigen::MatrixXd& test_logits, const std::vector<int>& test_labels, int n_bins) {
    CalibrationOutcome o;
    o.fit = fit_temperature(val_logits, val_labels);
    o.before = ece_mce(apply_temperature(test_logits, 1.0), test_labels, n_bins);
    o.after = ece_mce(apply_temperature(test_logits, o.fit.temperature), test_labels, n_bins);
    o.after.temperature = o.fit.temperature;
    return o;
}

int cmd_calibrate(const Json& cfg, Artifacts& art, std::ostream& out) {
    const auto& cc = cfg["calibration"];
    Eigen::MatrixXd val_logits, test_logits;
    std::vector<int> val_labels, test_labels;
    if (!cc["val_logits_path"].is_null()) {
        if (cc["val_labels_path"].is_null()) throw ConfigError("calibration.val_labels_path is required with val_logits_path");
        val_logits = matrix_from_file(cc["val_logits_path"].get<std::string>());
        val_labels = labels_from_csv(cc["val_labels_path"].get<std::string>());
        if (!cc["test_logits_path"].is_null()) {
            if (cc["test_labels_path"].is_null()) throw ConfigError("calibration.test_labels_path is required with test_logits_path");
            test_logits = matrix_from_file(cc["test_logits_path"].get<std::string>());
            test_labels = labels_from_csv(cc["test_labels_path"].get<std::string>());
        } else {
            test_logits = val_logits;
            test_labels = val_labels;
        }
    } else {
        const Dataset ds = config::make_dataset(cfg);
        const Dataset val = ds.select(Split::val);
        if (val.size() == 0) throw ConfigError("calibrate without logit files needs data.val_fraction > 0");
        const TrainingTrace trace = train(config::make_model(cfg, ds), ds, config::train_settings(cfg));
        if (trace.diverged) throw DivergenceError("training diverged: " + trace.message, 0);
        const Dataset test = ds.select(Split::test).size() > 0 ? ds.select(Split::test) : val;
        val_logits = logits_of(trace.final_model, val.samples);
        val_labels = val.labels;
        test_logits = logits_of(trace.final_model, test.samples);
        test_labels = test.labels;
    }
    const CalibrationOutcome o = calibrate(val_logits, val_labels, test_logits, test_labels, cc["n_bins"].get<int>());
    Json j;
    j["temperature"] = number(o.fit.temperature);
    j["n_bins"] = o.before.n_bins;
    j["fit"] = {{"steps", o.fit.steps}, {"initial_nll", number(o.fit.initial_nll)}, {"nll", number(o.fit.nll)}};
    j["without_ts"] = calibration_json(o.before);
    j["with_ts"] = calibration_json(o.after);
    j["improvement"] = {{"ece", number(o.before.ece - o.after.ece)}, {"mce", number(o.before.mce - o.after.mce)}};
    art.write("calibration.json", j.dump(2) + "\n");
    art.write("reliability_without_ts.csv", bins_csv(o.before));
    art.write("reliability_with_ts.csv", bins_csv(o.after));
    out << "T = " << text::format_double(o.fit.temperature) << ", ECE " << text::format_double(o.before.ece) << " -> "
        << text::format_double(o.after.ece) << "\n";
    return kExitOk;
}

// ---- check -------------------------------------------------------------------------

CheckReport merge(const std::string& name, const std::vector<std::pair<std::string, CheckReport>>& parts, bool all_pass = true) {
    CheckReport r;
    r.name = name;
    r.pass = true;
    for (const auto& [prefix, part] : parts) {
        for (const auto& [k, v] : part.measured) r.measure(prefix + k, v);
        for (const auto& [k, v] : part.tolerances) r.tolerance(prefix + k, v);
        if (part.trials) r.measure(prefix + "trials", static_cast<double>(*part.trials));
        if (part.violation_rate) r.measure(prefix + "violation_rate", *part.violation_rate);
        if (part.bound) r.measure(prefix + "bound", *part.bound);
        r.measure(prefix + "pass", part.pass ? 1.0 : 0.0);
        for (const auto& n : part.notes) r.notes.push_back(prefix + n);
        if (all_pass) r.pass = r.pass && part.pass;
    }
    return r;
}

CheckReport run_check(const std::string& name, const Json& cfg) {
    const auto& c = cfg["checks"];
    const std::uint64_t seed = config::seed(cfg);
    if (name == "decomposition") {
        const Dataset ds = fixtures::standard_dataset(seed);
        const double tol = c["decomposition_tol"].get<double>();
        return merge(name, {{"linear_", check_decomposition(fixtures::linear_model(seed), ds, tol)},
                            {"mlp_", check_decomposition(fixtures::mlp_model(seed), ds, tol)}});
    }
    if (name == "orthogonal_invariance") {
        const Dataset ds = fixtures::wide_dataset(seed);
        const ModelState m = fixtures::wide_linear_model(seed);
        const int steps = c["orthogonal_steps"].get<int>();
        const double eta = c["orthogonal_learning_rate"].get<double>();
        CheckReport r = check_orthogonal_invariance(m, ds, gen_orthogonal_probe(ds, c["orthogonal_probes"].get<int>(), seed), steps, eta);
        r.measure("control_training_sample_relative_drift_max", max_relative_feature_drift(m, ds, ds.samples, steps, eta));
        r.seed = seed;
        return r;
    }
    if (name == "lora_equivalence") {
        LoraCheckConfig lc;
        lc.rank = c["lora_rank"].get<int>();
        lc.variance = c["lora_variance"].get<double>();
        lc.epsilon = c["lora_epsilon"].get<double>();
        lc.trials = c["lora_trials"].get<long>();
        lc.seed = seed;
        return check_lora_equivalence(fixtures::lora_base_model(seed), fixtures::lora_dataset(seed), lc);
    }
    if (name == "jl_lemma") {
        std::vector<std::pair<std::string, CheckReport>> parts;
        for (const auto& k : c["jl_k"])
            for (const auto& e : c["jl_epsilon"]) {
                const std::string prefix = "k" + std::to_string(k.get<long>()) + "_eps" + text::format_double(e.get<double>()) + "_";
                parts.emplace_back(prefix, check_jl_lemma(jl_unit_pair(k.get<long>(), e.get<double>(), c["jl_trials"].get<long>(), 2,
                                                                       c["jl_angle"].get<double>(), seed)));
            }
        CheckReport r = merge(name, parts);
        r.seed = seed;
        return r;
    }
    if (name == "norm_derivatives") {
        std::vector<std::pair<std::string, CheckReport>> parts;
        const int n = c["derivative_fixtures"].get<int>();
        for (int i = 0; i < n; ++i) {
            const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
            parts.emplace_back("fixture" + std::to_string(i + 1) + "_",
                               check_norm_derivatives(fixtures::linear_model(s), fixtures::standard_dataset(s)));
        }
        return merge(name, parts);
    }
    if (name == "norm_growth") {
        NormGrowthConfig nc;
        nc.steps = c["norm_growth_steps"].get<int>();
        nc.lp_learning_rate = nc.ft_learning_rate = c["norm_growth_learning_rate"].get<double>();
        CheckReport r = check_norm_growth(fixtures::overlap_model(seed), fixtures::overlap_dataset(seed), nc);
        r.seed = seed;
        return r;
    }
    if (name == "linearization_order") {
        const std::vector<double> grid = c["eta_grid"].get<std::vector<double>>();
        const Dataset ds = fixtures::standard_dataset(seed);
        CheckReport linear = check_linearization_order(fixtures::linear_model(seed), ds, grid);
        const CheckReport mlp = check_linearization_order(fixtures::mlp_model(seed), ds, grid);
        // The slope criterion is stated for the linear model; the MLP run is reported alongside.
        CheckReport r = merge(name, {{"linear_", linear}, {"mlp_", mlp}}, false);
        r.pass = linear.pass;
        return r;
    }
    throw ConfigError("unknown check '" + name + "'");
}

int cmd_check(const Json& cfg, Artifacts& art, std::ostream& out) {
    const auto names = cfg["checks"]["names"].get<std::vector<std::string>>();
    const std::vector<CheckReport> reports =
        parallel_map<CheckReport>(names.size(), [&](std::size_t i) { return run_check(names[i], cfg); });
    Json summary = Json::object();
    bool all = true;
    for (const auto& r : reports) {
        art.write(r.name + ".json", r.to_json());
        summary[r.name] = r.pass;
        all = all && r.pass;
        out << (r.pass ? "PASS " : "FAIL ") << r.name << "\n";
    }
    art.write("summary.json", Json{{"all_pass", all}, {"checks", summary}}.dump(2) + "\n");
    return all ? kExitOk : kExitCheckFailed;
}

// ---- reproduce ---------------------------------------------------------------------

Json with_seed(const Json& cfg, std::uint64_t seed) {
    Json c = cfg;
    c["seed"] = seed;
    return c;
}

Json with_default_splits(const Json& cfg) {
    Json c = cfg;
    if (c["data"]["path"].is_null() && c["data"]["val_fraction"].get<double>() == 0.0 &&
        c["data"]["test_fraction"].get<double>() == 0.0) {
        c["data"]["val_fraction"] = 0.25;
        c["data"]["test_fraction"] = 0.25;
        c["data"]["max_rows"] = nullptr;
        c["data"]["n_per_class"] = std::max(c["data"]["n_per_class"].get<int>(), 20);
    }
    return c;
}

std::vector<std::uint64_t> repro_seeds(const Json& cfg) { return cfg["reproduce"]["seeds"].get<std::vector<std::uint64_t>>(); }

std::string repro_norm_curves(const Json& cfg) {
    const auto seeds = repro_seeds(cfg);
    const std::vector<TrainMode> modes{TrainMode::lp, TrainMode::ft, TrainMode::lora};
    auto rows = parallel_map<std::string>(seeds.size() * modes.size(), [&](std::size_t i) {
        const Json c = with_seed(cfg, seeds[i / modes.size()]);
        const Dataset ds = config::make_dataset(c);
        TrainConfig tc = config::train_settings(c);
        tc.mode = modes[i % modes.size()];
        tc.lp_solver = LpSolver::gradient_descent;
        tc.learning_rate = c["reproduce"]["curve_learning_rate"].get<double>();
        tc.epochs = c["reproduce"]["curve_epochs"].get<int>();
        const TrainingTrace trace = train(config::make_model(c, ds), ds, tc);
        std::string out;
        for (const auto& r : trace.records)
            out += std::to_string(seeds[i / modes.size()]) + ',' + std::string(to_string(tc.mode)) + ',' + std::to_string(r.step) + ',' +
                   text::format_double(r.loss) + ',' + text::format_double(r.accuracy) + ',' +
                   text::format_double(r.head_weight_norm) + ',' + text::format_double(r.head_bias_norm) + ',' +
                   text::format_double(r.mean_logit_norm) + '\n';
        return out;
    });
    std::string csv = std::string(kAnalogNote) + " (classifier norm growth)\n";
    csv += "seed,mode,step,loss,accuracy,head_weight_norm,head_bias_norm,mean_logit_norm\n";
    for (const auto& r : rows) csv += r;
    return csv;
}

std::string repro_singular_values(const Json& cfg) {
    const auto seeds = repro_seeds(cfg);
    auto rows = parallel_map<std::string>(seeds.size(), [&](std::size_t i) {
        const Json c = with_seed(cfg, seeds[i]);
        const Dataset ds = config::make_dataset(c).select(Split::train);
        const ModelState init = config::make_model(c, ds);
        Json lp_cfg = c;
        lp_cfg["kernel"]["anchor"] = "lp";
        std::string out;
        for (const auto& [name, anchor] : {std::pair<std::string, ModelState>{"FT", init}, {"LP-FT", kernel_anchor(lp_cfg, init, ds)}}) {
            const KernelStats s = kernel_stats(compute_decomposition(anchor, ds.samples).total());
            for (std::size_t j = 0; j < s.normalized_singular_values.size(); ++j)
                out += std::to_string(seeds[i]) + ',' + name + ',' + std::to_string(j + 1) + ',' +
                       text::format_double(s.normalized_singular_values[j]) + '\n';
        }
        return out;
    });
    std::string csv = std::string(kAnalogNote) + " (NTK singular value distribution)\n";
    csv += "seed,anchor,index,normalized_singular_value\n";
    for (const auto& r : rows) csv += r;
    return csv;
}

std::string repro_norm_sweep(const Json& cfg) {
    const auto seeds = repro_seeds(cfg);
    const std::vector<TrainMode> modes{TrainMode::ft, TrainMode::lp_ft};
    const auto scales = cfg["reproduce"]["scales"].get<std::vector<double>>();
    auto rows = parallel_map<std::string>(seeds.size() * modes.size(), [&](std::size_t i) {
        const Json c = with_seed(cfg, seeds[i / modes.size()]);
        const Dataset ds = config::make_dataset(c);
        TrainConfig tc = config::train_settings(c);
        tc.mode = modes[i % modes.size()];
        tc.learning_rate = c["reproduce"]["sweep_learning_rate"].get<double>();
        tc.epochs = c["reproduce"]["sweep_epochs"].get<int>();
        std::string out;
        for (const auto& r : head_norm_sweep(config::make_model(c, ds), ds, scales, tc))
            out += std::to_string(seeds[i / modes.size()]) + ',' + std::string(to_string(tc.mode)) + ',' + text::format_double(r.scale) +
                   ',' + text::format_double(r.feature_diff) + ',' + text::format_double(r.start_head_norm) + ',' +
                   text::format_double(r.final_loss) + ',' + (r.diverged ? "1" : "0") + ',' + (r.baseline ? "1" : "0") + '\n';
        return out;
    });
    std::string csv = std::string(kAnalogNote) + " (feature difference vs classifier norm scale)\n";
    csv += "seed,mode,scale,feature_diff,start_head_norm,final_loss,diverged,baseline\n";
    for (const auto& r : rows) csv += r;
    return csv;
}

const std::vector<TrainMode>& all_modes() {
    static const std::vector<TrainMode> modes{TrainMode::lp, TrainMode::ft, TrainMode::lp_ft, TrainMode::lora, TrainMode::lp_lora};
    return modes;
}

std::string repro_table1(const Json& cfg) {
    const auto seeds = repro_seeds(cfg);
    const auto& modes = all_modes();
    auto rows = parallel_map<std::string>(seeds.size() * modes.size(), [&](std::size_t i) {
        const Json c = with_default_splits(with_seed(cfg, seeds[i / modes.size()]));
        const Dataset ds = config::make_dataset(c);
        TrainConfig tc = config::train_settings(c);
        tc.mode = modes[i % modes.size()];
        const ModelState model = config::make_model(c, ds);
        const TrainingTrace trace = train(model, ds, tc);
        const Dataset eval = ds.select(Split::test);
        const FeatureChangeStats fc =
            feature_change_stats(features_of(model, eval.samples), features_of(trace.final_model, eval.samples), eval.labels);
        return std::to_string(seeds[i / modes.size()]) + ',' + std::string(to_string(tc.mode)) + ',' +
               text::format_double(fc.mean_cosine_similarity) + ',' + text::format_double(fc.mean_diff_norm) + ',' +
               (fc.fdr ? text::format_double(fc.fdr->value) : std::string("nan")) + ',' +
               text::format_double(trace.final_model.head.V.norm()) + ',' + text::format_double(accuracy(trace.final_model, eval)) +
               ',' + (trace.diverged ? "1" : "0") + '\n';
    });
    std::string csv = std::string(kAnalogNote) + " (feature change table, test split; FDR = tr(S_B)/tr(S_W))\n";
    csv += "seed,mode,cosine_similarity,diff_norm,fdr,head_norm,test_accuracy,diverged\n";
    for (const auto& r : rows) csv += r;
    return csv;
}

std::string repro_table2(const Json& cfg) {
    const auto seeds = repro_seeds(cfg);
    auto rows = parallel_map<std::string>(seeds.size(), [&](std::size_t i) {
        const Json c = with_default_splits(with_seed(cfg, seeds[i]));
        const Dataset ds = config::make_dataset(c);
        const Dataset tr = ds.select(Split::train);
        const Dataset te = ds.select(Split::test);
        const ModelState init = config::make_model(c, ds);
        Json lp_cfg = c;
        lp_cfg["kernel"]["anchor"] = "lp";
        std::string out;
        for (const auto& [name, anchor] : {std::pair<std::string, ModelState>{"FT", init}, {"LP-FT", kernel_anchor(lp_cfg, init, tr)}}) {
            const KernelDecomposition k = compute_decomposition(anchor, tr.samples);
            const KernelStats s = kernel_stats(k.total());
            const double ratio = ft_ratio(k, residuals(anchor, tr)).ratio;
            const int classes = static_cast<int>(k.num_classes);
            const double lambda =
                cross_validate_kernel_lambda(k.total(), tr.labels, classes, default_lambda_grid(), 5, seeds[i]);
            const KernelRegressionResult res = fit_kernel_regression(k.total(), tr.labels, classes, lambda);
            const KernelPrediction pred =
                predict_kernel_regression(compute_cross_decomposition(anchor, te.samples, tr.samples).total(), res, te.labels);
            out += std::to_string(seeds[i]) + ',' + name + ',' + std::to_string(s.rank) + ',' + text::format_double(s.frobenius_norm) +
                   ',' + text::format_double(res.train_accuracy) + ',' + text::format_double(*pred.accuracy) + ',' +
                   text::format_double(ratio) + '\n';
        }
        return out;
    });
    std::string csv = std::string(kAnalogNote) + " (NTK statistics table)\n";
    csv += "seed,anchor,rank,frobenius_norm,kernel_regression_train_accuracy,kernel_regression_test_accuracy,ft_ratio\n";
    for (const auto& r : rows) csv += r;
    return csv;
}

std::string repro_table3(const Json& cfg) {
    const auto seeds = repro_seeds(cfg);
    const auto& modes = all_modes();
    auto rows = parallel_map<std::string>(seeds.size() * modes.size(), [&](std::size_t i) {
        const Json c = with_default_splits(with_seed(cfg, seeds[i / modes.size()]));
        const Dataset ds = config::make_dataset(c);
        TrainConfig tc = config::train_settings(c);
        tc.mode = modes[i % modes.size()];
        const TrainingTrace trace = train(config::make_model(c, ds), ds, tc);
        const Dataset val = ds.select(Split::val);
        const Dataset test = ds.select(Split::test);
        const CalibrationOutcome o = calibrate(logits_of(trace.final_model, val.samples), val.labels,
                                               logits_of(trace.final_model, test.samples), test.labels,
                                               c["calibration"]["n_bins"].get<int>());
        return std::to_string(seeds[i / modes.size()]) + ',' + std::string(to_string(tc.mode)) + ',' +
               text::format_double(o.fit.temperature) + ',' + text::format_double(o.before.ece) + ',' +
               text::format_double(o.after.ece) + ',' + text::format_double(o.before.ece - o.after.ece) + ',' +
               text::format_double(o.before.mce) + ',' + text::format_double(o.after.mce) + ',' +
               text::format_double(o.before.mce - o.after.mce) + '\n';
    });
    std::string csv = std::string(kAnalogNote) + " (temperature scaling table, test split)\n";
    csv += "seed,mode,temperature,ece_without_ts,ece_with_ts,ece_improvement,mce_without_ts,mce_with_ts,mce_improvement\n";
    for (const auto& r : rows) csv += r;
    return csv;
}

const std::vector<std::pair<std::string, std::string>>& repro_targets() {
    static const std::vector<std::pair<std::string, std::string>> targets{
        {"norm-curves", "norm_curves.csv"}, {"singular-values", "singular_values.csv"}, {"norm-sweep", "norm_sweep.csv"},
        {"table1", "table1_feature_change.csv"}, {"table2", "table2_ntk_stats.csv"}, {"table3", "table3_calibration.csv"}};
    return targets;
}

int cmd_reproduce(const Json& cfg, const std::string& target, Artifacts& art, std::ostream& out) {
    art.set_target(target);
    for (const auto& [name, file] : repro_targets()) {
        if (target != "all" && target != name) continue;
        std::string csv;
        if (name == "norm-curves") csv = repro_norm_curves(cfg);
        else if (name == "singular-values") csv = repro_singular_values(cfg);
        else if (name == "norm-sweep") csv = repro_norm_sweep(cfg);
        else if (name == "table1") csv = repro_table1(cfg);
        else if (name == "table2") csv = repro_table2(cfg);
        else csv = repro_table3(cfg);
        art.write(file, csv);
        out << "wrote " << file << "\n";
    }
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Linearized fine-tuning analysis toolkit: NTK decomposition, LP/FT/LoRA training, theorem checks"};
    app.require_subcommand(1);
    std::optional<std::string> config_path;
    std::vector<std::string> overrides;
    std::optional<std::string> out_dir;
    std::string target;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "JSON configuration file");
        sub->add_option("--set", overrides, "Override a key, e.g. --set training.epochs=50")->take_all();
        sub->add_option("-o,--out", out_dir, "Output directory (overrides output_dir)");
    };
    std::vector<CLI::App*> subs;
    subs.push_back(app.add_subcommand("gen-data", "Generate a labelled Gaussian-cluster dataset"));
    subs.push_back(app.add_subcommand("train", "Train with LP, FT, LoRA, LP-FT or LP-LoRA"));
    subs.push_back(app.add_subcommand("ntk", "Compute the empirical NTK and its P/F decomposition"));
    subs.push_back(app.add_subcommand("check", "Run the theorem verification suite"));
    subs.push_back(app.add_subcommand("kernel-reg", "Kernel logistic regression on an NTK"));
    subs.push_back(app.add_subcommand("calibrate", "ECE/MCE before and after temperature scaling"));
    CLI::App* repro = app.add_subcommand("reproduce", "Desk-scale analogs of the figures and tables");
    subs.push_back(repro);
    for (auto* s : subs) add_common(s);
    std::vector<std::string> target_names{"all"};
    for (const auto& t : repro_targets()) target_names.push_back(t.first);
    repro->add_option("target", target, "What to reproduce")->required()->check(CLI::IsMember(target_names));
    app.add_subcommand("schema", "Print the configuration schema");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
    CLI::App* chosen = app.get_subcommands().front();
    const std::string name = chosen->get_name();
    if (name == "schema") {
        out << config::schema_document();
        return kExitOk;
    }

    Json cfg;
    try {
        if (out_dir) overrides.push_back("output_dir=" + Json(*out_dir).dump());
        cfg = config::load(config_path, overrides, config::process_environment());
    } catch (const Error& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }

    std::optional<Artifacts> art;
    const fs::path dir = cfg["output_dir"].get<std::string>();
    const bool fresh_dir = !fs::exists(dir);
    try {
        art.emplace(cfg["output_dir"].get<std::string>(), name, cfg);
        int code = kExitOk;
        if (name == "gen-data") code = cmd_gen_data(cfg, *art, out);
        else if (name == "train") code = cmd_train(cfg, *art, out);
        else if (name == "ntk") code = cmd_ntk(cfg, *art, out);
        else if (name == "check") code = cmd_check(cfg, *art, out);
        else if (name == "kernel-reg") code = cmd_kernel_reg(cfg, *art, out);
        else if (name == "calibrate") code = cmd_calibrate(cfg, *art, out);
        else code = cmd_reproduce(cfg, target, *art, out);
        art->finish(code == kExitOk ? "complete" : "checks_failed");
        return code;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        // Config problems found late still leave nothing behind.
        std::error_code ec;
        if (fresh_dir) fs::remove_all(dir, ec);
        return kExitConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        if (art) art->finish("incomplete", e.what());
        return kExitRuntimeError;
    }
}

}  // namespace lpft::cli
