#include "lpft/cli.hpp"
#include "lpft/config.hpp"
#include "lpft/errors.hpp"
#include "lpft/text_format.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <map>
#include <set>
#include <sstream>

using namespace lpft;
namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args, std::string* err_out = nullptr) {
    args.insert(args.begin(), "lpft");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (err_out) *err_out = err.str();
    return code;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = text::read_file(e.path().string());
    return files;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("lpft_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

fs::path write_config(const std::string& name, const std::string& body) {
    const fs::path p = fs::temp_directory_path() / ("lpft_cli_test_" + name + ".json");
    text::write_file(p.string(), body);
    return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("defaults validate and the schema lists every section") {
    const config::Json cfg = config::load(std::nullopt, {}, {});
    CHECK(cfg == config::defaults());
    const auto schema = nlohmann::json::parse(config::schema_document());
    for (const char* s : {"data", "model", "training", "checks", "kernel", "calibration", "reproduce"})
        CHECK(schema["properties"].contains(s));
}

TEST_CASE("config errors carry file and line") {
    const fs::path p = write_config("bad", "{\n  \"seed\": 1,\n  \"training\": {\n    \"epochs\": -5\n  }\n}\n");
    try {
        config::load(p.string(), {}, {});
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(p.string() + ":4: training.epochs") != std::string::npos);
    }
    const fs::path q = write_config("unknown", "{\n  \"model\": {\n    \"depth\": 3\n  }\n}\n");
    CHECK_THROWS_WITH_AS(config::load(q.string(), {}, {}), doctest::Contains(":3: model.depth"), ConfigError);
    const fs::path r = write_config("syntax", "{\n  \"seed\": 1,,\n}\n");
    CHECK_THROWS_WITH_AS(config::load(r.string(), {}, {}), doctest::Contains(":2:"), ConfigError);
}

TEST_CASE("precedence: file, then environment, then --set") {
    const fs::path p = write_config("layers", "{\"training\": {\"epochs\": 7, \"learning_rate\": 0.5}}");
    const config::Json cfg = config::load(p.string(), {"training.epochs=9"},
                                          {{"LPFT__TRAINING__EPOCHS", "8"}, {"LPFT__TRAINING__LEARNING_RATE", "0.25"}});
    CHECK(cfg["training"]["epochs"] == 9);
    CHECK(cfg["training"]["learning_rate"] == 0.25);
    CHECK_THROWS_AS(config::load(std::nullopt, {"training.nope=1"}, {}), ConfigError);
    CHECK_THROWS_AS(config::load(std::nullopt, {"data.val_fraction=0.6", "data.test_fraction=0.5"}, {}), ConfigError);
}

TEST_CASE("config errors exit 2 and leave no artifacts") {
    const fs::path out = scratch("cfgerr");
    std::string err;
    CHECK(run_cli({"train", "--set", "training.mode=SGD", "-o", out.string()}, &err) == cli::kExitConfigError);
    CHECK(err.find("training.mode") != std::string::npos);
    CHECK_FALSE(fs::exists(out));
    CHECK(run_cli({"calibrate", "-o", out.string()}) == cli::kExitConfigError);
    CHECK_FALSE(fs::exists(out));
    CHECK(run_cli({"bogus"}) == cli::kExitConfigError);
}

TEST_CASE("runtime errors exit 3 with an incomplete manifest") {
    const fs::path out = scratch("diverge");
    CHECK(run_cli({"train", "--set", "training.learning_rate=1000", "--set", "training.epochs=200", "-o", out.string()}) ==
          cli::kExitRuntimeError);
    const auto manifest = nlohmann::json::parse(text::read_file((out / "manifest.json").string()));
    CHECK(manifest["status"] == "incomplete");
    CHECK(manifest.contains("message"));
    fs::remove_all(out);
}

TEST_CASE("manifest names every file written") {
    const fs::path out = scratch("manifest");
    REQUIRE(run_cli({"train", "--set", "training.epochs=3", "--set", "data.val_fraction=0.2", "--set", "data.test_fraction=0.2",
                     "-o", out.string()}) == cli::kExitOk);
    const auto manifest = nlohmann::json::parse(text::read_file((out / "manifest.json").string()));
    CHECK(manifest["status"] == "complete");
    std::set<std::string> listed;
    for (const auto& f : manifest["files"]) listed.insert(f["name"].get<std::string>());
    for (const auto& [name, _] : snapshot(out))
        if (name != "manifest.json") CHECK(listed.count(name) == 1);
    CHECK(listed.size() + 1 == snapshot(out).size());
    CHECK(listed.count("logits_val.csv") == 1);
    fs::remove_all(out);
}

TEST_CASE("subcommands rerun byte-identically") {
    const std::vector<std::vector<std::string>> runs{
        {"gen-data"},
        {"train", "--set", "training.epochs=5", "--set", "training.mode=LP-FT"},
        {"ntk", "--set", "kernel.anchor=lp"},
        {"kernel-reg"},
        {"calibrate", "--set", "data.val_fraction=0.3", "--set", "data.max_rows=null", "--set", "training.epochs=20"},
        {"check", "--set", "checks.names=[\"decomposition\",\"norm_derivatives\"]"},
    };
    for (const auto& args : runs) {
        CAPTURE(args.front());
        const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
        auto with_out = [&](const fs::path& dir) {
            auto v = args;
            v.push_back("-o");
            v.push_back(dir.string());
            return v;
        };
        REQUIRE(run_cli(with_out(a)) == cli::kExitOk);
        REQUIRE(run_cli(with_out(b)) == cli::kExitOk);
        CHECK(snapshot(a) == snapshot(b));
        fs::remove_all(a);
        fs::remove_all(b);
    }
}

TEST_CASE("kernel-reg reads exported kernels") {
    const fs::path ntk = scratch("ntk_export"), kr = scratch("kr_import");
    REQUIRE(run_cli({"ntk", "-o", ntk.string()}) == cli::kExitOk);
    REQUIRE(run_cli({"kernel-reg", "--set", "kernel.train_kernel_path=\"" + (ntk / "kernel_total.csv").string() + "\"", "--set",
                     "kernel.train_labels_path=\"" + (ntk / "labels_train.csv").string() + "\"", "--set", "kernel.lambda=0.01",
                     "-o", kr.string()}) == cli::kExitOk);
    const auto result = nlohmann::json::parse(text::read_file((kr / "result.json").string()));
    CHECK(result["lambda"] == 0.01);
    CHECK(result["num_classes"] == 3);
    fs::remove_all(ntk);
    fs::remove_all(kr);
}

}
