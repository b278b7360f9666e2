#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lpft {

/// Outcome of one verification. Entries keep insertion order so the JSON
/// rendering is stable.
struct CheckReport {
    std::string name;
    bool pass = false;
    std::vector<std::pair<std::string, double>> measured;
    std::vector<std::pair<std::string, double>> tolerances;
    std::optional<long> trials;
    std::optional<double> violation_rate;
    std::optional<double> bound;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> notes;

    void measure(std::string key, double value) { measured.emplace_back(std::move(key), value); }
    void tolerance(std::string key, double value) { tolerances.emplace_back(std::move(key), value); }
    std::optional<double> value(const std::string& key) const;

    /// Pretty-printed JSON, non-finite values rendered as strings.
    std::string to_json() const;
};

/// Wilson score interval half-width for an observed rate over `trials`
/// draws at the given z (95% by default).
double wilson_half_width(double rate, long trials, double z = 1.96);

}  // namespace lpft
