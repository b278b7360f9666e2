#include "lpft/report.hpp"

#include "lpft/errors.hpp"
#include "lpft/text_format.hpp"

#include <json.hpp>

#include <cmath>

namespace lpft {

namespace {

nlohmann::ordered_json number(double v) {
    if (std::isfinite(v)) return v;
    return text::format_double(v);
}

}  // namespace

std::optional<double> CheckReport::value(const std::string& key) const {
    for (const auto& [k, v] : measured)
        if (k == key) return v;
    return std::nullopt;
}

std::string CheckReport::to_json() const {
    nlohmann::ordered_json j;
    j["check"] = name;
    j["pass"] = pass;
    auto& m = j["measured"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : measured) m[k] = number(v);
    auto& t = j["tolerances"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : tolerances) t[k] = number(v);
    if (trials) j["trials"] = *trials;
    if (violation_rate) j["violation_rate"] = number(*violation_rate);
    if (bound) j["bound"] = number(*bound);
    if (seed) j["seed"] = *seed;
    if (!notes.empty()) j["notes"] = notes;
    return j.dump(2) + "\n";
}

double wilson_half_width(double rate, long trials, double z) {
    if (trials <= 0) throw ParameterError("wilson_half_width: trials must be positive");
    if (!(rate >= 0.0 && rate <= 1.0)) throw ParameterError("wilson_half_width: rate outside [0, 1]");
    const double n = static_cast<double>(trials);
    const double p = rate;
    const double z2 = z * z;
    return z / (1.0 + z2 / n) * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
}

}  // namespace lpft
