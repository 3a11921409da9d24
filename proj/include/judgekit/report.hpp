#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace judgekit {

// Renders a metrics bundle as a csv or markdown table. A bundle is JSON with
// a "kind" discriminator ("position_bias", "agreement", "winrate",
// "bench_score", "verbosity", "math_failures", "calibration") and a "rows"
// array; the compute subcommands emit exactly this shape. Output bytes are a
// pure function of the bundle; percentages carry one decimal.
std::string emit_report(const nlohmann::json& bundle, std::string_view format);

// "65.0"-style fixed one-decimal rendering used across all tables.
std::string format_fixed1(double value);

} // namespace judgekit
