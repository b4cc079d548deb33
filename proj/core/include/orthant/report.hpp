#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "orthant/error.hpp"
#include "orthant/grf.hpp"
#include "orthant/orthant.hpp"

namespace orthant::report {

[[nodiscard]] std::string_view version() noexcept;

/// Keys whose values depend on wall-clock measurements. Everything else in
/// a report is a pure function of inputs, configuration and seed.
inline constexpr std::string_view kTimingKeys[] = {"time_s", "efficiency", "efficiency_infinite",
                                                   "timing"};

/// {method, p, pi_t, variance, std_error, q, m_star, acceptance_rate,
///  time_s, efficiency, seed, config, version, ...details}
[[nodiscard]] nlohmann::json to_json(const Estimate& est, const nlohmann::json& config);

[[nodiscard]] nlohmann::json to_json(const ConservativeResult& res, const nlohmann::json& config,
                                     std::uint64_t seed);

/// {"error": {"code", "message", "exit_code"}, "version"}
[[nodiscard]] nlohmann::json error_json(std::string_view code, std::string_view message,
                                        int exit_code);

/// Copy of `j` with every timing key removed, recursively.
[[nodiscard]] nlohmann::json strip_timing(nlohmann::json j);

}  // namespace orthant::report
