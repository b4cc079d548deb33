#pragma once

#include <string_view>

namespace orthant::log {

// Thin facade over spdlog. The level is read once from the ORTHANT_LOG
// environment variable (trace, debug, info, warn, error, off; default warn).
void debug(std::string_view msg);
void info(std::string_view msg);
void warn(std::string_view msg);

}  // namespace orthant::log
