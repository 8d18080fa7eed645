// SPDX-License-Identifier: Apache-2.0
//
// The gdkm command-line tool. Exit codes: 0 success, 2 configuration error,
// 3 data error, 4 numeric failure. Failures print one JSON object
// {"error", "message", "exit_code"} on stdout.
#pragma once

#include "gdkm/error.hpp"
#include "gdkm/experiment.hpp"

#include <json.hpp>

#include <map>
#include <ostream>
#include <string>

namespace CLI {
class App;
}

namespace gdkm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

int exit_code_for(ErrorCode code);
nlohmann::json error_json(ErrorCode code, const std::string& message);

/// Flag name for a config key: underscores become dashes.
std::string flag_name(const std::string& key);

/// Adds one --flag per config key; values land in `overrides` keyed by the
/// config key name.
void add_config_flags(CLI::App& app, std::map<std::string, std::string>& overrides);

/// Converts a flag string to the JSON type the key expects. Throws ConfigError.
nlohmann::json flag_value(const experiment::ConfigKey& key, const std::string& text);

/// Config file (optional) with flag overrides applied on top, validated.
experiment::RunConfig resolve_config(const std::string& config_path, const std::map<std::string, std::string>& overrides);

/// Reads GDKM_LOG (trace, debug, info, warn, error, off) and sends logs to stderr.
void setup_logging();

/// Entry point; `out` receives the command's JSON results.
int run(int argc, const char* const* argv, std::ostream& out);

}  // namespace gdkm::cli
