// SPDX-License-Identifier: Apache-2.0
#include "gdkm/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>

namespace gdkm::cli {

using nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (family_of(code)) {
    case ErrorFamily::Config: return kExitConfig;
    case ErrorFamily::Data: return kExitData;
    case ErrorFamily::Numeric: return kExitNumeric;
  }
  return kExitNumeric;
}

json error_json(ErrorCode code, const std::string& message) {
  return {{"error", std::string(to_string(code))}, {"message", message}, {"exit_code", exit_code_for(code)}};
}

std::string flag_name(const std::string& key) {
  std::string s = key;
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

void add_config_flags(CLI::App& app, std::map<std::string, std::string>& overrides) {
  for (const auto& key : experiment::config_keys()) {
    const std::string name = key.name;
    app.add_option_function<std::string>(
           "--" + flag_name(name), [&overrides, name](const std::string& v) { overrides[name] = v; },
           std::string(key.help) + " [" + key.type + "]")
        ->group("Config keys");
  }
}

json flag_value(const experiment::ConfigKey& key, const std::string& text) {
  const std::string type = key.type;
  const auto bad = [&]() -> json {
    fail(ErrorCode::ConfigError, "--" + flag_name(key.name) + " expects " + type + ", got '" + text + "'");
  };
  try {
    std::size_t used = 0;
    if (type == "string") return text;
    if (type == "int") {
      const long long v = std::stoll(text, &used);
      return used == text.size() ? json(v) : bad();
    }
    if (type == "number") {
      const double v = std::stod(text, &used);
      return used == text.size() ? json(v) : bad();
    }
    if (type == "bool") {
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      return bad();
    }
    if (type == "nu") {
      json arr = json::array();
      std::size_t start = 0;
      while (start <= text.size()) {
        const auto pos = text.find(',', start);
        const std::string part = text.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
        arr.push_back(experiment::nu_to_json(experiment::parse_nu(json(part))));
        if (pos == std::string::npos) break;
        start = pos + 1;
      }
      return arr.size() == 1 ? arr.front() : arr;
    }
  } catch (const std::logic_error&) {
    return bad();
  }
  return bad();
}

experiment::RunConfig resolve_config(const std::string& config_path, const std::map<std::string, std::string>& overrides) {
  json j = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) fail(ErrorCode::ConfigError, "cannot open config file " + config_path);
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::ConfigError, config_path + ": " + e.what());
    }
    if (!j.is_object()) fail(ErrorCode::ConfigError, config_path + ": config must be a JSON object");
  }
  for (const auto& key : experiment::config_keys()) {
    if (const auto it = overrides.find(key.name); it != overrides.end()) j[key.name] = flag_value(key, it->second);
  }
  return experiment::config_from_json(j);
}

void setup_logging() {
  auto logger = spdlog::get("gdkm");
  if (!logger) logger = spdlog::stderr_color_mt("gdkm");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("GDKM_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept "off" when asked for.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
    else spdlog::warn("ignoring unknown GDKM_LOG level '{}'", env);
  }
}

}  // namespace gdkm::cli
