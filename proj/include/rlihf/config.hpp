#pragma once

#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "rlihf/harness.hpp"

namespace rlihf::harness {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Missing keys keep their defaults; unknown keys and invalid values raise ConfigError.
Config parse_config(const nlohmann::json& j);
/// Reads a config file, or the "config" object of a run manifest.
Config load_config(const std::filesystem::path& path);
/// Fully resolved form; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const Config& cfg);

}  // namespace rlihf::harness
