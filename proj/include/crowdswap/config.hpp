#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "crowdswap/sim.hpp"

namespace crowdswap::config {

inline constexpr int kSchemaVersion = 1;

struct OutputConfig {
    std::string dir = "out";
    bool events = true;
    bool stream_log = true;
};

struct ConfigFile {
    int schema_version = kSchemaVersion;
    sim::Scenario scenario;
    /// Named scenarios derived from `scenario` by overrides, in file order.
    std::vector<std::pair<std::string, sim::Scenario>> variants;
    OutputConfig output;

    /// `scenario` itself for its own name, otherwise a variant. Throws ConfigError.
    const sim::Scenario& find(const std::string& name) const;
};

/// Strict YAML parsing: unknown keys, bad types and invalid values raise
/// ConfigError with the line of the offending node. Relative paths inside
/// the file resolve against `base_dir`.
ConfigFile parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ConfigFile load_config(const std::filesystem::path& path);

} // namespace crowdswap::config
