#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "muxjba/experiments.hpp"

namespace muxjba {

/// Configuration or invariant failure; maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct LoadedConfig {
    ExperimentPlan plan;
    std::vector<std::string> warnings;  ///< unknown keys, non-fatal
    std::string raw_text;               ///< exact bytes of the config file
};

/// Parse and validate a JSON run configuration. Missing cell fields fall
/// back to the reference-device defaults. Throws ConfigError with the
/// offending field or parse location.
LoadedConfig load_config(const std::string& path);
LoadedConfig parse_config(const std::string& text, const std::string& origin);

/// Reference-device defaults for cells 1-4.
CellConfig default_cell(int cell_id);

std::string sha256_hex(const std::string& bytes);

struct RunManifest {
    std::string artifact_version;
    std::string config_digest_sha256;
    std::uint64_t master_seed = 0;
    int threads = 0;
    std::string seed_scheme;
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;
    double wall_clock_s = 0.0;

    void write(const std::string& path) const;
};

}  // namespace muxjba
