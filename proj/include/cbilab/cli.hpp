#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cbilab {

/// Experiment file for `mc`: the kind plus its parameters with defaults
/// filled in. Mechanism and law blocks hold their JSON specs.
struct ExperimentConfig {
    std::string kind;  // verify-laplace | gwi-limit | pitman
    nlohmann::json params = nlohmann::json::object();

    bool operator==(const ExperimentConfig&) const = default;
};

/// Parses TOML with a top-level `experiment` key. Unknown keys, wrong types
/// and missing required keys throw ConfigError. When expected_kind is non-empty
/// the file must declare that kind.
ExperimentConfig parse_experiment_config(std::string_view toml_text, std::string_view expected_kind = {});

/// TOML text that parses back to the same config.
std::string to_toml(const ExperimentConfig& config);

/// Command-line entry point; args exclude the program name. Returns 0 on
/// success, 1 on validation errors (JSON error object on err), 2 when an `mc`
/// run misses its acceptance tolerance.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cbilab
