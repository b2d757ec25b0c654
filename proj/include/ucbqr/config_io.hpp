#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"
#include "ucbqr/data.hpp"
#include "ucbqr/model.hpp"

namespace ucbqr {

class ConfigParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

nlohmann::json to_json(const SystemConfig& config);
SystemConfig system_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PolicySpec& spec);
/// Missing fields take the PolicySpec defaults.
PolicySpec policy_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

}  // namespace ucbqr
