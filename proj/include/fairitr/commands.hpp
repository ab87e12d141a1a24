#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace fairitr {

// loads the config file and applies dotted-path key=value overrides
nlohmann::json load_config(const std::string& path, const std::vector<std::string>& overrides,
                           long long seed_override);

// runs one command; returns the result document for stdout
nlohmann::json run_command(const std::string& name, const nlohmann::json& cfg,
                           const std::string& out_dir);

}  // namespace fairitr
