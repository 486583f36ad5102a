// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "hopformer/train.hpp"

namespace hopformer {

/// The run configuration lives in a flat JSON object with dotted keys, e.g.
/// {"lr": 1e-3, "aug.p_aug": 0.5}. CLI --set overrides are applied on top.
nlohmann::json default_flat_config();

nlohmann::json load_config_file(const std::string& path);

/// Applies "key=value" (value parsed as JSON when possible, else string).
void apply_override(nlohmann::json& flat, const std::string& key_eq_value);

/// Validates keys/types and builds the train configuration.
TrainConfig train_config_from_flat(const nlohmann::json& flat);

/// Lists every config key with type and default, for --help and the README.
std::string config_key_help();

}  // namespace hopformer
