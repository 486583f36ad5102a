// SPDX-License-Identifier: Apache-2.0
#include "hopformer/config.hpp"

#include <fstream>
#include <sstream>

namespace hopformer {

namespace {

using nlohmann::json;

struct KeySpec {
  const char* key;
  const char* type;  // "uint", "float", "bool", "string"
  const char* doc;
};

const KeySpec kKeys[] = {
    {"seed", "uint", "master seed for splits, init, shuffling, dropout, augmentation"},
    {"batch_size", "uint", "mini-batch size (default 2000)"},
    {"lr", "float", "AdamW learning rate"},
    {"weight_decay", "float", "AdamW decoupled weight decay"},
    {"dropout", "float", "dropout rate in [0, 1)"},
    {"epochs_max", "uint", "hard cap on training epochs"},
    {"patience", "uint", "early stop after this many epochs without val improvement (default 50)"},
    {"split.train_frac", "float", "train fraction (default 0.6)"},
    {"split.val_frac", "float", "validation fraction (default 0.2)"},
    {"split.test_frac", "float", "test fraction (default 0.2)"},
    {"split.train_file", "string", "explicit train index file (one node id per line)"},
    {"split.val_file", "string", "explicit val index file"},
    {"split.test_file", "string", "explicit test index file"},
    {"model.hidden_dim", "uint", "transformer width d_m"},
    {"model.layers", "uint", "encoder layer count"},
    {"model.heads", "uint", "attention heads (must divide hidden_dim)"},
    {"model.ffn_hidden", "uint", "FFN width (0 = 2 * hidden_dim)"},
    {"model.mlp_hidden", "uint", "classifier hidden width"},
    {"readout.include_hop0_logit", "bool", "admit hop 0 into the readout softmax (default false)"},
    {"aug.enabled", "bool", "enable batch augmentation"},
    {"aug.p_aug", "float", "probability a batch is augmented"},
    {"aug.tau", "float", "hop-mask ratio in (0, 1)"},
    {"aug.alpha", "float", "beta-distribution shape for the mixing weight"},
    {"aug.beta", "float", "beta-distribution shape for the mixing weight"},
    {"aug.protect_hop0", "bool", "never mask hop 0 (default false)"},
    {"tokens.resident_bytes", "uint", "hold the token cache in memory up to this size; stream beyond it"},
    {"checkpoint_path", "string", "where the best checkpoint is written"},
    {"results_path", "string", "where metric records are written"},
};

const KeySpec* find_key(const std::string& key) {
  for (const auto& k : kKeys) {
    if (key == k.key) return &k;
  }
  return nullptr;
}

double as_float(const json& v, const std::string& key) {
  if (!v.is_number()) throw ValidationError("config: '" + key + "' must be a number");
  return v.get<double>();
}

std::size_t as_uint(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ValidationError("config: '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ValidationError("config: '" + key + "' must be true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ValidationError("config: '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

json default_flat_config() {
  json flat = json::object();
  flat["seed"] = 0;
  flat["batch_size"] = 2000;
  flat["lr"] = 1e-3;
  flat["weight_decay"] = 1e-4;
  flat["dropout"] = 0.1;
  flat["epochs_max"] = 1000;
  flat["patience"] = 50;
  flat["split.train_frac"] = 0.6;
  flat["split.val_frac"] = 0.2;
  flat["split.test_frac"] = 0.2;
  flat["split.train_file"] = "";
  flat["split.val_file"] = "";
  flat["split.test_file"] = "";
  flat["model.hidden_dim"] = 128;
  flat["model.layers"] = 1;
  flat["model.heads"] = 8;
  flat["model.ffn_hidden"] = 0;
  flat["model.mlp_hidden"] = 128;
  flat["readout.include_hop0_logit"] = false;
  flat["aug.enabled"] = false;
  flat["aug.p_aug"] = 0.5;
  flat["aug.tau"] = 0.5;
  flat["aug.alpha"] = 1.0;
  flat["aug.beta"] = 1.0;
  flat["aug.protect_hop0"] = false;
  flat["tokens.resident_bytes"] = std::size_t{1} << 30;
  flat["checkpoint_path"] = "";
  flat["results_path"] = "";
  return flat;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json flat;
  try {
    in >> flat;
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
  if (!flat.is_object()) throw ValidationError(path + ": config must be a JSON object");
  return flat;
}

void apply_override(json& flat, const std::string& key_eq_value) {
  const auto eq = key_eq_value.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("override must look like key=value, got '" + key_eq_value + "'");
  }
  const std::string key = key_eq_value.substr(0, eq);
  const std::string raw = key_eq_value.substr(eq + 1);
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded() || value.is_object() || value.is_array()) value = raw;
  flat[key] = value;
}

TrainConfig train_config_from_flat(const json& flat) {
  TrainConfig cfg;
  for (const auto& [key, value] : flat.items()) {
    const KeySpec* known = find_key(key);
    if (!known) throw ValidationError("config: unknown key '" + key + "'");
    if (key == "seed") cfg.seed = as_uint(value, key);
    else if (key == "batch_size") cfg.batch_size = as_uint(value, key);
    else if (key == "lr") cfg.lr = as_float(value, key);
    else if (key == "weight_decay") cfg.weight_decay = as_float(value, key);
    else if (key == "dropout") cfg.model.dropout = as_float(value, key);
    else if (key == "epochs_max") cfg.epochs_max = as_uint(value, key);
    else if (key == "patience") cfg.patience = as_uint(value, key);
    else if (key == "split.train_frac") cfg.split.train = as_float(value, key);
    else if (key == "split.val_frac") cfg.split.val = as_float(value, key);
    else if (key == "split.test_frac") cfg.split.test = as_float(value, key);
    else if (key == "split.train_file") cfg.train_index_file = as_string(value, key);
    else if (key == "split.val_file") cfg.val_index_file = as_string(value, key);
    else if (key == "split.test_file") cfg.test_index_file = as_string(value, key);
    else if (key == "model.hidden_dim") cfg.model.hidden_dim = as_uint(value, key);
    else if (key == "model.layers") cfg.model.layers = as_uint(value, key);
    else if (key == "model.heads") cfg.model.heads = as_uint(value, key);
    else if (key == "model.ffn_hidden") cfg.model.ffn_hidden = as_uint(value, key);
    else if (key == "model.mlp_hidden") cfg.model.mlp_hidden = as_uint(value, key);
    else if (key == "readout.include_hop0_logit") cfg.model.include_hop0_logit = as_bool(value, key);
    else if (key == "aug.enabled") cfg.aug.enabled = as_bool(value, key);
    else if (key == "aug.p_aug") cfg.aug.p_aug = as_float(value, key);
    else if (key == "aug.tau") cfg.aug.tau = as_float(value, key);
    else if (key == "aug.alpha") cfg.aug.alpha = as_float(value, key);
    else if (key == "aug.beta") cfg.aug.beta = as_float(value, key);
    else if (key == "aug.protect_hop0") cfg.aug.protect_hop0 = as_bool(value, key);
    else if (key == "tokens.resident_bytes") cfg.token_resident_bytes = as_uint(value, key);
    else if (key == "checkpoint_path") cfg.checkpoint_path = as_string(value, key);
    else if (key == "results_path") cfg.results_path = as_string(value, key);
  }
  return cfg;
}

std::string config_key_help() {
  std::ostringstream os;
  os << "Config keys (flat JSON object; also settable via --set key=value):\n";
  for (const auto& k : kKeys) {
    os << "  " << k.key << " (" << k.type << "): " << k.doc << "\n";
  }
  return os.str();
}

}  // namespace hopformer
