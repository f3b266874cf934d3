#pragma once

#include <map>
#include <string>

#include "senet/losses.hpp"
#include "senet/model.hpp"

namespace senet {

/// Flat `key = value` text with '#' comments; keys are unique, emission is
/// sorted and deterministic.
using KvMap = std::map<std::string, std::string>;

KvMap parse_kv_text(const std::string& text);
KvMap load_kv_file(const std::string& path);
std::string kv_to_text(const KvMap& kv);

// config <-> key/value bridges (namespaced keys: model.*, loss.*)

KvMap model_config_kv(const ModelConfig& cfg);
ModelConfig model_config_from_kv(const KvMap& kv);
KvMap loss_config_kv(const LossConfig& cfg);
LossConfig loss_config_from_kv(const KvMap& kv);

std::string format_double(double v);  // shortest round-trip decimal
double parse_double(const std::string& s);
std::int64_t parse_int(const std::string& s);
bool parse_bool(const std::string& s);

}  // namespace senet
