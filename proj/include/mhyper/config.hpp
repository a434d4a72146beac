#pragma once

// Plain `key = value` config files. Blank lines and lines starting with '#'
// are ignored; any unknown key is an error. The full key set is documented in
// the README.

#include <map>
#include <string>

#include "mhyper/train.hpp"

namespace mhyper {

TrainConfig parse_config_text(const std::string& text, const std::string& origin);
TrainConfig load_config(const std::string& path);

// The effective configuration as ordered key/value pairs (for the manifest
// snapshot and for writing configs back out).
std::map<std::string, std::string> config_snapshot(const TrainConfig& cfg);

} // namespace mhyper
