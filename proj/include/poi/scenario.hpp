#pragma once

#include <string>

#include "poi/simnet.hpp"

namespace poi {

//! Parse a scenario document (JSON object) into a SimConfig. Every key is
//! optional and defaults to the SimConfig default; unknown or mistyped keys
//! raise std::runtime_error naming the key. Times in the file are
//! milliseconds.
SimConfig scenario_from_json(const std::string& text);

//! Read and parse a scenario file; errors mention the path.
SimConfig load_scenario_file(const std::string& path);

//! Canonical JSON echo of a config: parsing it back yields the same config.
std::string scenario_to_json(const SimConfig& config, int indent = 2);

}  // namespace poi
