#pragma once

#include <string>

#include "tdsim/graph.hpp"

namespace tdsim {

/// A parsed scenario: the component graph plus the simulation settings.
struct Scenario {
  Graph graph;
  SimConfig sim;
};

/// Build a scenario from JSON text. Relative file references inside the
/// scenario (playback tables, star catalogs) resolve against base_dir.
Scenario parse_scenario(const std::string& json_text, const std::string& base_dir = ".");

/// Load and parse a scenario file.
Scenario load_scenario(const std::string& path);

}  // namespace tdsim
