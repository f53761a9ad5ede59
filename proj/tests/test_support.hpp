#pragma once

#include <string>

#include "gicshield/network.hpp"

namespace testsupport {

inline std::string data_path(const std::string& name) {
  return std::string(GICSHIELD_DATA_DIR) + "/" + name;
}

inline gicshield::AcNetwork load_case5() {
  return gicshield::load_network(data_path("case5_synth.json"));
}

inline gicshield::AcNetwork load_case12() {
  return gicshield::load_network(data_path("case12_synth.json"));
}

// Minimal two-bus network with one line and no substations; used by the
// xi-projection and zero-transformer tests. The line runs 100 km due east.
inline std::string two_bus_json() {
  return R"({
    "name": "two_bus",
    "buses": [
      { "id": 1, "vr_min": 0.9, "vr_max": 1.1, "vi_min": -0.4, "vi_max": 0.4,
        "p_demand": 0.0, "q_demand": 0.0, "latitude": 0.0, "longitude": 0.0 },
      { "id": 2, "vr_min": 0.9, "vr_max": 1.1, "vi_min": -0.4, "vi_max": 0.4,
        "p_demand": 0.5, "q_demand": 0.1, "latitude": 0.0, "longitude": 0.899321605 }
    ],
    "generators": [
      { "id": 1, "bus": 1, "c1": 10.0, "c2": 0.2, "p_min": 0.0, "p_max": 2.0,
        "q_min": -1.0, "q_max": 1.0 }
    ],
    "branches": [
      { "id": 1, "from": 1, "to": 2, "g": 0.8734, "b": -6.5502, "b_charge": 0.02,
        "s_max": 2.0, "theta_min_deg": -30.0, "theta_max_deg": 30.0, "kind": "line" }
    ],
    "transformers": [],
    "substations": [],
    "dc_edges": [
      { "id": 11, "from_node": 1, "to_node": 2, "gamma": 1.0, "source_branch": 1,
        "winding": false }
    ]
  })";
}

} // namespace testsupport
