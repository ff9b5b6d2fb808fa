#pragma once

#include "qcdnet/change_model.hpp"
#include "qcdnet/network.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace qcdnet {

/// Every parameter of one experiment. One JSON file maps onto one Scenario.
struct Scenario {
    NetConfig net;
    ChangeSpec change;
    ObservationModel obs;
    double alpha = 0.01;
    double cost_c = 0.01;
    Slot horizon_cap = 1'000'000;
    std::uint64_t seed = 1;
    std::size_t episodes = 20'000;
    std::size_t calibration_episodes = 10'000;
    SojournOptions sojourn;

    /// Throws InvalidArgument on any out-of-range field. Stability is checked
    /// separately so that the instability demo can still load a file.
    void validate() const;

    double p_r() const { return batch_change_prob(change.p, net.period); }
};

/// Reference study: N = 10, period 34, sigma 0.3636, p = 0.0005, N(0,1) vs N(1,1).
Scenario reference_scenario();

/// Parses a scenario from JSON text. Unknown keys and type mismatches raise
/// ConfigError naming the offending field; syntax errors carry the byte
/// offset and line reported by the parser.
Scenario parse_scenario(const std::string &json_text);
Scenario load_scenario(const std::string &path);

std::string scenario_to_json(const Scenario &s);

} // namespace qcdnet
