#pragma once

#include "qcdnet/execution.hpp"
#include "qcdnet/nadm.hpp"
#include "qcdnet/nodm.hpp"
#include "qcdnet/scenario.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace qcdnet {

enum class Detector { nodm, nadm };

std::string_view to_string(Detector d);

struct NodmRecord {
    NodmEpisode episode;
    bool horizon_exceeded = false;
};

struct NadmRecord {
    NadmEpisode episode;
    bool horizon_exceeded = false;
};

/// Episode i uses EpisodeStreams::for_episode(seed, i) in both execution
/// modes, so the serial and parallel results are identical.
std::vector<NodmRecord> run_nodm_episodes(const Scenario &s, double gamma, std::size_t count, std::uint64_t seed,
                                          Execution exec = Execution::parallel);

/// NODM without the network (U_tilde = T_tilde).
std::vector<NodmRecord> run_nodm_decision_episodes(const Scenario &s, double gamma, std::size_t count,
                                                   std::uint64_t seed, Execution exec = Execution::parallel);

std::vector<NadmRecord> run_nadm_episodes(const Scenario &s, double gamma, std::size_t count, std::uint64_t seed,
                                          Execution exec = Execution::parallel);

/// Per-episode pre-change maximum posterior of the detector.
std::vector<double> prechange_maxima(Detector d, const Scenario &s, std::size_t count, std::uint64_t seed,
                                     Execution exec = Execution::parallel);

} // namespace qcdnet
