#include "qcdnet/episodes.hpp"

#include "qcdnet/errors.hpp"

#include <omp.h>

namespace qcdnet {

int worker_threads() {
    return omp_get_max_threads();
}

std::string_view to_string(Detector d) {
    return d == Detector::nodm ? "NODM" : "NADM";
}

std::vector<NodmRecord> run_nodm_episodes(const Scenario &s, double gamma, std::size_t count, std::uint64_t seed,
                                          Execution exec) {
    require_stable(s.net);
    std::vector<NodmRecord> out(count);
    for_each_index(count, exec, [&](std::size_t i) {
        EpisodeStreams streams = EpisodeStreams::for_episode(seed, i);
        try {
            out[i].episode = run_nodm_episode(s, gamma, streams);
        } catch (const HorizonExceeded &) {
            out[i].horizon_exceeded = true;
        }
    });
    return out;
}

std::vector<NodmRecord> run_nodm_decision_episodes(const Scenario &s, double gamma, std::size_t count,
                                                   std::uint64_t seed, Execution exec) {
    std::vector<NodmRecord> out(count);
    for_each_index(count, exec, [&](std::size_t i) {
        EpisodeStreams streams = EpisodeStreams::for_episode(seed, i);
        try {
            out[i].episode = run_nodm_decision_episode(s, gamma, streams.nature);
        } catch (const HorizonExceeded &) {
            out[i].horizon_exceeded = true;
        }
    });
    return out;
}

std::vector<NadmRecord> run_nadm_episodes(const Scenario &s, double gamma, std::size_t count, std::uint64_t seed,
                                          Execution exec) {
    require_stable(s.net);
    std::vector<NadmRecord> out(count);
    for_each_index(count, exec, [&](std::size_t i) {
        EpisodeStreams streams = EpisodeStreams::for_episode(seed, i);
        try {
            out[i].episode = run_nadm_episode(s, gamma, streams);
        } catch (const HorizonExceeded &) {
            out[i].horizon_exceeded = true;
        }
    });
    return out;
}

std::vector<double> prechange_maxima(Detector d, const Scenario &s, std::size_t count, std::uint64_t seed,
                                     Execution exec) {
    std::vector<double> out(count);
    for_each_index(count, exec, [&](std::size_t i) {
        EpisodeStreams streams = EpisodeStreams::for_episode(seed, i);
        out[i] = d == Detector::nodm ? nodm_prechange_max(s, streams.nature) : nadm_prechange_max(s, streams);
    });
    return out;
}

} // namespace qcdnet
