#pragma once

#include "qcdnet/change_model.hpp"
#include "qcdnet/execution.hpp"
#include "qcdnet/network.hpp"
#include "qcdnet/random.hpp"
#include "qcdnet/scenario.hpp"

#include <cstdint>
#include <vector>

namespace qcdnet {

/// Lower clamp applied to psi after every update.
inline constexpr double psi_floor = 1e-300;

/// Decision state of the network-aware detector: the queue state, the
/// posterior pi of {T <= k} and psi, the posterior of a change by the
/// sampling instant of the batch in service (equal to pi when delta = 0).
struct SufficientStat {
    QueueState queue;
    double pi = 0.0;
    double psi = 0.0;
    bool stopped = false;
};

SufficientStat initial_stat(const NetConfig &net, const ChangeSpec &change);

/// pi = psi + (1 - psi)(1 - (1 - p)^delta)
double psi_to_pi(double psi, Slot delta, double p);

/// Inverse of psi_to_pi. Throws DomainError if pi lies below the floor
/// 1 - (1 - p)^delta by more than rounding.
double pi_to_psi(double pi, Slot delta, double p);

/// True when a completion in the current slot drains the system before
/// the next batch is sampled, so the posterior of the next batch's
/// sampling instant cannot be formed yet.
bool completion_is_clamped(const QueueState &before, int period);

struct Posterior {
    double pi = 0.0;
    double psi = 0.0;
};

/// Posterior recursion for one slot. `before` and `after` are the queue
/// states around network advance() and `outcome` its result.
Posterior posterior_step(Posterior post, const QueueState &before, const SlotOutcome &outcome,
                         const QueueState &after, const ObservationModel &model, double p, int period);

/// Pure form: returns the statistic of the next slot. A stopped statistic
/// is returned unchanged. Throws OutcomeMismatch when the outcome does not
/// belong to stat.queue.
SufficientStat update(const SufficientStat &stat, const SlotOutcome &outcome, const QueueState &next_queue,
                      const ObservationModel &model, double p, int period);

struct NadmEpisode {
    Slot change_time = 0;
    Slot tau = 0;
    bool false_alarm = false;
    Slot delay = 0; // (tau - T)^+
    std::int64_t no_delivery_slots = 0;
    std::int64_t partial_slots = 0;
    std::int64_t completion_slots = 0;
    std::int64_t clamped_completions = 0;
};

/// tau = first k >= 0 with pi_k >= gamma.
NadmEpisode run_nadm_episode(const Scenario &s, double gamma, EpisodeStreams &streams);

/// max_{k < T} pi_k, or -infinity when T = 0. The episode raises a false
/// alarm at threshold gamma iff this value is >= gamma.
double nadm_prechange_max(const Scenario &s, EpisodeStreams &streams);

/// Records pi_k for k = 0..horizon of one episode without stopping. Used by
/// the exact uninformative-model check.
std::vector<double> nadm_posterior_path(const Scenario &s, Slot horizon, EpisodeStreams &streams);

struct PsiBucket {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t visits = 0;
    double mean_psi = 0.0;
    double change_frequency = 0.0;
    double gap_std_error = 0.0; // clustered by episode
    bool consistent = true;
};

struct ConsistencyReport {
    std::vector<PsiBucket> buckets;
    double z = 0.0;
    double max_prior_error = 0.0; // |pi_k - (1 - (1 - rho)(1 - p)^k)| before the first delivery
    bool passed = false;
};

/// Calibration of psi against ground truth: over `episodes` runs of
/// `horizon` slots without stopping, the frequency of {T <= k - delta_k}
/// within each psi bucket must match the bucket's mean psi within z
/// episode-clustered standard errors. Buckets with fewer than
/// `min_visits` visits are reported but not tested.
ConsistencyReport verify_sufficient_stat_consistency(const Scenario &s, Slot horizon, std::size_t episodes,
                                                     std::uint64_t seed, int n_buckets = 10, double z = 3.29,
                                                     std::size_t min_visits = 200,
                                                     Execution exec = Execution::parallel);

} // namespace qcdnet
