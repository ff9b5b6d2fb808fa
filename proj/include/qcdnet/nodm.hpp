#pragma once

#include "qcdnet/change_model.hpp"
#include "qcdnet/random.hpp"
#include "qcdnet/scenario.hpp"
#include "qcdnet/stats.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace qcdnet {

/// Shiryaev posterior over complete batches.
struct NodmState {
    double pi = 0.0;
    std::int64_t batches_processed = 0;
};

struct NodmEpisode {
    Slot change_time = 0;     // T
    std::int64_t K = 0;       // first batch sampled at or after T
    std::int64_t K_tilde = 0; // stopping batch
    Slot T_tilde = 0;         // K_tilde * period
    Slot U_tilde = 0;         // slot at which batch K_tilde is complete at the fusion center
    bool false_alarm = false; // T_tilde < T

    /// (U_tilde - T) 1{T_tilde >= T}
    double detection_delay() const;
    /// (T_tilde - T) 1{T_tilde >= T}
    double decision_delay() const;
};

/// One prior step pi + (1 - pi) p_r followed by Bayes' rule with the N
/// conditionally independent samples of a batch, in the log domain.
double shiryaev_update(double pi, std::span<const double> batch, double p_r, const ObservationModel &model);

/// NODM with the queueing network in the loop: the posterior is updated
/// when a batch completes and the episode stops at the first completion
/// with pi >= gamma.
NodmEpisode run_nodm_episode(const Scenario &s, double gamma, EpisodeStreams &streams);

/// Same stopping batch without the network: every batch is processed at
/// its sampling instant, so U_tilde = T_tilde. Uses only the nature stream.
NodmEpisode run_nodm_decision_episode(const Scenario &s, double gamma, Rng &nature);

/// Largest posterior over batches sampled strictly before T, including the
/// prior rho at time 0. The episode raises a false alarm at threshold gamma
/// iff this value is >= gamma. Returns -infinity when T = 0.
double nodm_prechange_max(const Scenario &s, Rng &nature);

/// Expected slots from the change to the next sampling instant given
/// T >= 1: period - (1/p - (1 - p_r) period / p_r).
double l_of_r(double p, int period);

/// The defining sum of l_of_r, evaluated term by term.
double l_of_r_by_summation(double p, int period);

/// |ln alpha| / (N I(f1, f0) + |ln(1 - p_r)|), in batches.
double asymptotic_decision_delay(double alpha, int n, double kl, double p_r);

struct DelayDecomposition {
    Estimate lhs;                 // mean (U~ - T) 1{T~ >= T}
    double rhs = 0.0;             // (d + l)(1 - alpha) - rho l + period E[(K~ - K)^+]
    Estimate difference;          // per-episode lhs - rhs terms, CI includes the d(r) error
    double d_r = 0.0;
    double l_r = 0.0;
    double alpha_hat = 0.0;
    Estimate decision_term;       // period * E[(K~ - K)^+]
    bool consistent = false;      // difference CI covers 0
};

/// Empirical check of the NODM delay decomposition. `d_r` is the simulated
/// mean batch sojourn with 95% half-width `d_r_half_width`; the empirical
/// false-alarm rate of `episodes` plays the role of alpha.
DelayDecomposition decompose_detection_delay(std::span<const NodmEpisode> episodes, double d_r,
                                             double d_r_half_width, double l_r, double rho, int period);

} // namespace qcdnet
