#pragma once

#include "qcdnet/episodes.hpp"
#include "qcdnet/execution.hpp"
#include "qcdnet/scenario.hpp"
#include "qcdnet/stats.hpp"

#include <cstdint>
#include <span>

namespace qcdnet {

/// Fraction of horizon-capped episodes above which an estimate is refused.
inline constexpr double max_horizon_fraction = 0.001;

struct MetricEstimate {
    Detector detector = Detector::nodm;
    double gamma = 0.0;
    Estimate pfa;        // Wilson 95%
    Estimate mean_delay; // t 95%; NODM (U~ - T)1{T~ >= T}, NADM (tau - T)^+
    std::size_t episodes = 0;
    std::size_t false_alarms = 0;
    std::size_t horizon_exceeded = 0;
    std::uint64_t seed = 0;
};

/// Runs `episodes` episodes at threshold gamma. Horizon-capped episodes are
/// left out of both estimates and counted; HorizonExceeded is thrown if
/// they exceed max_horizon_fraction.
MetricEstimate estimate_metrics(Detector d, double gamma, const Scenario &s, std::size_t episodes,
                                std::uint64_t seed, Execution exec = Execution::parallel);

MetricEstimate summarize(Detector d, double gamma, std::span<const NodmRecord> records, std::uint64_t seed);
MetricEstimate summarize(Detector d, double gamma, std::span<const NadmRecord> records, std::uint64_t seed);

struct ThresholdCalibration {
    double gamma = 0.0;
    Estimate pfa;          // false-alarm rate of the calibration sample at gamma
    std::size_t episodes = 0;
    int iterations = 0;
};

/// Empirical false-alarm rate at gamma from per-episode pre-change maxima.
double pfa_from_maxima(std::span<const double> maxima, double gamma);

/// Bisection on gamma with common random numbers: every probe reuses the
/// same episodes, whose pre-change maximum posterior is recorded once, so
/// the probed false-alarm rate is exactly monotone in gamma. Stops when the
/// bracket is narrower than `tol` and returns the smallest bracketed gamma
/// whose false-alarm rate does not exceed alpha. Rejects alpha >= 1 - rho.
ThresholdCalibration calibrate_threshold(Detector d, const Scenario &s, double alpha, std::size_t episodes,
                                         double tol, std::uint64_t seed, Execution exec = Execution::parallel);

ThresholdCalibration calibrate_from_maxima(std::span<const double> maxima, double rho, double alpha, double tol);

} // namespace qcdnet
