#include "qcdnet/calibration.hpp"

#include "qcdnet/errors.hpp"

#include <string>

namespace qcdnet {

namespace {

template <class Record, class Delay>
MetricEstimate summarize_records(Detector d, double gamma, std::span<const Record> records, std::uint64_t seed,
                                 Delay delay_of) {
    MetricEstimate m;
    m.detector = d;
    m.gamma = gamma;
    m.seed = seed;
    RunningStats delay;
    for (const Record &r : records) {
        if (r.horizon_exceeded) {
            ++m.horizon_exceeded;
            continue;
        }
        m.false_alarms += r.episode.false_alarm ? 1 : 0;
        delay.add(delay_of(r.episode));
    }
    m.episodes = delay.count();
    if (static_cast<double>(m.horizon_exceeded) > max_horizon_fraction * static_cast<double>(records.size())) {
        throw HorizonExceeded(std::to_string(m.horizon_exceeded) + " of " + std::to_string(records.size()) + " " +
                              std::string(to_string(d)) + " episodes hit the horizon cap");
    }
    if (m.episodes < 2) {
        throw InvalidArgument("need at least two completed episodes");
    }
    m.pfa = wilson_interval(m.false_alarms, m.episodes);
    m.mean_delay = delay.mean_ci();
    return m;
}

} // namespace

MetricEstimate summarize(Detector d, double gamma, std::span<const NodmRecord> records, std::uint64_t seed) {
    return summarize_records(d, gamma, records, seed, [](const NodmEpisode &e) { return e.detection_delay(); });
}

MetricEstimate summarize(Detector d, double gamma, std::span<const NadmRecord> records, std::uint64_t seed) {
    return summarize_records(d, gamma, records, seed,
                             [](const NadmEpisode &e) { return static_cast<double>(e.delay); });
}

MetricEstimate estimate_metrics(Detector d, double gamma, const Scenario &s, std::size_t episodes,
                                std::uint64_t seed, Execution exec) {
    s.validate();
    if (d == Detector::nodm) {
        const auto records = run_nodm_episodes(s, gamma, episodes, seed, exec);
        return summarize(d, gamma, std::span<const NodmRecord>(records), seed);
    }
    const auto records = run_nadm_episodes(s, gamma, episodes, seed, exec);
    return summarize(d, gamma, std::span<const NadmRecord>(records), seed);
}

double pfa_from_maxima(std::span<const double> maxima, double gamma) {
    std::size_t alarms = 0;
    for (double m : maxima) {
        alarms += m >= gamma ? 1 : 0;
    }
    return static_cast<double>(alarms) / static_cast<double>(maxima.size());
}

ThresholdCalibration calibrate_from_maxima(std::span<const double> maxima, double rho, double alpha, double tol) {
    if (!(alpha > 0.0) || alpha >= 1.0 - rho) {
        throw InvalidArgument("alpha must lie in (0, 1 - rho); for alpha >= 1 - rho stopping at time 0 is optimal");
    }
    if (maxima.empty() || !(tol > 0.0)) {
        throw InvalidArgument("calibration needs episodes and a positive tolerance");
    }
    double lo = 0.0;
    double hi = 1.0;
    if (pfa_from_maxima(maxima, hi) > alpha) {
        throw NonConvergence("false-alarm rate exceeds alpha even at threshold 1");
    }
    ThresholdCalibration cal;
    cal.episodes = maxima.size();
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (pfa_from_maxima(maxima, mid) <= alpha) {
            hi = mid;
        } else {
            lo = mid;
        }
        ++cal.iterations;
    }
    std::size_t alarms = 0;
    for (double m : maxima) {
        alarms += m >= hi ? 1 : 0;
    }
    cal.gamma = hi;
    cal.pfa = wilson_interval(alarms, maxima.size());
    return cal;
}

ThresholdCalibration calibrate_threshold(Detector d, const Scenario &s, double alpha, std::size_t episodes,
                                         double tol, std::uint64_t seed, Execution exec) {
    if (!(alpha > 0.0) || alpha >= 1.0 - s.change.rho) {
        throw InvalidArgument("alpha must lie in (0, 1 - rho); for alpha >= 1 - rho stopping at time 0 is optimal");
    }
    if (d == Detector::nadm) {
        require_stable(s.net);
    }
    const auto maxima = prechange_maxima(d, s, episodes, seed, exec);
    return calibrate_from_maxima(maxima, s.change.rho, alpha, tol);
}

} // namespace qcdnet
