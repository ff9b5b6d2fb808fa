#include "qcdnet/nodm.hpp"

#include "qcdnet/errors.hpp"
#include "qcdnet/simulator.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace qcdnet {

double NodmEpisode::detection_delay() const {
    return false_alarm ? 0.0 : static_cast<double>(U_tilde - change_time);
}

double NodmEpisode::decision_delay() const {
    return false_alarm ? 0.0 : static_cast<double>(T_tilde - change_time);
}

double shiryaev_update(double pi, std::span<const double> batch, double p_r, const ObservationModel &model) {
    if (!(pi >= 0.0 && pi <= 1.0)) {
        throw DomainError("posterior outside [0, 1]: " + std::to_string(pi));
    }
    const double prior = pi + (1.0 - pi) * p_r;
    const double prior_c = (1.0 - pi) * (1.0 - p_r);
    double llr = 0.0;
    for (double x : batch) {
        llr += log_likelihood_ratio(model, x);
    }
    // Posterior odds: prior * exp(llr) / prior_c.
    const double log_inv_odds = std::log(prior_c) - std::log(prior) - llr;
    return 1.0 / (1.0 + std::exp(log_inv_odds));
}

namespace {

void check_gamma(double gamma) {
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw InvalidArgument("threshold must lie in (0, 1], got " + std::to_string(gamma));
    }
}

std::int64_t first_post_change_batch(Slot change_time, int period) {
    return (change_time + period - 1) / period;
}

void finish(NodmEpisode &ep, std::int64_t k_tilde, Slot u_tilde, int period) {
    ep.K_tilde = k_tilde;
    ep.T_tilde = k_tilde * period;
    ep.U_tilde = u_tilde;
    ep.false_alarm = ep.T_tilde < ep.change_time;
}

} // namespace

NodmEpisode run_nodm_episode(const Scenario &s, double gamma, EpisodeStreams &streams) {
    check_gamma(gamma);
    require_stable(s.net);
    const int n = s.net.n_sensors;
    const double p_r = s.p_r();

    JointSimulator sim(s.net, s.change, s.obs, streams);
    NodmEpisode ep;
    ep.change_time = sim.change_time();
    ep.K = first_post_change_batch(ep.change_time, s.net.period);

    double pi = s.change.rho;
    if (pi >= gamma) {
        finish(ep, 0, 0, s.net.period);
        return ep;
    }

    std::vector<double> current;
    std::vector<double> next;
    current.reserve(static_cast<std::size_t>(n));
    next.reserve(static_cast<std::size_t>(n));
    std::int64_t batch = 1;
    while (true) {
        if (sim.queue().slot >= s.horizon_cap) {
            throw HorizonExceeded("NODM episode did not stop within " + std::to_string(s.horizon_cap) + " slots");
        }
        const SlotOutcome &out = sim.step();
        for (const Delivery &d : out.delivered) {
            (d.batch == batch ? current : next).push_back(d.value);
        }
        if (out.batch_completed) {
            if (current.size() != static_cast<std::size_t>(n)) {
                throw StateCorruption("batch completed with " + std::to_string(current.size()) + " of " +
                                      std::to_string(n) + " components");
            }
            pi = shiryaev_update(pi, current, p_r, s.obs);
            if (pi >= gamma) {
                finish(ep, batch, sim.queue().slot, s.net.period);
                return ep;
            }
            current.swap(next);
            next.clear();
            ++batch;
        }
    }
}

NodmEpisode run_nodm_decision_episode(const Scenario &s, double gamma, Rng &nature) {
    check_gamma(gamma);
    const double p_r = s.p_r();
    NatureTrajectory traj{sample_change_time(s.change, nature)};
    NodmEpisode ep;
    ep.change_time = traj.change_time;
    ep.K = first_post_change_batch(ep.change_time, s.net.period);

    double pi = s.change.rho;
    if (pi >= gamma) {
        finish(ep, 0, 0, s.net.period);
        return ep;
    }
    std::vector<double> values(static_cast<std::size_t>(s.net.n_sensors));
    for (std::int64_t b = 1;; ++b) {
        const Slot t_b = b * s.net.period;
        if (t_b > s.horizon_cap) {
            throw HorizonExceeded("NODM decision episode did not stop within " + std::to_string(s.horizon_cap) +
                                  " slots");
        }
        draw_batch(s.obs, traj, t_b, nature, values);
        pi = shiryaev_update(pi, values, p_r, s.obs);
        if (pi >= gamma) {
            finish(ep, b, t_b, s.net.period);
            return ep;
        }
    }
}

double nodm_prechange_max(const Scenario &s, Rng &nature) {
    const double p_r = s.p_r();
    NatureTrajectory traj{sample_change_time(s.change, nature)};
    if (traj.change_time == 0) {
        return -std::numeric_limits<double>::infinity();
    }
    double pi = s.change.rho;
    double best = pi;
    std::vector<double> values(static_cast<std::size_t>(s.net.n_sensors));
    for (std::int64_t b = 1; b * s.net.period < traj.change_time; ++b) {
        draw_batch(s.obs, traj, b * s.net.period, nature, values);
        pi = shiryaev_update(pi, values, p_r, s.obs);
        best = std::max(best, pi);
    }
    return best;
}

double l_of_r(double p, int period) {
    if (!(p > 0.0 && p < 1.0) || period < 1) {
        throw InvalidArgument("l_of_r needs 0 < p < 1 and period >= 1");
    }
    const double p_r = batch_change_prob(p, period);
    return period - (1.0 / p - (1.0 - p_r) * period / p_r);
}

double l_of_r_by_summation(double p, int period) {
    if (!(p > 0.0 && p < 1.0) || period < 1) {
        throw InvalidArgument("l_of_r_by_summation needs 0 < p < 1 and period >= 1");
    }
    const double p_r = batch_change_prob(p, period);
    double total = 0.0;
    for (int y = 0; y < period; ++y) {
        total += y * std::pow(1.0 - p, period - y - 1) * p;
    }
    return total / p_r;
}

double asymptotic_decision_delay(double alpha, int n, double kl, double p_r) {
    if (!(alpha > 0.0 && alpha < 1.0) || kl < 0.0 || n < 1) {
        throw InvalidArgument("asymptotic_decision_delay needs 0 < alpha < 1, kl >= 0, n >= 1");
    }
    return std::abs(std::log(alpha)) / (n * kl + std::abs(std::log1p(-p_r)));
}

DelayDecomposition decompose_detection_delay(std::span<const NodmEpisode> episodes, double d_r,
                                             double d_r_half_width, double l_r, double rho, int period) {
    if (episodes.size() < 2) {
        throw InvalidArgument("decomposition needs at least two episodes");
    }
    RunningStats lhs;
    RunningStats diff;
    RunningStats decision;
    std::size_t alarms = 0;
    for (const NodmEpisode &ep : episodes) {
        const double ok = ep.false_alarm ? 0.0 : 1.0;
        const double excess = static_cast<double>(period) * static_cast<double>(std::max<std::int64_t>(ep.K_tilde - ep.K, 0));
        const double detection = ep.detection_delay();
        lhs.add(detection);
        decision.add(excess);
        diff.add(detection - ((d_r + l_r) * ok - rho * l_r + excess));
        alarms += ep.false_alarm ? 1 : 0;
    }
    DelayDecomposition out;
    out.d_r = d_r;
    out.l_r = l_r;
    out.alpha_hat = static_cast<double>(alarms) / static_cast<double>(episodes.size());
    out.lhs = lhs.mean_ci();
    out.decision_term = decision.mean_ci();
    out.rhs = (d_r + l_r) * (1.0 - out.alpha_hat) - rho * l_r + out.decision_term.value;
    const Estimate d = diff.mean_ci();
    const double d_part = (1.0 - out.alpha_hat) * d_r_half_width;
    out.difference = Estimate{d.value, std::sqrt(d.half_width * d.half_width + d_part * d_part)};
    out.consistent = out.difference.covers(0.0);
    return out;
}

} // namespace qcdnet
