#include "qcdnet/nadm.hpp"

#include "qcdnet/errors.hpp"
#include "qcdnet/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace qcdnet {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
    const double m = std::max(a, b);
    if (m == neg_inf) {
        return neg_inf;
    }
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double log_sum_exp(double a, double b, double c) {
    return log_sum_exp(log_sum_exp(a, b), c);
}

double clamp_psi(double psi) {
    return std::clamp(psi, psi_floor, 1.0);
}

double stay_prob(double p, Slot delta) {
    return std::exp(static_cast<double>(delta) * std::log1p(-p));
}

} // namespace

SufficientStat initial_stat(const NetConfig &net, const ChangeSpec &change) {
    SufficientStat stat;
    stat.queue = initial_state(net);
    stat.pi = change.rho;
    stat.psi = change.rho;
    return stat;
}

double psi_to_pi(double psi, Slot delta, double p) {
    if (delta < 0) {
        throw InvalidArgument("delta must be nonnegative");
    }
    if (delta == 0) {
        return psi;
    }
    return 1.0 - (1.0 - psi) * stay_prob(p, delta);
}

double pi_to_psi(double pi, Slot delta, double p) {
    if (delta < 0) {
        throw InvalidArgument("delta must be nonnegative");
    }
    if (delta == 0) {
        return pi;
    }
    const double stay = stay_prob(p, delta);
    const double floor = 1.0 - stay;
    if (pi < floor - 1e-12) {
        throw DomainError("posterior " + std::to_string(pi) + " below the reachable floor " + std::to_string(floor) +
                          " at delta " + std::to_string(delta));
    }
    return std::clamp(1.0 - (1.0 - pi) / stay, 0.0, 1.0);
}

bool completion_is_clamped(const QueueState &before, int period) {
    return before.delta + 1 < period;
}

Posterior posterior_step(Posterior post, const QueueState &before, const SlotOutcome &outcome,
                         const QueueState &after, const ObservationModel &model, double p, int period) {
    if (after.slot != before.slot + 1) {
        throw OutcomeMismatch("queue states are not consecutive slots");
    }
    Posterior next;
    switch (outcome.event) {
    case SlotEvent::no_delivery: {
        if (!outcome.delivered.empty()) {
            throw OutcomeMismatch("no-delivery slot carries samples");
        }
        next.pi = 1.0 - (1.0 - post.pi) * (1.0 - p);
        next.psi = after.delta == 0 ? next.pi : post.psi;
        return next;
    }
    case SlotEvent::partial: {
        if (outcome.delivered.size() != 1 || outcome.delivered.front().batch != before.batch) {
            throw OutcomeMismatch("partial delivery must carry one sample of batch " + std::to_string(before.batch));
        }
        const double y = outcome.delivered.front().value;
        const double a = std::log(post.psi) + log_likelihood(model, 1, y);
        const double b = std::log1p(-post.psi) + log_likelihood(model, 0, y);
        next.psi = clamp_psi(std::exp(a - log_sum_exp(a, b)));
        next.pi = psi_to_pi(next.psi, after.delta, p);
        return next;
    }
    case SlotEvent::completion: {
        if (outcome.delivered.empty() || outcome.delivered.front().batch != before.batch) {
            throw OutcomeMismatch("completion must start with a sample of batch " + std::to_string(before.batch));
        }
        const double y0 = outcome.delivered.front().value;
        double hol_f1 = 0.0;
        double hol_f0 = 0.0;
        for (std::size_t i = 1; i < outcome.delivered.size(); ++i) {
            if (outcome.delivered[i].batch != before.batch + 1) {
                throw OutcomeMismatch("released sequencer sample is not from the next batch");
            }
            hol_f1 += log_likelihood(model, 1, outcome.delivered[i].value);
            hol_f0 += log_likelihood(model, 0, outcome.delivered[i].value);
        }
        // Hazard up to the next sampling instant, or only up to the next
        // slot when the system drains before that instant.
        const Slot gap = std::min<Slot>(period, before.delta + 1);
        const double log_pg = std::log(-std::expm1(static_cast<double>(gap) * std::log1p(-p)));
        const double log_qg = static_cast<double>(gap) * std::log1p(-p);
        const double log_psi = std::log(post.psi);
        const double log_psi_c = std::log1p(-post.psi);
        const double l0 = log_likelihood(model, 0, y0);
        const double l1 = log_likelihood(model, 1, y0);
        const double t_between = log_psi_c + log_pg + l0 + hol_f1;
        const double t_before = log_psi + l1 + hol_f1;
        const double t_after = log_psi_c + log_qg + l0 + hol_f0;
        next.psi = clamp_psi(std::exp(log_sum_exp(t_between, t_before) - log_sum_exp(t_between, t_before, t_after)));
        next.pi = psi_to_pi(next.psi, after.delta, p);
        if (after.delta == 0) {
            next.psi = next.pi;
        }
        return next;
    }
    }
    throw OutcomeMismatch("unknown slot event");
}

SufficientStat update(const SufficientStat &stat, const SlotOutcome &outcome, const QueueState &next_queue,
                      const ObservationModel &model, double p, int period) {
    if (stat.stopped) {
        return stat;
    }
    if (outcome.event != SlotEvent::no_delivery && stat.queue.delta == 0 &&
        !(stat.queue.lambda == period && stat.queue.slot > 0)) {
        throw OutcomeMismatch("delivery reported while no batch is outstanding");
    }
    const Posterior post = posterior_step({stat.pi, stat.psi}, stat.queue, outcome, next_queue, model, p, period);
    SufficientStat next;
    next.queue = next_queue;
    next.pi = post.pi;
    next.psi = post.psi;
    return next;
}

namespace {

struct NadmRunner {
    const Scenario &s;
    JointSimulator sim;
    Posterior post;
    QueueState before;
    NadmEpisode counts;

    NadmRunner(const Scenario &scenario, EpisodeStreams &streams)
        : s(scenario), sim(scenario.net, scenario.change, scenario.obs, streams),
          post{scenario.change.rho, scenario.change.rho} {
        counts.change_time = sim.change_time();
    }

    void step() {
        before = sim.queue();
        const SlotOutcome &out = sim.step();
        switch (out.event) {
        case SlotEvent::no_delivery:
            ++counts.no_delivery_slots;
            break;
        case SlotEvent::partial:
            ++counts.partial_slots;
            break;
        case SlotEvent::completion:
            ++counts.completion_slots;
            counts.clamped_completions += completion_is_clamped(before, s.net.period) ? 1 : 0;
            break;
        }
        post = posterior_step(post, before, out, sim.queue(), s.obs, s.change.p, s.net.period);
    }
};

} // namespace

NadmEpisode run_nadm_episode(const Scenario &s, double gamma, EpisodeStreams &streams) {
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw InvalidArgument("threshold must lie in (0, 1], got " + std::to_string(gamma));
    }
    require_stable(s.net);
    NadmRunner run(s, streams);
    while (run.post.pi < gamma) {
        if (run.sim.queue().slot >= s.horizon_cap) {
            throw HorizonExceeded("NADM episode did not stop within " + std::to_string(s.horizon_cap) + " slots");
        }
        run.step();
    }
    NadmEpisode ep = run.counts;
    ep.tau = run.sim.queue().slot;
    ep.false_alarm = ep.tau < ep.change_time;
    ep.delay = std::max<Slot>(ep.tau - ep.change_time, 0);
    return ep;
}

double nadm_prechange_max(const Scenario &s, EpisodeStreams &streams) {
    require_stable(s.net);
    NadmRunner run(s, streams);
    const Slot t = run.sim.change_time();
    if (t == 0) {
        return neg_inf;
    }
    double best = run.post.pi;
    while (run.sim.queue().slot + 1 < t) {
        run.step();
        best = std::max(best, run.post.pi);
    }
    return best;
}

std::vector<double> nadm_posterior_path(const Scenario &s, Slot horizon, EpisodeStreams &streams) {
    NadmRunner run(s, streams);
    std::vector<double> path;
    path.reserve(static_cast<std::size_t>(horizon) + 1);
    path.push_back(run.post.pi);
    for (Slot k = 0; k < horizon; ++k) {
        run.step();
        path.push_back(run.post.pi);
    }
    return path;
}

ConsistencyReport verify_sufficient_stat_consistency(const Scenario &s, Slot horizon, std::size_t episodes,
                                                     std::uint64_t seed, int n_buckets, double z,
                                                     std::size_t min_visits, Execution exec) {
    if (n_buckets < 1 || episodes < 2 || horizon < 1) {
        throw InvalidArgument("consistency check needs buckets >= 1, episodes >= 2, horizon >= 1");
    }
    const auto nb = static_cast<std::size_t>(n_buckets);
    struct Cell {
        std::size_t visits = 0;
        double psi_sum = 0.0;
        double hit_sum = 0.0;
    };
    std::vector<std::vector<Cell>> per_episode(episodes, std::vector<Cell>(nb));
    std::vector<double> prior_error(episodes, 0.0);

    for_each_index(episodes, exec, [&](std::size_t e) {
        EpisodeStreams streams = EpisodeStreams::for_episode(seed, e);
        NadmRunner run(s, streams);
        const Slot t = run.sim.change_time();
        bool delivered_any = false;
        for (Slot k = 0; k <= horizon; ++k) {
            if (k > 0) {
                run.step();
                delivered_any = delivered_any || run.counts.partial_slots + run.counts.completion_slots > 0;
            }
            const QueueState &q = run.sim.queue();
            if (!delivered_any) {
                const double closed = 1.0 - (1.0 - s.change.rho) * std::pow(1.0 - s.change.p, static_cast<double>(k));
                prior_error[e] = std::max(prior_error[e], std::abs(run.post.pi - closed));
            }
            const double psi = run.post.psi;
            const auto b = std::min(nb - 1, static_cast<std::size_t>(psi * static_cast<double>(nb)));
            Cell &c = per_episode[e][b];
            ++c.visits;
            c.psi_sum += psi;
            c.hit_sum += t <= q.slot - q.delta ? 1.0 : 0.0;
        }
    });

    ConsistencyReport report;
    report.z = z;
    report.max_prior_error = *std::max_element(prior_error.begin(), prior_error.end());
    report.passed = report.max_prior_error <= 1e-9;
    for (std::size_t b = 0; b < nb; ++b) {
        PsiBucket bucket;
        bucket.lower = static_cast<double>(b) / static_cast<double>(nb);
        bucket.upper = static_cast<double>(b + 1) / static_cast<double>(nb);
        double psi_sum = 0.0;
        double hit_sum = 0.0;
        for (const auto &cells : per_episode) {
            bucket.visits += cells[b].visits;
            psi_sum += cells[b].psi_sum;
            hit_sum += cells[b].hit_sum;
        }
        if (bucket.visits == 0) {
            report.buckets.push_back(bucket);
            continue;
        }
        const double n = static_cast<double>(bucket.visits);
        bucket.mean_psi = psi_sum / n;
        bucket.change_frequency = hit_sum / n;
        const double gap = bucket.change_frequency - bucket.mean_psi;
        // Ratio-estimator variance with episodes as clusters.
        double ss = 0.0;
        for (const auto &cells : per_episode) {
            const double r = cells[b].hit_sum - cells[b].psi_sum - gap * static_cast<double>(cells[b].visits);
            ss += r * r;
        }
        const double m = static_cast<double>(episodes);
        bucket.gap_std_error = std::sqrt(ss * m / (m - 1.0)) / n;
        if (bucket.visits >= min_visits) {
            bucket.consistent = std::abs(gap) <= z * bucket.gap_std_error + 1e-12;
            report.passed = report.passed && bucket.consistent;
        }
        report.buckets.push_back(bucket);
    }
    return report;
}

} // namespace qcdnet
