#include "qcdnet/episodes.hpp"
#include "qcdnet/errors.hpp"
#include "qcdnet/nadm.hpp"
#include "qcdnet/scenario.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace qcdnet;

namespace {

const ObservationModel unit_shift = ObservationModel::gaussian(0.0, 1.0, 1.0, 1.0);

QueueState queue_at(Slot slot, std::int64_t batch, int period, int n) {
    QueueState q;
    q.slot = slot;
    q.batch = batch;
    q.lambda = lambda_at(slot, period);
    q.delta = std::max<Slot>(slot - batch * period, 0);
    q.seq_queue.assign(static_cast<std::size_t>(n), 0);
    q.received.assign(static_cast<std::size_t>(n), 0);
    return q;
}

SlotOutcome outcome(SlotEvent e, std::vector<Delivery> d) {
    SlotOutcome o;
    o.event = e;
    o.success_node = d.empty() ? 0 : d.front().node;
    o.delivered = std::move(d);
    o.batch_completed = e == SlotEvent::completion;
    return o;
}

double normal_pdf(double mean, double x) {
    return std::exp(-0.5 * (x - mean) * (x - mean)) / std::sqrt(2.0 * std::numbers::pi);
}

Scenario small_scenario() {
    Scenario s = reference_scenario();
    s.net = {2, 6, 0.6};
    s.change = {0.05, 0.02};
    return s;
}

} // namespace

TEST(PsiPi, Examples) {
    EXPECT_EQ(psi_to_pi(1.0, 7, 0.2), 1.0);
    EXPECT_EQ(psi_to_pi(0.3, 0, 0.2), 0.3);
    EXPECT_NEAR(psi_to_pi(0.5, 1, 0.1), 0.55, 1e-15);
    EXPECT_NEAR(pi_to_psi(0.55, 1, 0.1), 0.5, 1e-15);
    EXPECT_EQ(pi_to_psi(1.0, 9, 0.3), 1.0);
    EXPECT_THROW(pi_to_psi(0.05, 1, 0.1), DomainError);
    EXPECT_THROW(psi_to_pi(0.5, -1, 0.1), InvalidArgument);
}

TEST(PsiPi, RoundTripAndRange) {
    Rng rng(1);
    for (int i = 0; i < 20000; ++i) {
        const double psi = uniform01(rng);
        const Slot delta = static_cast<Slot>(uniform01(rng) * 46);
        const double p = std::exp(std::log(1e-4) + uniform01(rng) * (std::log(0.05) - std::log(1e-4)));
        const double pi = psi_to_pi(psi, delta, p);
        EXPECT_GE(pi, psi);
        EXPECT_LE(pi, 1.0);
        EXPECT_NEAR(pi_to_psi(pi, delta, p), psi, 1e-12) << psi << " " << delta << " " << p;
    }
}

TEST(PosteriorStep, NoDeliveryDrift) {
    const QueueState before = queue_at(3, 1, 4, 2);
    const QueueState after = queue_at(4, 1, 4, 2);
    const Posterior next = posterior_step({0.2, 0.2}, before, outcome(SlotEvent::no_delivery, {}), after,
                                          unit_shift, 0.1, 4);
    EXPECT_NEAR(next.pi, 0.28, 1e-15);
    EXPECT_EQ(next.psi, next.pi);

    // While a batch is outstanding psi is frozen.
    const QueueState busy = queue_at(6, 1, 4, 2);
    const QueueState busy_next = queue_at(7, 1, 4, 2);
    const Posterior held = posterior_step({0.4, 0.3}, busy, outcome(SlotEvent::no_delivery, {}), busy_next,
                                          unit_shift, 0.1, 4);
    EXPECT_NEAR(held.pi, 0.46, 1e-15);
    EXPECT_EQ(held.psi, 0.3);

    Rng rng(2);
    for (int i = 0; i < 1000; ++i) {
        const double pi = uniform01(rng);
        const Posterior n = posterior_step({pi, pi}, before, outcome(SlotEvent::no_delivery, {}), after, unit_shift,
                                           0.01, 4);
        EXPECT_GT(n.pi, pi);
    }
    EXPECT_EQ(posterior_step({1.0, 1.0}, before, outcome(SlotEvent::no_delivery, {}), after, unit_shift, 0.01, 4).pi,
              1.0);
}

TEST(PosteriorStep, PartialDelivery) {
    // Batch 1 of period 4 in service at slot 5 (delta 1).
    const QueueState before = queue_at(5, 1, 4, 2);
    const QueueState after = queue_at(6, 1, 4, 2);
    const auto out = outcome(SlotEvent::partial, {{1, 1, 1.0}});
    const Posterior next = posterior_step({psi_to_pi(0.5, 1, 0.1), 0.5}, before, out, after, unit_shift, 0.1, 4);
    const double expected = std::exp(0.5) / (1.0 + std::exp(0.5));
    EXPECT_NEAR(next.psi, expected, 1e-14);
    EXPECT_NEAR(expected, 0.6225, 5e-5);
    EXPECT_NEAR(next.pi, psi_to_pi(expected, 2, 0.1), 1e-14);

    const auto flat = ObservationModel::gaussian(0.0, 1.0, 0.0, 1.0);
    const Posterior same = posterior_step({0.6, 0.37}, before, out, after, flat, 0.1, 4);
    EXPECT_NEAR(same.psi, 0.37, 1e-15);

    EXPECT_EQ(posterior_step({1.0, 1.0}, before, out, after, unit_shift, 0.1, 4).psi, 1.0);
    EXPECT_THROW(posterior_step({0.5, 0.5}, before, outcome(SlotEvent::partial, {{1, 2, 0.0}}), after, unit_shift,
                                0.1, 4),
                 OutcomeMismatch);
}

TEST(PosteriorStep, CompletionMatchesDirectDensities) {
    Rng rng(3);
    const double p = 0.03;
    const int period = 4;
    for (int trial = 0; trial < 2000; ++trial) {
        const Slot delta = 1 + static_cast<Slot>(uniform01(rng) * 10);
        const QueueState before = queue_at(period + delta, 1, period, 3);
        const QueueState after = queue_at(period + delta + 1, 2, period, 3);
        const int n_hol = delta >= period ? static_cast<int>(uniform01(rng) * 3) : 0;
        const double psi = 0.02 + 0.96 * uniform01(rng);
        std::vector<Delivery> d{{1, 1, 4.0 * uniform01(rng) - 1.5}};
        for (int i = 0; i < n_hol; ++i) {
            d.push_back({2 + i, 2, 4.0 * uniform01(rng) - 1.5});
        }
        const Posterior next =
            posterior_step({psi_to_pi(psi, delta, p), psi}, before, outcome(SlotEvent::completion, d), after,
                           unit_shift, p, period);

        const double g = static_cast<double>(std::min<Slot>(period, delta + 1));
        const double pg = 1.0 - std::pow(1.0 - p, g);
        double f1_hol = 1.0, f0_hol = 1.0;
        for (std::size_t i = 1; i < d.size(); ++i) {
            f1_hol *= normal_pdf(1.0, d[i].value);
            f0_hol *= normal_pdf(0.0, d[i].value);
        }
        const double y0 = d[0].value;
        const double num = (1 - psi) * pg * normal_pdf(0.0, y0) * f1_hol + psi * normal_pdf(1.0, y0) * f1_hol;
        const double den = num + (1 - psi) * (1 - pg) * normal_pdf(0.0, y0) * f0_hol;
        const double psi_direct = num / den;
        const double pi_direct = psi_to_pi(psi_direct, after.delta, p);
        EXPECT_NEAR(next.pi, pi_direct, 1e-9);
        if (after.delta > 0) {
            EXPECT_NEAR(next.psi, psi_direct, 1e-9);
        } else {
            EXPECT_EQ(next.psi, next.pi);
        }
    }
}

TEST(PosteriorStep, CompletionAbsorbing) {
    const QueueState before = queue_at(6, 1, 4, 1);
    const QueueState after = queue_at(7, 2, 4, 1);
    const auto out = outcome(SlotEvent::completion, {{1, 1, -7.0}});
    const Posterior next = posterior_step({1.0, 1.0}, before, out, after, unit_shift, 0.01, 4);
    EXPECT_EQ(next.psi, 1.0);
    EXPECT_EQ(next.pi, 1.0);
}

TEST(PosteriorStep, FloorKeepsPsiPositive) {
    const QueueState before = queue_at(5, 1, 4, 2);
    const QueueState after = queue_at(6, 1, 4, 2);
    const auto out = outcome(SlotEvent::partial, {{1, 1, -1000.0}});
    const Posterior next = posterior_step({psi_to_pi(1e-250, 1, 0.01), 1e-250}, before, out, after, unit_shift, 0.01, 4);
    EXPECT_EQ(next.psi, psi_floor);
}

TEST(Update, PureAndStopped) {
    const NetConfig net{2, 4, 0.5};
    SufficientStat s = initial_stat(net, {0.1, 0.05});
    EXPECT_EQ(s.pi, 0.1);
    EXPECT_EQ(s.psi, 0.1);
    QueueState next = s.queue;
    next.slot = 1;
    next.lambda = lambda_at(1, 4);
    const SufficientStat a = update(s, outcome(SlotEvent::no_delivery, {}), next, unit_shift, 0.05, 4);
    const SufficientStat b = update(s, outcome(SlotEvent::no_delivery, {}), next, unit_shift, 0.05, 4);
    EXPECT_EQ(a.pi, b.pi);
    EXPECT_NEAR(a.pi, 1.0 - 0.9 * 0.95, 1e-15);
    EXPECT_EQ(s.pi, 0.1);

    SufficientStat stopped = a;
    stopped.stopped = true;
    const SufficientStat same = update(stopped, outcome(SlotEvent::no_delivery, {}), next, unit_shift, 0.05, 4);
    EXPECT_EQ(same.pi, stopped.pi);
    EXPECT_EQ(same.queue, stopped.queue);
    EXPECT_TRUE(same.stopped);

    EXPECT_THROW(update(s, outcome(SlotEvent::partial, {{1, 1, 0.0}}), next, unit_shift, 0.05, 4), OutcomeMismatch);
    EXPECT_THROW(update(s, outcome(SlotEvent::no_delivery, {}), s.queue, unit_shift, 0.05, 4), OutcomeMismatch);
}

TEST(Clamped, DetectsEarlyDrain) {
    EXPECT_TRUE(completion_is_clamped(queue_at(5, 1, 4, 1), 4));
    EXPECT_FALSE(completion_is_clamped(queue_at(7, 1, 4, 1), 4));
    EXPECT_FALSE(completion_is_clamped(queue_at(12, 1, 4, 1), 4));
}

TEST(NadmEpisode, UninformativeStopTime) {
    Scenario s = reference_scenario();
    s.net = {3, 5, 0.7};
    s.change = {0.0, 0.001};
    s.obs = ObservationModel::gaussian(0.0, 1.0, 0.0, 1.0);
    for (double gamma : {0.013, 0.21, 0.5}) {
        const auto expected = static_cast<Slot>(std::ceil(std::log1p(-gamma) / std::log1p(-s.change.p)));
        for (std::uint64_t i = 0; i < 20; ++i) {
            EpisodeStreams st = EpisodeStreams::for_episode(5, i);
            const NadmEpisode ep = run_nadm_episode(s, gamma, st);
            EXPECT_EQ(ep.tau, expected) << gamma;
            EXPECT_EQ(ep.no_delivery_slots + ep.partial_slots + ep.completion_slots, ep.tau);
        }
    }
}

TEST(NadmEpisode, ThresholdBelowPriorStopsAtZero) {
    Scenario s = small_scenario();
    s.change.rho = 0.3;
    for (std::uint64_t i = 0; i < 50; ++i) {
        EpisodeStreams st = EpisodeStreams::for_episode(6, i);
        const NadmEpisode ep = run_nadm_episode(s, 0.3, st);
        EXPECT_EQ(ep.tau, 0);
        EXPECT_EQ(ep.false_alarm, ep.change_time > 0);
        EXPECT_EQ(ep.delay, 0);
    }
}

TEST(NadmEpisode, Invariants) {
    const Scenario s = small_scenario();
    const auto records = run_nadm_episodes(s, 0.95, 3000, 7);
    for (const auto &r : records) {
        const NadmEpisode &e = r.episode;
        EXPECT_EQ(e.no_delivery_slots + e.partial_slots + e.completion_slots, e.tau);
        EXPECT_EQ(e.false_alarm, e.tau < e.change_time);
        EXPECT_EQ(e.delay, std::max<Slot>(e.tau - e.change_time, 0));
        EXPECT_EQ(e.delay == 0, e.false_alarm || e.tau == e.change_time);
        EXPECT_LE(e.clamped_completions, e.completion_slots);
    }
}

TEST(NadmEpisode, SerialEqualsParallel) {
    const Scenario s = small_scenario();
    const auto a = run_nadm_episodes(s, 0.9, 500, 8, Execution::serial);
    const auto b = run_nadm_episodes(s, 0.9, 500, 8, Execution::parallel);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].episode.tau, b[i].episode.tau);
        EXPECT_EQ(a[i].episode.change_time, b[i].episode.change_time);
    }
}

TEST(NadmEpisode, HorizonCapRaises) {
    Scenario s = small_scenario();
    s.change = {0.0, 1e-7};
    s.horizon_cap = 100;
    EpisodeStreams st = EpisodeStreams::for_episode(1, 1);
    EXPECT_THROW(run_nadm_episode(s, 0.99, st), HorizonExceeded);
}

TEST(NadmPath, UninformativeCollapseIsExact) {
    Scenario s = reference_scenario();
    s.net = {4, 3, 0.9};
    s.change = {0.1, 0.003};
    s.obs = ObservationModel::gaussian(1.0, 2.0, 1.0, 2.0);
    for (std::uint64_t e = 0; e < 5; ++e) {
        EpisodeStreams st = EpisodeStreams::for_episode(9, e);
        const auto path = nadm_posterior_path(s, 5000, st);
        for (std::size_t k = 0; k < path.size(); ++k) {
            const double closed = 1.0 - 0.9 * std::pow(1.0 - 0.003, static_cast<double>(k));
            ASSERT_NEAR(path[k], closed, 1e-9) << "k=" << k;
        }
    }
}

TEST(NadmPath, PrechangeMaxMatchesPath) {
    const Scenario s = small_scenario();
    for (std::uint64_t e = 0; e < 30; ++e) {
        EpisodeStreams a = EpisodeStreams::for_episode(10, e);
        EpisodeStreams b = EpisodeStreams::for_episode(10, e);
        EpisodeStreams c = EpisodeStreams::for_episode(10, e);
        const double best = nadm_prechange_max(s, a);
        const Slot t = sample_change_time(s.change, c.nature);
        if (t == 0) {
            EXPECT_TRUE(std::isinf(best));
            continue;
        }
        const auto path = nadm_posterior_path(s, t - 1, b);
        EXPECT_EQ(best, *std::max_element(path.begin(), path.end()));
    }
}

TEST(Consistency, PsiIsCalibratedAgainstGroundTruth) {
    const Scenario s = small_scenario();
    const ConsistencyReport r = verify_sufficient_stat_consistency(s, 300, 3000, 11);
    EXPECT_LE(r.max_prior_error, 1e-9);
    int tested = 0;
    for (const PsiBucket &b : r.buckets) {
        if (b.visits >= 200) {
            ++tested;
            EXPECT_TRUE(b.consistent) << b.lower << " " << b.mean_psi << " " << b.change_frequency;
        }
    }
    EXPECT_GE(tested, 5);
    EXPECT_TRUE(r.passed);
}
