#include "qcdnet/episodes.hpp"
#include "qcdnet/errors.hpp"
#include "qcdnet/network.hpp"
#include "qcdnet/nodm.hpp"
#include "qcdnet/scenario.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using namespace qcdnet;

namespace {

Scenario flat_scenario(int n, int period, double sigma, double p) {
    Scenario s = reference_scenario();
    s.net = {n, period, sigma};
    s.change = {0.0, p};
    s.obs = ObservationModel::gaussian(0.0, 1.0, 0.0, 1.0);
    return s;
}

} // namespace

TEST(Shiryaev, ScalarExample) {
    const auto model = ObservationModel::gaussian(0.0, 1.0, 1.0, 1.0);
    const std::vector<double> x{1.0};
    const double lr = std::exp(0.5);
    const double expected = 0.28 * lr / (0.28 * lr + 0.72);
    EXPECT_NEAR(shiryaev_update(0.2, x, 0.1, model), expected, 1e-14);
    EXPECT_NEAR(expected, 0.3907, 5e-5);
}

TEST(Shiryaev, AbsorbingAndUninformative) {
    const auto model = ObservationModel::gaussian(0.0, 1.0, 1.0, 1.0);
    const std::vector<double> x{-3.0, 0.5, 8.0};
    EXPECT_EQ(shiryaev_update(1.0, x, 0.01, model), 1.0);
    const auto flat = ObservationModel::gaussian(0.0, 1.0, 0.0, 1.0);
    for (double pi : {0.0, 0.1, 0.7}) {
        EXPECT_NEAR(shiryaev_update(pi, x, 0.05, flat), pi + (1 - pi) * 0.05, 1e-15);
    }
    EXPECT_THROW(shiryaev_update(1.5, x, 0.1, model), DomainError);
}

TEST(Shiryaev, MonotoneAndExchangeable) {
    const auto model = ObservationModel::gaussian(0.0, 1.0, 1.0, 1.0);
    Rng rng(3);
    std::normal_distribution<double> noise(0.5, 1.5);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> batch(5);
        for (double &v : batch) {
            v = noise(rng);
        }
        const double a = uniform01(rng), b = uniform01(rng);
        const double lo = std::min(a, b), hi = std::max(a, b);
        EXPECT_LE(shiryaev_update(lo, batch, 0.02, model), shiryaev_update(hi, batch, 0.02, model));
        const double before = shiryaev_update(a, batch, 0.02, model);
        std::shuffle(batch.begin(), batch.end(), rng);
        EXPECT_NEAR(shiryaev_update(a, batch, 0.02, model), before, 1e-14);
    }
}

TEST(LOfR, Examples) {
    for (double p : {1e-4, 0.01, 0.3}) {
        EXPECT_NEAR(l_of_r(p, 1), 0.0, 1e-9);
    }
    EXPECT_NEAR(l_of_r(1e-7, 34), 16.5, 1e-4);
    EXPECT_NEAR(l_of_r(0.0005, 34), l_of_r_by_summation(0.0005, 34), 1e-9);
    for (int period : {2, 5, 34, 100}) {
        for (double p : {0.001, 0.01, 0.2}) {
            const double l = l_of_r(p, period);
            EXPECT_GE(l, 0.0);
            EXPECT_LE(l, period - 1.0);
            EXPECT_NEAR(l, l_of_r_by_summation(p, period), 1e-12 * period / p);
        }
    }
    EXPECT_THROW(l_of_r(0.0, 3), InvalidArgument);
}

TEST(LOfR, MatchesSimulatedGap) {
    const double p = 0.02;
    const int period = 17;
    Rng rng(8);
    RunningStats gap;
    for (int i = 0; i < 400000; ++i) {
        const Slot t = sample_change_time({0.0, p}, rng);
        const Slot k = (t + period - 1) / period;
        gap.add(static_cast<double>(k * period - t));
    }
    EXPECT_TRUE(gap.mean_ci().covers(l_of_r(p, period))) << gap.mean() << " vs " << l_of_r(p, period);
}

TEST(AsymptoticDelay, Examples) {
    EXPECT_NEAR(asymptotic_decision_delay(0.01, 10, 0.5, 0.016860), 0.918, 5e-4);
    EXPECT_NEAR(34 * asymptotic_decision_delay(0.01, 10, 0.5, 0.016860), 31.2, 0.05);
    EXPECT_NEAR(asymptotic_decision_delay(1.0 - 1e-12, 10, 0.5, 0.01), 0.0, 1e-9);
    EXPECT_NEAR(asymptotic_decision_delay(0.05, 3, 0.0, 0.1), std::log(0.05) / std::log(0.9), 1e-12);
}

TEST(NodmEpisode, TinyThresholdStopsAtFirstBatch) {
    Scenario s = reference_scenario();
    s.net = {3, 8, 0.6};
    const auto records = run_nodm_episodes(s, 1e-200, 200, 5);
    for (const auto &r : records) {
        EXPECT_EQ(r.episode.K_tilde, 1);
        EXPECT_EQ(r.episode.T_tilde, 8);
        EXPECT_GE(r.episode.U_tilde, r.episode.T_tilde + s.net.n_sensors);
    }
}

TEST(NodmEpisode, PriorAboveThresholdStopsAtZero) {
    Scenario s = reference_scenario();
    s.change.rho = 0.4;
    EpisodeStreams st = EpisodeStreams::for_episode(1, 0);
    const NodmEpisode ep = run_nodm_episode(s, 0.3, st);
    EXPECT_EQ(ep.K_tilde, 0);
    EXPECT_EQ(ep.T_tilde, 0);
    EXPECT_EQ(ep.false_alarm, ep.change_time > 0);
}

TEST(NodmEpisode, Invariants) {
    Scenario s = reference_scenario();
    s.net = {4, 12, 0.5};
    s.change.p = 0.005;
    const auto records = run_nodm_episodes(s, 0.9, 2000, 21);
    for (const auto &r : records) {
        const NodmEpisode &e = r.episode;
        EXPECT_EQ(e.T_tilde, e.K_tilde * s.net.period);
        EXPECT_GE(e.U_tilde, e.T_tilde + s.net.n_sensors);
        EXPECT_EQ(e.false_alarm, e.T_tilde < e.change_time);
        EXPECT_EQ(e.K, (e.change_time + s.net.period - 1) / s.net.period);
        if (e.false_alarm) {
            EXPECT_EQ(e.detection_delay(), 0.0);
        } else {
            EXPECT_EQ(e.detection_delay(), static_cast<double>(e.U_tilde - e.change_time));
            EXPECT_GE(e.decision_delay(), 0.0);
        }
    }
}

TEST(NodmEpisode, StoppingBatchIgnoresNetwork) {
    Scenario s = reference_scenario();
    s.net = {5, 20, 0.4};
    s.change.p = 0.002;
    for (std::uint64_t i = 0; i < 100; ++i) {
        EpisodeStreams a{Rng(derive_seed(4, i)), Rng(derive_seed(5, i))};
        EpisodeStreams b{Rng(derive_seed(4, i)), Rng(derive_seed(6, i))};
        Rng nature(derive_seed(4, i));
        const NodmEpisode x = run_nodm_episode(s, 0.95, a);
        const NodmEpisode y = run_nodm_episode(s, 0.95, b);
        const NodmEpisode z = run_nodm_decision_episode(s, 0.95, nature);
        EXPECT_EQ(x.K_tilde, y.K_tilde);
        EXPECT_EQ(x.T_tilde, y.T_tilde);
        EXPECT_EQ(x.K_tilde, z.K_tilde);
        EXPECT_EQ(x.change_time, z.change_time);
        EXPECT_EQ(z.U_tilde, z.T_tilde);
    }
}

TEST(NodmEpisode, HorizonCapRaises) {
    Scenario s = flat_scenario(2, 5, 0.6, 1e-6);
    s.horizon_cap = 200;
    EpisodeStreams st = EpisodeStreams::for_episode(2, 0);
    EXPECT_THROW(run_nodm_episode(s, 0.999, st), HorizonExceeded);
    Rng nature(1);
    EXPECT_THROW(run_nodm_decision_episode(s, 0.999, nature), HorizonExceeded);
}

TEST(NodmEpisode, UninformativeStopIsDeterministic) {
    const Scenario s = flat_scenario(2, 10, 0.5, 0.01);
    const double gamma = 0.83;
    const double p_r = s.p_r();
    const auto b_star = static_cast<std::int64_t>(std::ceil(std::log1p(-gamma) / std::log1p(-p_r)));
    ASSERT_GT(1.0 - std::pow(1.0 - p_r, static_cast<double>(b_star)), gamma);
    ASSERT_LT(1.0 - std::pow(1.0 - p_r, static_cast<double>(b_star - 1)), gamma);

    const std::size_t n = 100000;
    const auto records = run_nodm_decision_episodes(s, gamma, n, 9);
    std::size_t alarms = 0;
    RunningStats delay;
    for (const auto &r : records) {
        ASSERT_EQ(r.episode.K_tilde, b_star);
        alarms += r.episode.false_alarm;
        delay.add(r.episode.decision_delay());
    }
    // P(T > b* period) and E[(b* period - T) 1{T <= b* period}] for geometric T.
    const double horizon = static_cast<double>(b_star * s.net.period);
    const double pfa = std::pow(1.0 - s.change.p, horizon);
    double mean = 0.0;
    for (int t = 1; t <= b_star * s.net.period; ++t) {
        mean += (horizon - t) * std::pow(1.0 - s.change.p, t - 1) * s.change.p;
    }
    const Estimate fa = wilson_interval(alarms, n);
    EXPECT_TRUE(fa.covers(pfa)) << fa.value << " vs " << pfa;
    EXPECT_TRUE(delay.mean_ci().covers(mean)) << delay.mean() << " vs " << mean;
}

TEST(Decomposition, HandCraftedRecords) {
    NodmEpisode ok;
    ok.change_time = 15;
    ok.K = 2;
    ok.K_tilde = 3;
    ok.T_tilde = 30;
    ok.U_tilde = 36;
    NodmEpisode fa;
    fa.change_time = 50;
    fa.K = 5;
    fa.K_tilde = 2;
    fa.T_tilde = 20;
    fa.U_tilde = 25;
    fa.false_alarm = true;
    const std::vector<NodmEpisode> eps{ok, fa};
    const DelayDecomposition d = decompose_detection_delay(eps, 5.0, 0.0, 3.0, 0.0, 10);
    EXPECT_DOUBLE_EQ(d.alpha_hat, 0.5);
    EXPECT_DOUBLE_EQ(d.lhs.value, 10.5);
    EXPECT_DOUBLE_EQ(d.decision_term.value, 5.0);
    EXPECT_DOUBLE_EQ(d.rhs, 9.0);
    EXPECT_DOUBLE_EQ(d.difference.value, 1.5);
    EXPECT_DOUBLE_EQ(d.lhs.value - d.rhs, d.difference.value);
    EXPECT_THROW(decompose_detection_delay(std::span<const NodmEpisode>(eps.data(), 1), 5, 0, 3, 0, 10),
                 InvalidArgument);
}

TEST(Decomposition, PeriodOneCollapses) {
    // l(1) = 0 and rho = 0: lhs = d + E[(K~ - K)^+] on every episode.
    std::vector<NodmEpisode> eps;
    for (int i = 0; i < 10; ++i) {
        NodmEpisode e;
        e.change_time = 10 + i;
        e.K = e.change_time;
        e.K_tilde = e.K + i % 3;
        e.T_tilde = e.K_tilde;
        e.U_tilde = e.T_tilde + 4;
        eps.push_back(e);
    }
    const DelayDecomposition d = decompose_detection_delay(eps, 4.0, 0.0, l_of_r(0.01, 1), 0.0, 1);
    EXPECT_NEAR(d.difference.value, 0.0, 1e-9);
    EXPECT_NEAR(d.lhs.value, 4.0 + d.decision_term.value, 1e-9);
}

TEST(Decomposition, UninformativeScenarioIsConsistent) {
    const Scenario s = flat_scenario(2, 10, 0.5, 0.01);
    const auto records = run_nodm_episodes(s, 0.83, 40000, 17);
    std::vector<NodmEpisode> eps;
    for (const auto &r : records) {
        eps.push_back(r.episode);
    }
    const SojournEstimate d = estimate_batch_sojourn(s.net, {20, 200, 2000}, 3);
    const DelayDecomposition dec =
        decompose_detection_delay(eps, d.mean.value, d.mean.half_width, l_of_r(s.change.p, s.net.period), 0.0,
                                  s.net.period);
    EXPECT_TRUE(dec.consistent) << dec.difference.value << " +- " << dec.difference.half_width;
}
