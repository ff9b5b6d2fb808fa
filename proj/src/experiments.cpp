#include "qcdnet/experiments.hpp"

#include "qcdnet/episodes.hpp"
#include "qcdnet/errors.hpp"
#include "qcdnet/nadm.hpp"
#include "qcdnet/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace qcdnet {

namespace {

constexpr double calibration_tol = 1e-12;

Estimate decision_delay_of(std::span<const NodmRecord> records) {
    RunningStats st;
    for (const NodmRecord &r : records) {
        if (!r.horizon_exceeded) {
            st.add(r.episode.decision_delay());
        }
    }
    return st.mean_ci();
}

std::vector<NodmEpisode> completed(std::span<const NodmRecord> records) {
    std::vector<NodmEpisode> out;
    out.reserve(records.size());
    for (const NodmRecord &r : records) {
        if (!r.horizon_exceeded) {
            out.push_back(r.episode);
        }
    }
    return out;
}

std::string fmt(double x, int precision = 4) {
    std::ostringstream os;
    os << std::setprecision(precision) << std::fixed << x;
    return os.str();
}

std::string sci(double x) {
    std::ostringstream os;
    os << std::setprecision(3) << std::scientific << x;
    return os.str();
}

std::string fmt(const Estimate &e, int precision = 4) {
    return fmt(e.value, precision) + " +/- " + fmt(e.half_width, precision);
}

} // namespace

StageSeeds StageSeeds::from(std::uint64_t master) {
    return {derive_seed(master, stream_tag::calibration), derive_seed(master, stream_tag::estimation),
            derive_seed(master, stream_tag::sojourn)};
}

RunReport run_scenario(const Scenario &s, Execution exec) {
    s.validate();
    require_stable(s.net);
    const StageSeeds seeds = StageSeeds::from(s.seed);
    RunReport r;
    r.scenario = s;

    r.nodm.calibration =
        calibrate_threshold(Detector::nodm, s, s.alpha, s.calibration_episodes, calibration_tol, seeds.calibration, exec);
    r.nadm.calibration =
        calibrate_threshold(Detector::nadm, s, s.alpha, s.calibration_episodes, calibration_tol, seeds.calibration, exec);

    const auto nodm = run_nodm_episodes(s, r.nodm.calibration.gamma, s.episodes, seeds.estimation, exec);
    r.nodm.metrics = summarize(Detector::nodm, r.nodm.calibration.gamma, nodm, seeds.estimation);
    const auto nadm = run_nadm_episodes(s, r.nadm.calibration.gamma, s.episodes, seeds.estimation, exec);
    r.nadm.metrics = summarize(Detector::nadm, r.nadm.calibration.gamma, nadm, seeds.estimation);

    r.sojourn = estimate_batch_sojourn(s.net, s.sojourn, seeds.sojourn, exec);
    r.l_r = l_of_r(s.change.p, s.net.period);
    r.decision_delay = decision_delay_of(nodm);
    const double asym = asymptotic_decision_delay(s.alpha, s.net.n_sensors, kl_divergence(s.obs), s.p_r());
    r.approximation = (r.sojourn.mean.value + r.l_r) * (1.0 - s.alpha) - s.change.rho * r.l_r + s.net.period * asym;
    const auto eps = completed(nodm);
    r.decomposition = decompose_detection_delay(eps, r.sojourn.mean.value, r.sojourn.mean.half_width, r.l_r,
                                                s.change.rho, s.net.period);
    return r;
}

void print_run_report(std::ostream &out, const RunReport &r) {
    const Scenario &s = r.scenario;
    out << "scenario: N=" << s.net.n_sensors << " period=" << s.net.period << " sigma=" << s.net.sigma
        << " rho=" << s.change.rho << " p=" << s.change.p << " alpha=" << s.alpha << " seed=" << s.seed << "\n";
    out << "stability margin: " << fmt(stability_margin(s.net)) << "\n";
    out << std::left << std::setw(8) << "detector" << std::setw(14) << "gamma" << std::setw(26) << "mean delay"
        << std::setw(24) << "P_FA" << "episodes\n";
    for (const DetectorReport *d : {&r.nodm, &r.nadm}) {
        out << std::setw(8) << to_string(d->metrics.detector) << std::setw(14) << fmt(d->calibration.gamma, 8)
            << std::setw(26) << fmt(d->metrics.mean_delay, 2) << std::setw(24) << fmt(d->metrics.pfa, 4)
            << d->metrics.episodes;
        if (d->metrics.horizon_exceeded > 0) {
            out << " (" << d->metrics.horizon_exceeded << " hit the horizon cap)";
        }
        out << "\n";
    }
    out << "NODM decision delay: " << fmt(r.decision_delay, 2) << "\n";
    out << "batch sojourn d(r): " << fmt(r.sojourn.mean, 2) << "   l(r): " << fmt(r.l_r, 3) << "\n";
    out << "approximate NODM delay: " << fmt(r.approximation, 2) << "\n";
    out << "delay decomposition: lhs " << fmt(r.decomposition.lhs, 2) << "  rhs " << fmt(r.decomposition.rhs, 2)
        << "  difference " << fmt(r.decomposition.difference, 2)
        << (r.decomposition.consistent ? "  (consistent)" : "  (NOT consistent)") << "\n";
}

SweepResult run_report_rows(const RunReport &r) {
    SweepResult res;
    res.name = "run";
    res.seed = r.scenario.seed;
    for (const DetectorReport *d : {&r.nodm, &r.nadm}) {
        SweepRow row;
        row.sweep = "run";
        row.value = r.scenario.net.period;
        row.n_sensors = r.scenario.net.n_sensors;
        row.period = r.scenario.net.period;
        row.series = std::string(to_string(d->metrics.detector));
        row.gamma = d->calibration.gamma;
        row.delay = d->metrics.mean_delay;
        row.pfa = d->metrics.pfa;
        row.d_r = r.sojourn.mean;
        row.l_r = r.l_r;
        if (d == &r.nodm) {
            row.decision_delay = r.decision_delay;
            row.approximation = r.approximation;
        }
        res.rows.push_back(row);
    }
    return res;
}

SweepResult sweep_rate(const Scenario &s, std::span<const int> periods, Execution exec, std::ostream *progress) {
    SweepResult res;
    res.name = "sweep-rate";
    res.seed = s.seed;
    for (int period : periods) {
        Scenario sp = s;
        sp.net.period = period;
        const auto fail = [&](const std::string &status) {
            for (const char *series : {"NODM", "NADM"}) {
                SweepRow row;
                row.sweep = res.name;
                row.value = period;
                row.n_sensors = sp.net.n_sensors;
                row.period = period;
                row.series = series;
                row.status = status;
                res.rows.push_back(row);
            }
        };
        try {
            sp.net.validate();
            if (stability_margin(sp.net) <= 0.0) {
                fail("unstable");
                if (progress) {
                    *progress << "period " << period << ": unstable, skipped\n";
                }
                continue;
            }
            const SweepResult part = run_report_rows(run_scenario(sp, exec));
            for (SweepRow row : part.rows) {
                row.sweep = res.name;
                res.rows.push_back(row);
            }
            if (progress) {
                const auto &a = part.rows[0];
                const auto &b = part.rows[1];
                *progress << "period " << period << ": NODM " << fmt(*a.delay, 2) << "  NADM " << fmt(*b.delay, 2)
                          << "\n";
            }
        } catch (const std::exception &e) {
            fail(std::string("error: ") + e.what());
            if (progress) {
                *progress << "period " << period << ": " << e.what() << "\n";
            }
        }
    }
    return res;
}

int period_for_rate(int n_sensors, double nr) {
    if (n_sensors < 1 || !(nr > 0.0)) {
        throw InvalidArgument("need N >= 1 and a positive observation rate");
    }
    return std::max(1, static_cast<int>(std::lround(n_sensors / nr)));
}

SweepResult sweep_nodes(const Scenario &s, std::span<const int> sensors, double nr, Execution exec,
                        std::ostream *progress) {
    SweepResult res;
    res.name = "sweep-nodes";
    res.seed = s.seed;
    const StageSeeds seeds = StageSeeds::from(s.seed);
    for (int n : sensors) {
        Scenario sp = s;
        sp.net.n_sensors = n;
        sp.net.period = period_for_rate(n, nr);
        const auto base_row = [&](const char *series) {
            SweepRow row;
            row.sweep = res.name;
            row.value = n;
            row.n_sensors = n;
            row.period = sp.net.period;
            row.series = series;
            return row;
        };
        // Network-free decision delay.
        try {
            const auto cal = calibrate_threshold(Detector::nodm, sp, sp.alpha, sp.calibration_episodes,
                                                 calibration_tol, seeds.calibration, exec);
            const auto recs = run_nodm_decision_episodes(sp, cal.gamma, sp.episodes, seeds.estimation, exec);
            SweepRow row = base_row("NODM-decision");
            const MetricEstimate m = summarize(Detector::nodm, cal.gamma, recs, seeds.estimation);
            row.gamma = cal.gamma;
            row.delay = m.mean_delay;
            row.pfa = m.pfa;
            row.l_r = l_of_r(sp.change.p, sp.net.period);
            row.decision_delay = m.mean_delay;
            const double asym =
                asymptotic_decision_delay(sp.alpha, n, kl_divergence(sp.obs), sp.p_r()) * sp.net.period;
            row.approximation = *row.l_r * (1.0 - sp.alpha - sp.change.rho) + asym;
            res.rows.push_back(row);
            if (progress) {
                *progress << "N=" << n << " period=" << sp.net.period << ": decision " << fmt(*row.delay, 2);
            }
        } catch (const std::exception &e) {
            SweepRow row = base_row("NODM-decision");
            row.status = std::string("error: ") + e.what();
            res.rows.push_back(row);
            if (progress) {
                *progress << "N=" << n << ": decision series failed: " << e.what();
            }
        }
        try {
            if (stability_margin(sp.net) <= 0.0) {
                throw StabilityError("unstable");
            }
            const SweepResult part = run_report_rows(run_scenario(sp, exec));
            for (SweepRow row : part.rows) {
                row.sweep = res.name;
                row.value = n;
                res.rows.push_back(row);
            }
            if (progress) {
                *progress << "  NODM " << fmt(*part.rows[0].delay, 2) << "  NADM " << fmt(*part.rows[1].delay, 2)
                          << "\n";
            }
        } catch (const std::exception &e) {
            for (const char *series : {"NODM", "NADM"}) {
                SweepRow row = base_row(series);
                row.status = dynamic_cast<const StabilityError *>(&e) ? "unstable" : std::string("error: ") + e.what();
                res.rows.push_back(row);
            }
            if (progress) {
                *progress << "  detection series failed: " << e.what() << "\n";
            }
        }
    }
    return res;
}

void write_sweep_csv(std::ostream &out, const SweepResult &result) {
    out << "# " << csv_schema << " table=" << result.name << " seed=" << result.seed << "\n";
    out << "sweep,value,n_sensors,period,series,gamma,delay,delay_ci,pfa,pfa_ci,d_r,d_r_ci,l_r,"
           "decision_delay,decision_delay_ci,approximation,status\n";
    out << std::setprecision(10);
    const auto opt = [&](const std::optional<double> &x) {
        if (x) {
            out << *x;
        }
    };
    const auto est = [&](const std::optional<Estimate> &e) {
        if (e) {
            out << e->value << ',' << e->half_width;
        } else {
            out << ',';
        }
    };
    for (const SweepRow &r : result.rows) {
        out << r.sweep << ',' << r.value << ',' << r.n_sensors << ',' << r.period << ',' << r.series << ',';
        opt(r.gamma);
        out << ',';
        est(r.delay);
        out << ',';
        est(r.pfa);
        out << ',';
        est(r.d_r);
        out << ',';
        opt(r.l_r);
        out << ',';
        est(r.decision_delay);
        out << ',';
        opt(r.approximation);
        std::string status = r.status;
        std::replace(status.begin(), status.end(), ',', ';');
        out << ',' << '"' << status << '"' << '\n';
    }
}

ValidationCheck check_l_of_r(std::size_t pairs, std::uint64_t seed) {
    ValidationCheck c{"l(r) closed form vs defining sum", true, ""};
    Rng rng(derive_seed(seed, 0x6c72));
    double worst = 0.0;
    for (std::size_t i = 0; i < pairs; ++i) {
        const double p = std::pow(10.0, -3.0 + 2.7 * uniform01(rng)); // [1e-3, 0.5]
        const int period = 1 + static_cast<int>(uniform01(rng) * 100.0);
        worst = std::max(worst, std::abs(l_of_r(p, period) - l_of_r_by_summation(p, period)));
    }
    const double l1 = l_of_r(0.3, 1);
    c.passed = worst <= 1e-12 && l1 == 0.0;
    c.detail = "max |diff| = " + sci(worst) + " over " + std::to_string(pairs) +
               " pairs; l(1) = " + sci(l1);
    return c;
}

ValidationCheck check_psi_pi_round_trip(int points_per_axis) {
    ValidationCheck c{"psi/pi round trip", true, ""};
    double worst = 0.0;
    const int k = points_per_axis;
    for (int a = 0; a < k; ++a) {
        const double psi = static_cast<double>(a) / (k - 1);
        for (int b = 0; b < k; ++b) {
            const Slot delta = static_cast<Slot>(b) * 5;
            for (int d = 0; d < k; ++d) {
                const double p = std::pow(10.0, -4.0 + 2.7 * d / (k - 1)); // [1e-4, 0.05]
                const double pi = psi_to_pi(psi, delta, p);
                worst = std::max(worst, std::abs(pi_to_psi(pi, delta, p) - psi));
                worst = std::max(worst, std::abs(psi_to_pi(pi_to_psi(pi, delta, p), delta, p) - pi));
            }
        }
    }
    c.passed = worst <= 1e-12;
    c.detail = "max error " + sci(worst) + " over " + std::to_string(k * k * k) + " points";
    return c;
}

ValidationCheck check_uninformative_collapse(Slot horizon, std::uint64_t seed) {
    ValidationCheck c{"uninformative NADM posterior equals the prior curve", true, ""};
    Scenario s = reference_scenario();
    s.net = NetConfig{3, 5, 0.7};
    s.change = ChangeSpec{0.1, 0.001};
    s.obs = ObservationModel::gaussian(0.0, 1.0, 0.0, 1.0);
    EpisodeStreams streams = EpisodeStreams::for_episode(seed, 0);
    const auto path = nadm_posterior_path(s, horizon, streams);
    double worst = 0.0;
    for (std::size_t k = 0; k < path.size(); ++k) {
        const double closed = 1.0 - (1.0 - s.change.rho) * std::pow(1.0 - s.change.p, static_cast<double>(k));
        worst = std::max(worst, std::abs(path[k] - closed));
    }
    c.passed = worst <= 1e-9;
    c.detail = "max |pi_k - closed form| = " + sci(worst) + " over " + std::to_string(path.size()) + " slots";
    return c;
}

ValidationCheck check_queue_conservation(std::size_t episodes, Slot slots, std::uint64_t seed, Execution exec) {
    ValidationCheck c{"queue conservation under fuzzing", true, ""};
    std::vector<std::size_t> violations(episodes, 0);
    std::vector<std::string> first(episodes);
    for_each_index(episodes, exec, [&](std::size_t e) {
        Rng rng(derive_seed(seed, 0x6675, e));
        NetConfig net;
        net.n_sensors = 1 + static_cast<int>(uniform01(rng) * 8.0);
        net.period = 1 + static_cast<int>(uniform01(rng) * 16.0);
        net.sigma = 0.05 + 0.9 * uniform01(rng);
        QueueState q = initial_state(net);
        SensorBuffers buffers = SensorBuffers::empty(net.n_sensors);
        std::vector<double> fresh(static_cast<std::size_t>(net.n_sensors));
        std::int64_t generated = 0;
        std::int64_t delivered = 0;
        std::int64_t last_batch = 0;
        std::vector<std::int64_t> next_expected(static_cast<std::size_t>(net.n_sensors), 1);
        try {
            for (Slot k = 0; k < slots; ++k) {
                const int m = draw_success(q, net, rng);
                const bool fork = is_sampling_instant(q.slot + 1, net.period);
                if (fork) {
                    for (double &x : fresh) {
                        x = static_cast<double>(q.slot + 1);
                    }
                    generated += net.n_sensors;
                }
                const SlotOutcome out = advance(q, buffers, m, net, fork ? std::span<const double>(fresh)
                                                                         : std::span<const double>());
                for (const Delivery &d : out.delivered) {
                    ++delivered;
                    auto &expect = next_expected[static_cast<std::size_t>(d.node - 1)];
                    if (d.batch < last_batch || d.batch != expect ||
                        d.value != static_cast<double>(d.batch * net.period)) {
                        throw StateCorruption("delivery out of order");
                    }
                    ++expect;
                    last_batch = d.batch;
                }
                std::int64_t held = 0;
                for (std::size_t i = 0; i < buffers.sensor.size(); ++i) {
                    held += static_cast<std::int64_t>(buffers.sensor[i].size() + buffers.sequencer[i].size());
                }
                if (generated != delivered + held) {
                    throw StateCorruption("sample count not conserved");
                }
                if (q.lambda != lambda_at(q.slot, net.period)) {
                    throw StateCorruption("lambda drift");
                }
            }
        } catch (const std::exception &ex) {
            ++violations[e];
            first[e] = ex.what();
        }
    });
    std::size_t total = 0;
    std::string example;
    for (std::size_t e = 0; e < episodes; ++e) {
        total += violations[e];
        if (example.empty() && !first[e].empty()) {
            example = first[e];
        }
    }
    c.passed = total == 0;
    c.detail = std::to_string(total) + " violations in " + std::to_string(episodes) + " episodes of " +
               std::to_string(slots) + " slots" + (example.empty() ? "" : " (" + example + ")");
    return c;
}

ValidationCheck check_tiny_dp() {
    ValidationCheck c{"tiny DP threshold structure", true, ""};
    TinyScenario tiny;
    tiny.obs = ObservationModel::gaussian(0.0, 1.0, 1.0, 1.0);
    const DpResult informative = bellman_value_iteration(tiny);

    TinyScenario flat = tiny;
    flat.net.period = 4;
    flat.obs = ObservationModel::gaussian(0.0, 1.0, 0.0, 1.0);
    const DpResult uninformative = bellman_value_iteration(flat);
    const double oracle = prior_only_threshold(flat.change.p, flat.cost_c);
    const double step = 1.0 / (flat.pi_grid - 1);
    double worst = 0.0;
    for (double g : uninformative.threshold) {
        worst = std::max(worst, std::abs(g - oracle));
    }
    c.passed = informative.all_upsets() && informative.all_concave() && informative.kappa_bound_holds &&
               informative.residual_monotone && worst <= step + 1e-12;
    c.detail = std::to_string(informative.states.size()) + " queue states; up-sets " +
               (informative.all_upsets() ? "yes" : "no") + ", concave " + (informative.all_concave() ? "yes" : "no") +
               ", kappa bound " + (informative.kappa_bound_holds ? "yes" : "no") + "; f0=f1 max |gamma - " +
               fmt(oracle, 4) + "| = " + fmt(worst, 4) + " (grid step " + fmt(step, 4) + ")";
    return c;
}

ValidationCheck check_nodm_network_independence(std::size_t episodes, std::uint64_t seed) {
    ValidationCheck c{"NODM stopping batch independent of the network", true, ""};
    Scenario s = reference_scenario();
    s.net = NetConfig{4, 14, 0.5};
    s.change.p = 0.01;
    std::size_t mismatches = 0;
    for (std::size_t e = 0; e < episodes; ++e) {
        EpisodeStreams a = EpisodeStreams::for_episode(seed, e);
        EpisodeStreams b = a;
        b.network.seed(derive_seed(seed, stream_tag::network, e + 1'000'000));
        const NodmEpisode x = run_nodm_episode(s, 0.9, a);
        const NodmEpisode y = run_nodm_episode(s, 0.9, b);
        mismatches += (x.K_tilde != y.K_tilde || x.T_tilde != y.T_tilde) ? 1 : 0;
    }
    c.passed = mismatches == 0;
    c.detail = std::to_string(mismatches) + " mismatches in " + std::to_string(episodes) + " episode pairs";
    return c;
}

std::vector<ValidationCheck> validate_suite(std::uint64_t seed, Execution exec) {
    std::vector<ValidationCheck> checks;
    const auto guarded = [&](const char *name, auto &&fn) {
        try {
            checks.push_back(fn());
        } catch (const std::exception &e) {
            checks.push_back({name, false, std::string("threw: ") + e.what()});
        }
    };
    guarded("l(r)", [&] { return check_l_of_r(200, seed); });
    guarded("psi/pi", [&] { return check_psi_pi_round_trip(10); });
    guarded("uninformative", [&] { return check_uninformative_collapse(10'000, seed); });
    guarded("conservation", [&] { return check_queue_conservation(200, 2'000, seed, exec); });
    guarded("tiny DP", [&] { return check_tiny_dp(); });
    guarded("network independence", [&] { return check_nodm_network_independence(200, seed); });
    return checks;
}

void print_checks(std::ostream &out, std::span<const ValidationCheck> checks) {
    for (const ValidationCheck &c : checks) {
        out << (c.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(52) << c.name << c.detail << "\n";
    }
}

} // namespace qcdnet
