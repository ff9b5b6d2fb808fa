#include "qcdnet/bellman.hpp"

#include "qcdnet/errors.hpp"
#include "qcdnet/nadm.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <ostream>
#include <tuple>

namespace qcdnet {

void TinyScenario::validate() const {
    net.validate();
    change.validate();
    obs.validate();
    if (net.n_sensors > 2 || net.period > 4) {
        throw InvalidArgument("tiny DP supports at most 2 sensors and period 4");
    }
    if (delta_cap < net.period) {
        throw InvalidArgument("delta_cap must be at least one period");
    }
    if (pi_grid < 3 || obs_grid < 2 || !(obs_span > 0.0) || !(tol > 0.0) || max_iterations < 1) {
        throw InvalidArgument("invalid grid or tolerance settings");
    }
    if (!(cost_c > 0.0)) {
        throw InvalidArgument("cost_c must be positive");
    }
}

bool DpResult::all_upsets() const {
    return std::all_of(stop_region_upset.begin(), stop_region_upset.end(), [](bool b) { return b; });
}

bool DpResult::all_concave() const {
    return std::all_of(concave.begin(), concave.end(), [](bool b) { return b; });
}

double prior_only_threshold(double p, double c) {
    return p / (p + c);
}

namespace {

using Key = std::tuple<Slot, std::int64_t, std::vector<int>, std::vector<std::uint8_t>>;

QueueState canonical(const QueueState &q, int period) {
    QueueState c = q;
    if (q.slot == 0) {
        return c;
    }
    if (q.delta > 0) {
        c.batch = 1;
        c.slot = period + q.delta;
    } else if (q.lambda == period) {
        c.batch = 1;
        c.slot = period;
    } else {
        c.batch = 2;
        c.slot = 2 * period - q.lambda;
    }
    c.lambda = lambda_at(c.slot, period);
    return c;
}

SensorBuffers synthesize_buffers(const QueueState &q, int period, int n) {
    SensorBuffers b = SensorBuffers::empty(n);
    const std::int64_t latest = q.slot / period;
    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
        const std::int64_t head = q.batch + q.received[i] + q.seq_queue[i];
        for (std::int64_t t = head; t <= latest; ++t) {
            b.sensor[i].push_back({t, 0.0});
        }
        for (int w = 1; w <= q.seq_queue[i]; ++w) {
            b.sequencer[i].push_back({q.batch + w, 0.0});
        }
    }
    return b;
}

std::string describe(const QueueState &q, const NetConfig &net) {
    if (q.slot == 0) {
        return "pre";
    }
    if (q.delta == 0) {
        return q.lambda == net.period ? "fresh" : "drained(lambda=" + std::to_string(q.lambda) + ")";
    }
    std::string s = "delta=" + std::to_string(q.delta) + " W=(";
    for (std::size_t i = 0; i < q.seq_queue.size(); ++i) {
        s += (i ? "," : "") + std::to_string(q.seq_queue[i]);
    }
    s += ") R=(";
    for (std::size_t i = 0; i < q.received.size(); ++i) {
        s += (i ? "," : "") + std::to_string(static_cast<int>(q.received[i]));
    }
    return s + ")";
}

// Folds a state older than the cap back by one period, removing one
// pending sample from every node and keeping the queue identities intact.
bool fold_to_cap(QueueState &q, const NetConfig &net, Slot cap) {
    if (q.delta <= cap) {
        return false;
    }
    const Slot folded = q.delta - net.period;
    for (std::size_t i = 0; i < q.seq_queue.size(); ++i) {
        const Slot l = folded / net.period + 1 - q.received[i] - q.seq_queue[i];
        if (l < 0) {
            if (q.seq_queue[i] == 0) {
                throw StateCorruption("cannot fold a state without a parked sample");
            }
            q.seq_queue[i] -= 1;
        }
    }
    q.delta = folded;
    q.slot -= net.period;
    return true;
}

struct Move {
    double prob = 0.0;
    SlotEvent event = SlotEvent::no_delivery;
    int hol = 0;
    int target = 0;
    Slot before_delta = 0;
    Slot after_delta = 0; // before folding
};

struct Item {
    double w;
    int target;
    int idx;
    double frac;
};

} // namespace

DpResult bellman_value_iteration(const TinyScenario &tiny) {
    tiny.validate();
    const NetConfig &net = tiny.net;
    const int n = net.n_sensors;
    const int period = net.period;
    const double p = tiny.change.p;

    // Enumerate reachable queue states breadth-first from slot 0.
    DpResult res;
    std::map<Key, int> index;
    std::vector<std::vector<Move>> moves;
    std::deque<int> frontier;
    const auto intern = [&](const QueueState &q) {
        const QueueState c = canonical(q, period);
        Key key{c.slot, c.batch, c.seq_queue, c.received};
        const auto it = index.find(key);
        if (it != index.end()) {
            return it->second;
        }
        const int id = static_cast<int>(res.states.size());
        index.emplace(std::move(key), id);
        DpQueueState st;
        st.queue = c;
        st.label = describe(c, net);
        st.pre_sampling = c.slot == 0;
        st.drained = c.slot > 0 && c.delta == 0 && c.lambda != period;
        res.states.push_back(st);
        moves.emplace_back();
        frontier.push_back(id);
        return id;
    };
    intern(initial_state(net));
    const std::vector<double> zeros(static_cast<std::size_t>(n), 0.0);
    while (!frontier.empty()) {
        const int id = frontier.front();
        frontier.pop_front();
        const QueueState q = res.states[static_cast<std::size_t>(id)].queue;
        const int contending = num_contending(q, net);
        std::vector<std::pair<int, double>> outcomes;
        if (contending == 0) {
            outcomes.emplace_back(0, 1.0);
        } else {
            outcomes.emplace_back(0, 1.0 - net.sigma);
            for (int i = 0; i < n; ++i) {
                if (sensor_queue_length(q, net, i) > 0) {
                    outcomes.emplace_back(i + 1, net.sigma / contending);
                }
            }
        }
        std::vector<Move> list;
        for (const auto &[m, prob] : outcomes) {
            QueueState next = q;
            SensorBuffers buffers = synthesize_buffers(q, period, n);
            const bool fork = is_sampling_instant(next.slot + 1, period);
            const SlotOutcome out = advance(next, buffers, m, net, fork ? std::span<const double>(zeros)
                                                                        : std::span<const double>());
            Move mv;
            mv.prob = prob;
            mv.event = out.event;
            mv.hol = out.event == SlotEvent::completion ? static_cast<int>(out.delivered.size()) - 1 : 0;
            mv.before_delta = q.delta;
            mv.after_delta = next.delta;
            if (fold_to_cap(next, net, tiny.delta_cap)) {
                ++res.cap_redirects;
            }
            mv.target = intern(next);
            list.push_back(mv);
        }
        moves[static_cast<std::size_t>(id)] = std::move(list);
    }

    // Observation quadrature: nodes spanning both densities, weights
    // normalized per hypothesis.
    const double sd = std::sqrt(std::max(tiny.obs.pre_var, tiny.obs.post_var));
    const double lo = std::min(tiny.obs.pre_mean, tiny.obs.post_mean) - tiny.obs_span * sd;
    const double hi = std::max(tiny.obs.pre_mean, tiny.obs.post_mean) + tiny.obs_span * sd;
    const auto og = static_cast<std::size_t>(tiny.obs_grid);
    std::vector<double> w0(og), w1(og);
    double s0 = 0.0, s1 = 0.0;
    for (std::size_t j = 0; j < og; ++j) {
        const double y = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(og - 1);
        w0[j] = std::exp(log_likelihood(tiny.obs, 0, y));
        w1[j] = std::exp(log_likelihood(tiny.obs, 1, y));
        s0 += w0[j];
        s1 += w1[j];
    }
    for (std::size_t j = 0; j < og; ++j) {
        w0[j] /= s0;
        w1[j] /= s1;
    }

    const auto g = static_cast<std::size_t>(tiny.pi_grid);
    res.pi.resize(g);
    for (std::size_t k = 0; k < g; ++k) {
        res.pi[k] = static_cast<double>(k) / static_cast<double>(g - 1);
    }
    const std::size_t ns = res.states.size();
    res.reachable_floor.resize(ns);
    for (std::size_t s = 0; s < ns; ++s) {
        res.reachable_floor[s] = res.states[s].queue.delta > 0 ? psi_to_pi(0.0, res.states[s].queue.delta, p) : 0.0;
    }

    const auto locate = [&](double x, int target, double w) {
        x = std::clamp(x, 0.0, 1.0);
        const double pos = x * static_cast<double>(g - 1);
        const auto idx = std::min(static_cast<std::size_t>(pos), g - 2);
        return Item{w, target, static_cast<int>(idx), pos - static_cast<double>(idx)};
    };

    std::vector<std::vector<std::vector<Item>>> items(ns, std::vector<std::vector<Item>>(g));
    for (std::size_t s = 0; s < ns; ++s) {
        const Slot delta = res.states[s].queue.delta;
        for (std::size_t k = 0; k < g; ++k) {
            const double pi = std::max(res.pi[k], res.reachable_floor[s]);
            const double psi = pi_to_psi(pi, delta, p);
            auto &list = items[s][k];
            for (const Move &mv : moves[s]) {
                switch (mv.event) {
                case SlotEvent::no_delivery:
                    list.push_back(locate(1.0 - (1.0 - pi) * (1.0 - p), mv.target, mv.prob));
                    break;
                case SlotEvent::partial:
                    for (std::size_t j = 0; j < og; ++j) {
                        const double joint = psi * w1[j] + (1.0 - psi) * w0[j];
                        const double post = psi * w1[j] / joint;
                        list.push_back(locate(psi_to_pi(post, mv.after_delta, p), mv.target, mv.prob * joint));
                    }
                    break;
                case SlotEvent::completion: {
                    const Slot gap = std::min<Slot>(period, mv.before_delta + 1);
                    const double pg = batch_change_prob(p, gap);
                    if (mv.hol == 0) {
                        for (std::size_t j = 0; j < og; ++j) {
                            const double joint = psi * w1[j] + (1.0 - psi) * w0[j];
                            const double post = ((1.0 - psi) * pg * w0[j] + psi * w1[j]) / joint;
                            list.push_back(locate(psi_to_pi(post, mv.after_delta, p), mv.target, mv.prob * joint));
                        }
                    } else if (mv.hol == 1) {
                        for (std::size_t j = 0; j < og; ++j) {
                            for (std::size_t l = 0; l < og; ++l) {
                                const double a = (1.0 - psi) * pg * w0[j] * w1[l];
                                const double b = psi * w1[j] * w1[l];
                                const double c = (1.0 - psi) * (1.0 - pg) * w0[j] * w0[l];
                                const double joint = a + b + c;
                                list.push_back(
                                    locate(psi_to_pi((a + b) / joint, mv.after_delta, p), mv.target, mv.prob * joint));
                            }
                        }
                    } else {
                        throw InvalidArgument("tiny DP handles at most one released sequencer sample");
                    }
                    break;
                }
                }
            }
        }
    }

    std::vector<std::vector<double>> j(ns, std::vector<double>(g));
    for (auto &row : j) {
        for (std::size_t k = 0; k < g; ++k) {
            row[k] = 1.0 - res.pi[k];
        }
    }
    std::vector<std::vector<double>> next = j;
    std::vector<std::vector<double>> cont(ns, std::vector<double>(g));
    double residual = 1.0;
    while (residual > tiny.tol) {
        if (res.iterations >= tiny.max_iterations) {
            throw NonConvergence("value iteration residual " + std::to_string(residual) + " above tolerance after " +
                                 std::to_string(res.iterations) + " iterations");
        }
        residual = 0.0;
        for (std::size_t s = 0; s < ns; ++s) {
            for (std::size_t k = 0; k < g; ++k) {
                double expect = 0.0;
                for (const Item &it : items[s][k]) {
                    const auto &row = j[static_cast<std::size_t>(it.target)];
                    const auto idx = static_cast<std::size_t>(it.idx);
                    expect += it.w * (row[idx] * (1.0 - it.frac) + row[idx + 1] * it.frac);
                }
                cont[s][k] = tiny.cost_c * res.pi[k] + expect;
                next[s][k] = std::min(1.0 - res.pi[k], cont[s][k]);
                residual = std::max(residual, std::abs(next[s][k] - j[s][k]));
            }
        }
        j.swap(next);
        res.residuals.push_back(residual);
        ++res.iterations;
    }
    res.residual_monotone = true;
    for (std::size_t i = 1; i < res.residuals.size(); ++i) {
        if (res.residuals[i] > res.residuals[i - 1] + 1e-15) {
            res.residual_monotone = false;
        }
    }

    res.threshold.assign(ns, 1.0);
    res.stop_region_upset.assign(ns, true);
    res.concave.assign(ns, true);
    res.kappa_bound_holds = true;
    for (std::size_t s = 0; s < ns; ++s) {
        bool found = false;
        for (std::size_t k = 0; k < g; ++k) {
            if (res.pi[k] + 1e-15 < res.reachable_floor[s]) {
                continue;
            }
            const bool stop = 1.0 - res.pi[k] <= cont[s][k];
            if (stop && !found) {
                res.threshold[s] = res.pi[k];
                found = true;
            } else if (!stop && found) {
                res.stop_region_upset[s] = false;
            }
            if (k >= 1 && k + 1 < g && res.pi[k - 1] + 1e-15 >= res.reachable_floor[s]) {
                if (j[s][k - 1] + j[s][k + 1] - 2.0 * j[s][k] > 1e-12) {
                    res.concave[s] = false;
                }
            }
        }
        if (res.states[s].queue.delta == 0 && cont[s][0] > 1.0 - p + 1e-12) {
            res.kappa_bound_holds = false;
        }
    }
    res.value = std::move(j);
    res.continue_cost = std::move(cont);
    return res;
}

void write_threshold_csv(std::ostream &out, const DpResult &result) {
    out << "# qcdnet-dp-thresholds v1\n";
    out << "state,slot,lambda,delta,W,R,reachable_floor,gamma,upset,concave\n";
    for (std::size_t s = 0; s < result.states.size(); ++s) {
        const QueueState &q = result.states[s].queue;
        std::string w, r;
        for (std::size_t i = 0; i < q.seq_queue.size(); ++i) {
            w += (i ? ";" : "") + std::to_string(q.seq_queue[i]);
            r += (i ? ";" : "") + std::to_string(static_cast<int>(q.received[i]));
        }
        out << '"' << result.states[s].label << "\"," << q.slot << ',' << q.lambda << ',' << q.delta << ',' << w
            << ',' << r << ',' << result.reachable_floor[s] << ',' << result.threshold[s] << ','
            << (result.stop_region_upset[s] ? 1 : 0) << ',' << (result.concave[s] ? 1 : 0) << '\n';
    }
}

} // namespace qcdnet
