#include "qcdnet/network.hpp"

#include "qcdnet/errors.hpp"

#include <algorithm>
#include <ostream>
#include <string>

namespace qcdnet {

void NetConfig::validate() const {
    if (n_sensors < 1) {
        throw InvalidArgument("net.n_sensors must be >= 1");
    }
    if (period < 1) {
        throw InvalidArgument("net.period must be >= 1");
    }
    if (!(sigma > 0.0 && sigma < 1.0)) {
        throw InvalidArgument("net.sigma must lie in (0, 1)");
    }
}

int QueueState::received_count() const {
    int total = 0;
    for (auto r : received) {
        total += r;
    }
    return total;
}

int lambda_at(Slot k, int period) {
    return period - static_cast<int>(k % period);
}

bool is_sampling_instant(Slot k, int period) {
    return k > 0 && k % period == 0;
}

bool is_fresh_batch(const QueueState &state, const NetConfig &cfg) {
    // At k = 0 lambda equals the period too, but no sample exists yet.
    return state.delta == 0 && state.lambda == cfg.period && state.slot > 0;
}

bool batch_outstanding(const QueueState &state, const NetConfig &cfg) {
    return state.delta > 0 || is_fresh_batch(state, cfg);
}

SensorBuffers SensorBuffers::empty(int n_sensors) {
    SensorBuffers b;
    b.sensor.resize(static_cast<std::size_t>(n_sensors));
    b.sequencer.resize(static_cast<std::size_t>(n_sensors));
    return b;
}

QueueState initial_state(const NetConfig &cfg) {
    cfg.validate();
    QueueState q;
    q.slot = 0;
    q.lambda = cfg.period;
    q.batch = 1;
    q.delta = 0;
    q.seq_queue.assign(static_cast<std::size_t>(cfg.n_sensors), 0);
    q.received.assign(static_cast<std::size_t>(cfg.n_sensors), 0);
    return q;
}

int sensor_queue_length(const QueueState &state, const NetConfig &cfg, int i) {
    if (state.delta > 0) {
        const auto idx = static_cast<std::size_t>(i);
        const Slot total = state.delta / cfg.period + 1 - state.received[idx] - state.seq_queue[idx];
        if (total < 0) {
            throw StateCorruption("negative sensor backlog for node " + std::to_string(i + 1) + " at slot " +
                                  std::to_string(state.slot));
        }
        return static_cast<int>(total);
    }
    return is_fresh_batch(state, cfg) ? 1 : 0;
}

std::vector<int> sensor_queue_lengths(const QueueState &state, const NetConfig &cfg) {
    std::vector<int> lengths(static_cast<std::size_t>(cfg.n_sensors));
    for (int i = 0; i < cfg.n_sensors; ++i) {
        lengths[static_cast<std::size_t>(i)] = sensor_queue_length(state, cfg, i);
    }
    return lengths;
}

int num_contending(const QueueState &state, const NetConfig &cfg) {
    if (state.delta == 0) {
        return is_fresh_batch(state, cfg) ? cfg.n_sensors : 0;
    }
    int count = 0;
    for (int i = 0; i < cfg.n_sensors; ++i) {
        count += sensor_queue_length(state, cfg, i) > 0 ? 1 : 0;
    }
    return count;
}

int draw_success(const QueueState &state, const NetConfig &cfg, Rng &rng) {
    const int contending = num_contending(state, cfg);
    if (contending == 0) {
        return 0;
    }
    const double u = uniform01(rng);
    if (u >= cfg.sigma) {
        return 0;
    }
    // u / sigma is uniform on [0, 1) given a success.
    const int pick = std::min(static_cast<int>(u / cfg.sigma * contending), contending - 1);
    int seen = 0;
    for (int i = 0; i < cfg.n_sensors; ++i) {
        if (sensor_queue_length(state, cfg, i) > 0) {
            if (seen == pick) {
                return i + 1;
            }
            ++seen;
        }
    }
    throw StateCorruption("contending node count changed while drawing a success");
}

SlotOutcome advance(QueueState &state, SensorBuffers &buffers, int m, const NetConfig &cfg,
                    std::span<const double> fresh) {
    const int n = cfg.n_sensors;
    if (m < 0 || m > n) {
        throw InvalidArgument("success index out of range: " + std::to_string(m));
    }
    SlotOutcome out;
    out.success_node = m;

    if (m > 0) {
        const auto j = static_cast<std::size_t>(m - 1);
        auto &queue = buffers.sensor[j];
        if (queue.empty()) {
            throw OutcomeMismatch("success attributed to node " + std::to_string(m) + " with an empty queue");
        }
        const Packet pkt = queue.front();
        queue.pop_front();

        if (state.received[j] != 0) {
            // Out-of-sequence packet from a later batch: park it.
            if (pkt.batch <= state.batch) {
                throw StateCorruption("parked packet does not belong to a later batch");
            }
            buffers.sequencer[j].push_back(pkt);
            state.seq_queue[j] += 1;
            out.event = SlotEvent::no_delivery;
        } else {
            if (pkt.batch != state.batch) {
                throw StateCorruption("head-of-line packet of node " + std::to_string(m) + " is from batch " +
                                      std::to_string(pkt.batch) + ", expected " + std::to_string(state.batch));
            }
            out.delivered.push_back({m, pkt.batch, pkt.value});
            if (state.received_count() < n - 1) {
                state.received[j] = 1;
                out.event = SlotEvent::partial;
            } else {
                for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
                    if (state.seq_queue[i] > 0) {
                        const Packet hol = buffers.sequencer[i].front();
                        buffers.sequencer[i].pop_front();
                        if (hol.batch != state.batch + 1) {
                            throw StateCorruption("sequencer head is not from the next batch");
                        }
                        out.delivered.push_back({static_cast<int>(i) + 1, hol.batch, hol.value});
                        state.seq_queue[i] -= 1;
                        state.received[i] = 1;
                    } else {
                        state.received[i] = 0;
                    }
                }
                state.batch += 1;
                out.event = SlotEvent::completion;
                out.batch_completed = true;
            }
        }
    }

    state.slot += 1;
    state.lambda = lambda_at(state.slot, cfg.period);
    state.delta = std::max<Slot>(state.slot - state.batch * cfg.period, 0);

    if (is_sampling_instant(state.slot, cfg.period)) {
        if (fresh.size() != static_cast<std::size_t>(n)) {
            throw InvalidArgument("sampling instant needs exactly one fresh value per sensor");
        }
        const std::int64_t b = state.slot / cfg.period;
        for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
            buffers.sensor[i].push_back({b, fresh[i]});
        }
    } else if (!fresh.empty()) {
        throw InvalidArgument("fresh values supplied at a slot that is not a sampling instant");
    }

    check_conservation(state, buffers, cfg);
    return out;
}

void check_conservation(const QueueState &state, const SensorBuffers &buffers, const NetConfig &cfg) {
    const auto fail = [&](const std::string &what) {
        throw StateCorruption(what + " at slot " + std::to_string(state.slot));
    };
    if (state.lambda != lambda_at(state.slot, cfg.period)) {
        fail("lambda out of step with the slot counter");
    }
    if (state.delta != std::max<Slot>(state.slot - state.batch * cfg.period, 0)) {
        fail("delta inconsistent with batch index");
    }
    for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.n_sensors); ++i) {
        if (state.received[i] == 0 && state.seq_queue[i] != 0) {
            fail("sequencer holds packets for a node whose current component is missing");
        }
        if (state.delta == 0 && (state.received[i] != 0 || state.seq_queue[i] != 0)) {
            fail("drained system with nonzero sequencer state");
        }
        const int expected_l = sensor_queue_length(state, cfg, static_cast<int>(i));
        if (static_cast<std::size_t>(expected_l) != buffers.sensor[i].size()) {
            fail("sensor " + std::to_string(i + 1) + " backlog " + std::to_string(buffers.sensor[i].size()) +
                 " disagrees with derived length " + std::to_string(expected_l));
        }
        if (static_cast<std::size_t>(state.seq_queue[i]) != buffers.sequencer[i].size()) {
            fail("sequencer length mismatch for node " + std::to_string(i + 1));
        }
    }
}

double stability_margin(const NetConfig &cfg) {
    return cfg.sigma - static_cast<double>(cfg.n_sensors) / static_cast<double>(cfg.period);
}

void require_stable(const NetConfig &cfg) {
    const double margin = stability_margin(cfg);
    if (margin <= 0.0) {
        throw StabilityError("unstable network: N/period = " +
                             std::to_string(static_cast<double>(cfg.n_sensors) / cfg.period) +
                             " >= sigma = " + std::to_string(cfg.sigma) +
                             "; the batch sojourn time has no finite stationary mean unless N*r < sigma");
    }
}

namespace {

// Mean sojourn of batches warmup+1 .. warmup+batches of one run from empty.
double sojourn_replication(const NetConfig &cfg, const SojournOptions &options, std::uint64_t seed,
                           double &max_delay) {
    Rng rng(seed);
    QueueState q = initial_state(cfg);
    SensorBuffers buffers = SensorBuffers::empty(cfg.n_sensors);
    const std::vector<double> zeros(static_cast<std::size_t>(cfg.n_sensors), 0.0);
    const std::size_t target = options.warmup_batches + options.batches;
    std::size_t completed = 0;
    double sum = 0.0;
    while (completed < target) {
        const int m = draw_success(q, cfg, rng);
        const bool sample_next = is_sampling_instant(q.slot + 1, cfg.period);
        const std::int64_t b = q.batch;
        const SlotOutcome out = advance(q, buffers, m, cfg, sample_next ? std::span<const double>(zeros)
                                                                        : std::span<const double>());
        if (out.batch_completed) {
            ++completed;
            if (completed > options.warmup_batches) {
                const double d = static_cast<double>(q.slot - b * cfg.period);
                sum += d;
                max_delay = std::max(max_delay, d);
            }
        }
    }
    return sum / static_cast<double>(options.batches);
}

} // namespace

SojournEstimate estimate_batch_sojourn(const NetConfig &cfg, const SojournOptions &options, std::uint64_t seed,
                                       Execution exec) {
    cfg.validate();
    require_stable(cfg);
    if (options.replications < 2 || options.batches == 0) {
        throw InvalidArgument("sojourn estimation needs >= 2 replications and >= 1 measured batch");
    }
    std::vector<double> means(options.replications);
    std::vector<double> maxima(options.replications, 0.0);
    for_each_index(options.replications, exec, [&](std::size_t r) {
        means[r] = sojourn_replication(cfg, options, derive_seed(seed, stream_tag::sojourn, r), maxima[r]);
    });
    SojournEstimate est;
    est.mean = mean_ci(means);
    est.batches_measured = options.replications * options.batches;
    est.max_delay = *std::max_element(maxima.begin(), maxima.end());
    return est;
}

void write_network_trace(std::ostream &out, const NetConfig &cfg, Slot slots, std::uint64_t seed) {
    cfg.validate();
    Rng rng(derive_seed(seed, stream_tag::network));
    QueueState q = initial_state(cfg);
    SensorBuffers buffers = SensorBuffers::empty(cfg.n_sensors);
    const std::vector<double> zeros(static_cast<std::size_t>(cfg.n_sensors), 0.0);

    out << "k,lambda,batch,delta";
    for (const char *prefix : {"W", "R", "L"}) {
        for (int i = 1; i <= cfg.n_sensors; ++i) {
            out << ',' << prefix << i;
        }
    }
    out << ",M_k,delivered\n";

    for (Slot k = 0; k < slots; ++k) {
        const int m = draw_success(q, cfg, rng);
        out << q.slot << ',' << q.lambda << ',' << q.batch << ',' << q.delta;
        for (int w : q.seq_queue) {
            out << ',' << w;
        }
        for (auto r : q.received) {
            out << ',' << static_cast<int>(r);
        }
        for (int l : sensor_queue_lengths(q, cfg)) {
            out << ',' << l;
        }
        const bool sample_next = is_sampling_instant(q.slot + 1, cfg.period);
        const SlotOutcome o =
            advance(q, buffers, m, cfg, sample_next ? std::span<const double>(zeros) : std::span<const double>());
        out << ',' << m << ',' << o.delivered.size() << '\n';
    }
}

} // namespace qcdnet
