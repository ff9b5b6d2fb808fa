#pragma once

#include "qcdnet/change_model.hpp"
#include "qcdnet/execution.hpp"
#include "qcdnet/random.hpp"
#include "qcdnet/stats.hpp"

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <span>
#include <vector>

namespace qcdnet {

/// Star network of N sensors sampling every `period` slots and sharing a
/// random-access channel with aggregate success rate sigma per slot.
struct NetConfig {
    int n_sensors = 10;
    int period = 34;
    double sigma = 0.3636;

    void validate() const;
    double rate() const { return 1.0 / static_cast<double>(period); }
};

/// Observable state of the queueing system at the beginning of slot `slot`:
/// slots to the next sampling instant, the batch the decision maker is
/// waiting for, that batch's age, per-node sequencer backlogs and which
/// components of the batch were already delivered. Sensor queue lengths are
/// not stored; they follow from these fields.
struct QueueState {
    Slot slot = 0;
    int lambda = 1;
    std::int64_t batch = 1;
    Slot delta = 0;
    std::vector<int> seq_queue;
    std::vector<std::uint8_t> received;

    int received_count() const;
    bool operator==(const QueueState &) const = default;
};

int lambda_at(Slot k, int period);

/// True when a batch is forked at slot k (k = b * period, b >= 1).
bool is_sampling_instant(Slot k, int period);

/// Batch `state.batch` was forked at exactly this slot and nothing older is
/// pending.
bool is_fresh_batch(const QueueState &state, const NetConfig &cfg);

/// Batch `state.batch` exists, i.e. it has been sampled and is not fully
/// delivered. False while the system is drained and waiting for the next
/// sampling instant.
bool batch_outstanding(const QueueState &state, const NetConfig &cfg);

struct Packet {
    std::int64_t batch = 0;
    double value = 0.0;
};

/// Packets waiting at the sensors and out-of-order packets parked at the
/// fusion-center sequencer, both FIFO per node.
struct SensorBuffers {
    std::vector<std::deque<Packet>> sensor;
    std::vector<std::deque<Packet>> sequencer;

    static SensorBuffers empty(int n_sensors);
};

/// Which of the three posterior-update cases a slot falls into.
enum class SlotEvent {
    no_delivery, // no success, or a later-batch packet parked at the sequencer
    partial,     // one component of the current batch, batch still incomplete
    completion,  // last component of the current batch plus any parked HOL packets
};

struct Delivery {
    int node = 0; // 1-based
    std::int64_t batch = 0;
    double value = 0.0;
};

/// Result of one slot: the successful node (0 for none) and the samples that
/// reach the decision maker at the beginning of the next slot.
struct SlotOutcome {
    int success_node = 0;
    SlotEvent event = SlotEvent::no_delivery;
    std::vector<Delivery> delivered;
    bool batch_completed = false;
};

QueueState initial_state(const NetConfig &cfg);

/// Backlog of sensor i (0-based) derived from the queue state.
int sensor_queue_length(const QueueState &state, const NetConfig &cfg, int i);
std::vector<int> sensor_queue_lengths(const QueueState &state, const NetConfig &cfg);

int num_contending(const QueueState &state, const NetConfig &cfg);

/// Successful node of the current slot: 0 w.p. 1 - sigma (or 1 if all
/// queues are empty), otherwise one of the nonempty nodes uniformly.
int draw_success(const QueueState &state, const NetConfig &cfg, Rng &rng);

/// Applies success `m` to the current slot and moves `state` and `buffers`
/// to the next slot. When the next slot is a sampling instant, `fresh`
/// must hold the N new sample values (node order); otherwise it must be
/// empty. Throws StateCorruption if the result violates conservation.
SlotOutcome advance(QueueState &state, SensorBuffers &buffers, int m, const NetConfig &cfg,
                    std::span<const double> fresh);

/// Checks the queue-state invariants against the buffers.
void check_conservation(const QueueState &state, const SensorBuffers &buffers, const NetConfig &cfg);

/// sigma - N / period; the fork-join system is stable iff this is positive.
double stability_margin(const NetConfig &cfg);

/// Throws StabilityError when stability_margin(cfg) <= 0.
void require_stable(const NetConfig &cfg);

struct SojournOptions {
    std::size_t replications = 20;
    std::size_t warmup_batches = 1000;
    std::size_t batches = 5000;
};

struct SojournEstimate {
    Estimate mean;                     // d(r), 95% CI across replications
    std::size_t batches_measured = 0;
    double max_delay = 0.0;
};

/// Stationary mean batch sojourn d(r) = E[U_b - t_b] by simulation of the
/// network alone. Independent replications are run and their means
/// combined into a t-interval.
SojournEstimate estimate_batch_sojourn(const NetConfig &cfg, const SojournOptions &options, std::uint64_t seed,
                                       Execution exec = Execution::parallel);

/// Per-slot CSV of a detector-free run of the network for debugging.
void write_network_trace(std::ostream &out, const NetConfig &cfg, Slot slots, std::uint64_t seed);

} // namespace qcdnet
