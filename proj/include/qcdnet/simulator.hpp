#pragma once

#include "qcdnet/change_model.hpp"
#include "qcdnet/network.hpp"
#include "qcdnet/random.hpp"

#include <vector>

namespace qcdnet {

/// Nature and network of one episode stepped together. The change slot is
/// drawn first from the nature stream; the N observations of batch b are
/// drawn from the same stream at its fork slot, in batch order, so the
/// sample values never depend on the network stream.
class JointSimulator {
public:
    JointSimulator(const NetConfig &net, const ChangeSpec &change, const ObservationModel &obs,
                   EpisodeStreams &streams);

    Slot change_time() const { return nature_.change_time; }
    const QueueState &queue() const { return queue_; }
    const SensorBuffers &buffers() const { return buffers_; }
    std::int64_t samples_generated() const { return generated_; }

    /// Runs contention in the current slot and moves to the next one.
    const SlotOutcome &step();

private:
    NetConfig net_;
    ObservationModel obs_;
    EpisodeStreams &streams_;
    NatureTrajectory nature_;
    QueueState queue_;
    SensorBuffers buffers_;
    std::vector<double> fresh_;
    SlotOutcome last_;
    std::int64_t generated_ = 0;
};

/// Draws the N observations of the batch sampled at `sample_slot`.
void draw_batch(const ObservationModel &obs, const NatureTrajectory &nature, Slot sample_slot, Rng &rng,
                std::vector<double> &out);

} // namespace qcdnet
