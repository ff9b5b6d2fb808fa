#include "qcdnet/simulator.hpp"

namespace qcdnet {

void draw_batch(const ObservationModel &obs, const NatureTrajectory &nature, Slot sample_slot, Rng &rng,
                std::vector<double> &out) {
    const int theta = nature.theta_at(sample_slot);
    for (double &x : out) {
        x = sample_observation(obs, theta, rng);
    }
}

JointSimulator::JointSimulator(const NetConfig &net, const ChangeSpec &change, const ObservationModel &obs,
                               EpisodeStreams &streams)
    : net_(net), obs_(obs), streams_(streams), queue_(initial_state(net)),
      buffers_(SensorBuffers::empty(net.n_sensors)), fresh_(static_cast<std::size_t>(net.n_sensors)) {
    nature_.change_time = sample_change_time(change, streams_.nature);
}

const SlotOutcome &JointSimulator::step() {
    const int m = draw_success(queue_, net_, streams_.network);
    const Slot next = queue_.slot + 1;
    if (is_sampling_instant(next, net_.period)) {
        draw_batch(obs_, nature_, next, streams_.nature, fresh_);
        generated_ += net_.n_sensors;
        last_ = advance(queue_, buffers_, m, net_, fresh_);
    } else {
        last_ = advance(queue_, buffers_, m, net_, {});
    }
    return last_;
}

} // namespace qcdnet
