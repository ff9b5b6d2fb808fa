#include "qcdnet/random.hpp"

namespace qcdnet {

EpisodeStreams EpisodeStreams::for_episode(std::uint64_t master_seed, std::uint64_t episode) {
    return EpisodeStreams{
        Rng(derive_seed(master_seed, stream_tag::nature, episode)),
        Rng(derive_seed(master_seed, stream_tag::network, episode)),
    };
}

} // namespace qcdnet
