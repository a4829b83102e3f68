#pragma once

#include <string>
#include <string_view>

#include "dagpo/denoiser.hpp"
#include "dagpo/search_space.hpp"

namespace dagpo {

// Everything needed to resume training exactly where it stopped: network,
// optimizer moments, rng state, epoch counter, and the space/schedule the
// network was built for.
struct Checkpoint {
    SpaceSpec space;
    int schedule_T = 800;
    double schedule_s = 0.008;
    DenoiserParams params;
    AdamW optimizer;
    std::string rng_state;
    int epoch = 0;
};

// Versioned little-endian binary encoding; weights are raw IEEE-754 64-bit
// words, so a round trip is bit-exact. Deserialization throws CheckpointError
// on bad magic, unknown version, truncation, or trailing bytes.
std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(std::string_view bytes);

// File forms of the above. Throw IoError on filesystem failures.
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace dagpo
