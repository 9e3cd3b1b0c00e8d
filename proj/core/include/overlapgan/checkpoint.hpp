#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "overlapgan/adam.hpp"
#include "overlapgan/nets.hpp"
#include "overlapgan/rng.hpp"

namespace ogan {

// On-disk training state: models, per-parameter Adam moments, RNG stream
// counters, and the iteration. Canonical JSON, bit-exact across a load/save
// round trip.
struct Checkpoint {
  int format_version = 1;
  ModelBundle models;
  // Keyed by parameter name; aligned with named_params(models).
  std::map<std::string, AdamState> adam_state;
  std::map<std::string, std::uint64_t> rng_stream_positions;
  std::int64_t iteration = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ogan
