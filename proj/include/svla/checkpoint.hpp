#pragma once

#include <string>

#include "svla/config.hpp"
#include "svla/param_store.hpp"

namespace svla {

// On-disk model snapshot. The file embeds the full config text and the stage
// that produced it, so evaluation can rebuild the right architecture and
// decide whether the spatial pathway exists without side channels.
//
// layout (little-endian):
//   "SVLACKPT" | u32 version | stage string | u64 step | config text |
//   u64 tensor count | per tensor: name, group, u64 rows, u64 cols,
//   row-major f64 payload + u64 checksum
struct Checkpoint {
  ParameterStore params;
  Config config;
  std::string stage;  // "pretrain_vla", "pretrain_esm", "stage1", "stage2"
  uint64_t step = 0;
};

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Verifies that every tensor in `reference` exists in `loaded` with the same
// shape (and vice versa for the given groups). Throws naming the first
// offending tensor; used by training stages before merging checkpoints.
void check_compatible(const ParameterStore& loaded,
                      const ParameterStore& reference,
                      const std::string& what);

}  // namespace svla
