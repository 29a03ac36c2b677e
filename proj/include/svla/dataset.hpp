#pragma once

#include <string>
#include <vector>

#include "svla/config.hpp"
#include "svla/sim.hpp"

namespace svla {

// Demonstration corpus produced by the scripted expert. Images, depths and
// masks are stored per step; the camera is per episode (it never moves
// within one). Pointmaps are not stored — they are recomputed from depth and
// camera on the fly, which keeps the file format minimal and guarantees the
// two stay consistent.
struct DatasetEpisode {
  Task task;
  CameraParams camera;
  MatrixXd actions;               // T×7, gripper column binary
  std::vector<Image> images;      // T side-camera frames
  std::vector<MatrixXd> depths;   // T range maps
  std::vector<MaskMatrix> masks;  // T validity masks (0/1)

  int length() const { return (int)actions.rows(); }
  Observation observation(int t) const;
};

struct Dataset {
  VariationSpec spec;
  int image_height = 0;
  int image_width = 0;
  int image_channels = 0;
  int chunk_size = 0;
  std::vector<DatasetEpisode> episodes;
};

// Generates `episodes` expert demonstrations. Episode i draws from the
// substream (seed, "episode", i); rare placement failures retry inside the
// same substream, so the output is a pure function of (spec, config, seed).
Dataset build_dataset(const VariationSpec& spec, int episodes, const Config& c,
                      uint64_t seed);

// layout (little-endian):
//   "SVLADSET" | u32 version | u32 H, W, channels, chunk | variation spec |
//   u64 episode count | per episode: task, camera, T, actions, then per
//   step the image planes, depth and mask, each with a trailing checksum
inline constexpr uint32_t kDatasetVersion = 1;

void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

// throws when the dataset dims disagree with the config
void check_dataset_matches(const Dataset& ds, const Config& c);

// rows t..t+chunk-1 of the action matrix; rows past the end repeat the
// final action (the expert holds its last pose)
MatrixXd chunk_targets(const DatasetEpisode& ep, int t, int chunk);

// observations t-window+1..t, clipped at the episode start, oldest first
std::vector<Observation> observation_window(const DatasetEpisode& ep, int t,
                                            int window);

}  // namespace svla
