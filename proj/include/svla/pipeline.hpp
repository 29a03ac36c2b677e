#pragma once

#include <iosfwd>
#include <string>

#include "svla/checkpoint.hpp"
#include "svla/config.hpp"
#include "svla/dataset.hpp"
#include "svla/policy.hpp"

namespace svla {

// Training stages. Each stage is a pure function of (dataset, input
// checkpoints, config): it derives every random stream from config.seed, so
// rerunning a stage reproduces its checkpoint bit for bit. Freezing is
// structural — the optimizer only ever touches the stage's trainable
// partition, so frozen tensors keep their exact bits.
//
//   pretrain_vla : backbone + action head, no spatial pathway
//   pretrain_esm : spatial encoder alone, reconstruction losses
//   stage1       : adapter only, on top of frozen merged checkpoints
//   stage2       : backbone + adapter, head and spatial encoder frozen

struct StageOptions {
  std::ostream* log = nullptr;  // line-delimited progress records, optional
  int log_every = 100;
  int override_steps = -1;      // >= 0 replaces the config step count
};

Checkpoint pretrain_vla(const Dataset& ds, const Config& c,
                        const StageOptions& opt = {});
Checkpoint pretrain_esm(const Dataset& ds, const Config& c,
                        const StageOptions& opt = {});
// merges the spatial-free policy and the spatial encoder, adds a fresh
// zero-initialized adapter, and trains only the adapter. Shape-checks both
// inputs against the config's architecture, naming any offending tensor.
Checkpoint stage1(const Dataset& ds, const Checkpoint& baseline,
                  const Checkpoint& esm, const Config& c,
                  const StageOptions& opt = {});
Checkpoint stage2(const Dataset& ds, const Checkpoint& after_stage1,
                  const Config& c, const StageOptions& opt = {});

// Mean composite loss over `samples` uniformly drawn (episode, step) pairs;
// evaluation only, the store is untouched. Gates are drawn per sample from
// Bernoulli(config.bernoulli_p) when use_spatial is set.
double mean_composite_loss(const Dataset& ds, const ParameterStore& s,
                           const Config& c, bool use_spatial, uint64_t seed,
                           int samples);

// ground-truth pointmap rows (M × 3·patch², x/y/z side by side) for the
// reconstruction loss, computed from depth + camera
MatrixXd gt_pointmap_rows(const MatrixXd& depth, const MaskMatrix& valid,
                          const CameraParams& camera, int patch);

// expected tensor sets (shapes only) for compatibility checks
ParameterStore policy_skeleton(const Config& c, bool use_spatial);
ParameterStore esm_skeleton(const Config& c);

}  // namespace svla
