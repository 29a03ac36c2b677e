#pragma once

#include <deque>
#include <string>
#include <vector>

#include "svla/checkpoint.hpp"
#include "svla/pipeline.hpp"
#include "svla/policy.hpp"
#include "svla/sim.hpp"

namespace svla {

// A policy stepped one action at a time by the rollout loop. reset() is
// called once per task with the privileged scene (only scripted policies
// look at it); next() sees exactly what a deployed policy would — the
// rendered observation.
class StepPolicy {
 public:
  virtual ~StepPolicy() = default;
  virtual void reset(const Scene& scene, const Task& task) = 0;
  virtual Eigen::Matrix<double, 7, 1> next(const Observation& obs) = 0;
};

// Checkpoint-driven policy with chunked execution.
//   full_chunk: predict a chunk, execute all C actions, re-plan.
//   ensemble:   predict every step, execute the element-wise average of all
//               live chunks' entries for the current step.
// With C = 1 the two modes take identical actions.
class ChunkPolicy : public StepPolicy {
 public:
  ChunkPolicy(const ParameterStore& params, const Config& config,
              bool use_spatial, GateSetting gates, ExecutionMode mode);
  void reset(const Scene& scene, const Task& task) override;
  Eigen::Matrix<double, 7, 1> next(const Observation& obs) override;

 private:
  MatrixXd predict_chunk();

  const ParameterStore& params_;
  Config config_;
  bool use_spatial_;
  GateSetting gates_;
  ExecutionMode mode_;
  std::deque<Observation> history_;
  std::deque<MatrixXd> live_chunks_;  // ensemble, newest last
  MatrixXd active_chunk_;             // full_chunk
  int cursor_ = 0;
};

// replays the scripted expert's action sequence; holds the last action if
// stepped past the plan's end
class ExpertReplayPolicy : public StepPolicy {
 public:
  ExpertReplayPolicy(int chunk_size, int image_h, int image_w)
      : chunk_size_(chunk_size), image_h_(image_h), image_w_(image_w) {}
  void reset(const Scene& scene, const Task& task) override;
  Eigen::Matrix<double, 7, 1> next(const Observation& obs) override;

 private:
  int chunk_size_, image_h_, image_w_;
  MatrixXd plan_;
  int cursor_ = 0;
};

// parks at home with the gripper open forever; the do-nothing control
class NeverGraspPolicy : public StepPolicy {
 public:
  void reset(const Scene&, const Task&) override {}
  Eigen::Matrix<double, 7, 1> next(const Observation&) override;
};

struct RolloutResult {
  bool success = false;
  int steps = 0;  // actions executed (to success, or the full budget)
  Scene final_scene;
};

// Steps the policy until success or the budget runs out; success is checked
// after every action so later mistakes cannot undo a recorded success.
RolloutResult rollout(const Scene& scene, const Task& task, StepPolicy& policy,
                      int max_steps, int image_h, int image_w);

struct EvalReport {
  int episodes = 0;
  int successes = 0;
  double success_rate = 0;
  std::vector<int> outcome;  // per-episode 0/1, in episode order
  std::vector<int> steps;
};

// Episode i draws its scene and task from the substream (seed, "eval", i),
// so two policies evaluated with the same seed face identical episodes.
EvalReport evaluate(StepPolicy& policy, const VariationSpec& spec,
                    int episodes, uint64_t seed, int max_steps, int image_h,
                    int image_w);

// Runs the chain until the first failed task; between tasks the gripper
// opens in place and parks at home. Returns completed task count in [0, 5].
int chain_length(StepPolicy& policy, Scene scene,
                 const std::vector<Task>& chain, int max_steps_per_task,
                 int image_h, int image_w);

// --- ablations -------------------------------------------------------------

struct AblationCell {
  std::string label;
  GateSetting gates;
  std::vector<double> per_seed;  // success rate per evaluation seed
  double mean = 0;
  double se = 0;  // standard error over seeds
};

struct AblationMatrix {
  std::vector<AblationCell> cells;
};

// evaluates one trained checkpoint under forced gate settings
// (0,0), (1,0), (1,1); every cell sees identical episodes per seed
AblationMatrix run_modality_ablation(const Checkpoint& ckpt,
                                     const VariationSpec& spec,
                                     const std::vector<uint64_t>& seeds,
                                     int episodes, int max_steps);

// trains stage1+stage2 once per fusion strategy from the same pretrained
// checkpoints, then evaluates all three on identical episodes
AblationMatrix run_fusion_ablation(const Dataset& ds,
                                   const Checkpoint& baseline,
                                   const Checkpoint& esm, const Config& c,
                                   const VariationSpec& spec,
                                   const std::vector<uint64_t>& seeds,
                                   int episodes, int max_steps,
                                   const StageOptions& opt = {});

std::string ablation_to_jsonl(const AblationMatrix& m);
std::string ablation_to_table(const AblationMatrix& m);

// Mean absolute relative depth error |pred - gt| / gt of the spatial
// encoder's depth head over freshly generated scenes, with the depth
// condition forced on or off.
double esm_depth_abs_rel(const ParameterStore& params, const Config& c,
                         const VariationSpec& spec, int scenes, uint64_t seed,
                         int b_d);

// stage2/stage1 checkpoints carry the spatial pathway; pretrain_vla does not
bool infer_use_spatial(const Checkpoint& ckpt);

}  // namespace svla
