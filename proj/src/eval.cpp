#include "svla/eval.hpp"

#include <cmath>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace svla {

namespace {
using json = nlohmann::ordered_json;

// scene + task generation shared by evaluate(); retries stay inside the
// episode's own substream so results are a pure function of (seed, index)
std::pair<Scene, Task> draw_episode(const VariationSpec& spec, uint64_t seed,
                                    uint64_t index) {
  Rng rng = Rng::derive(seed, "eval", index);
  for (int attempt = 0; attempt < 64; ++attempt) {
    try {
      Scene scene = generate_scene(spec, rng);
      TaskKind kind = spec.kinds[rng.uniform_int(spec.kinds.size())];
      Task task = sample_task(scene, kind, rng);
      return {std::move(scene), std::move(task)};
    } catch (const std::runtime_error&) {
    }
  }
  throw std::runtime_error("failed to draw evaluation episode " +
                           std::to_string(index));
}

double vector_mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0 : s / v.size();
}

double vector_se(const std::vector<double>& v) {
  if (v.size() < 2) return 0;
  double m = vector_mean(v);
  double acc = 0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / (v.size() - 1)) / std::sqrt((double)v.size());
}

}  // namespace

ChunkPolicy::ChunkPolicy(const ParameterStore& params, const Config& config,
                         bool use_spatial, GateSetting gates,
                         ExecutionMode mode)
    : params_(params),
      config_(config),
      use_spatial_(use_spatial),
      gates_(gates),
      mode_(mode) {}

void ChunkPolicy::reset(const Scene&, const Task&) {
  history_.clear();
  live_chunks_.clear();
  active_chunk_.resize(0, 0);
  cursor_ = 0;
}

MatrixXd ChunkPolicy::predict_chunk() {
  Graph g;
  std::vector<Observation> window(history_.begin(), history_.end());
  PolicyOutput out =
      policy_forward(g, params_, config_, window, gates_, use_spatial_);
  return out.chunk.values;
}

Eigen::Matrix<double, 7, 1> ChunkPolicy::next(const Observation& obs) {
  history_.push_back(obs);
  while ((int)history_.size() > config_.window) history_.pop_front();
  if (mode_ == ExecutionMode::full_chunk) {
    if (active_chunk_.rows() == 0 || cursor_ >= active_chunk_.rows()) {
      active_chunk_ = predict_chunk();
      cursor_ = 0;
    }
    return active_chunk_.row(cursor_++).transpose();
  }
  // ensemble: one new chunk per step, average entries that cover this step
  live_chunks_.push_back(predict_chunk());
  while ((int)live_chunks_.size() > config_.chunk_size)
    live_chunks_.pop_front();
  Eigen::Matrix<double, 7, 1> action = Eigen::Matrix<double, 7, 1>::Zero();
  int n = (int)live_chunks_.size();
  for (int age = 0; age < n; ++age) {
    // the chunk predicted `age` steps ago covers this step at row `age`
    action += live_chunks_[(size_t)(n - 1 - age)].row(age).transpose();
  }
  return action / n;
}

void ExpertReplayPolicy::reset(const Scene& scene, const Task& task) {
  Episode ep = expert_policy(scene, task, chunk_size_, image_h_, image_w_);
  plan_ = ep.actions;
  cursor_ = 0;
}

Eigen::Matrix<double, 7, 1> ExpertReplayPolicy::next(const Observation&) {
  int row = std::min<int>(cursor_, (int)plan_.rows() - 1);
  ++cursor_;
  return plan_.row(row).transpose();
}

Eigen::Matrix<double, 7, 1> NeverGraspPolicy::next(const Observation&) {
  Eigen::Matrix<double, 7, 1> a = Eigen::Matrix<double, 7, 1>::Zero();
  a[0] = kHomeX;
  a[1] = kHomeY;
  a[2] = kZHome;
  return a;
}

RolloutResult rollout(const Scene& scene, const Task& task, StepPolicy& policy,
                      int max_steps, int image_h, int image_w) {
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  policy.reset(scene, task);
  RolloutResult result;
  result.final_scene = scene;
  for (int t = 0; t < max_steps; ++t) {
    Observation obs =
        make_observation(result.final_scene, task, t, image_h, image_w);
    Eigen::Matrix<double, 7, 1> action = policy.next(obs);
    result.final_scene = step(result.final_scene, action);
    result.steps = t + 1;
    if (success(result.final_scene, task)) {
      result.success = true;
      return result;
    }
  }
  return result;
}

EvalReport evaluate(StepPolicy& policy, const VariationSpec& spec,
                    int episodes, uint64_t seed, int max_steps, int image_h,
                    int image_w) {
  if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  EvalReport report;
  report.episodes = episodes;
  for (int i = 0; i < episodes; ++i) {
    auto [scene, task] = draw_episode(spec, seed, (uint64_t)i);
    RolloutResult r = rollout(scene, task, policy, max_steps, image_h, image_w);
    report.outcome.push_back(r.success ? 1 : 0);
    report.steps.push_back(r.steps);
    if (r.success) ++report.successes;
  }
  report.success_rate = (double)report.successes / report.episodes;
  return report;
}

int chain_length(StepPolicy& policy, Scene scene,
                 const std::vector<Task>& chain, int max_steps_per_task,
                 int image_h, int image_w) {
  int completed = 0;
  for (const Task& task : chain) {
    RolloutResult r =
        rollout(scene, task, policy, max_steps_per_task, image_h, image_w);
    if (!r.success) break;
    ++completed;
    // settle: open in place (dropping anything held), then park at home
    scene = r.final_scene;
    Eigen::Matrix<double, 7, 1> open = Eigen::Matrix<double, 7, 1>::Zero();
    open[0] = scene.gripper->x;
    open[1] = scene.gripper->y;
    open[2] = scene.gripper->z;
    scene = step(scene, open);
    Eigen::Matrix<double, 7, 1> home = Eigen::Matrix<double, 7, 1>::Zero();
    home[0] = kHomeX;
    home[1] = kHomeY;
    home[2] = kZHome;
    scene = step(scene, home);
  }
  return completed;
}

bool infer_use_spatial(const Checkpoint& ckpt) {
  return ckpt.params.has("adapter.fc1.w");
}

AblationMatrix run_modality_ablation(const Checkpoint& ckpt,
                                     const VariationSpec& spec,
                                     const std::vector<uint64_t>& seeds,
                                     int episodes, int max_steps) {
  if (!infer_use_spatial(ckpt)) {
    throw std::invalid_argument(
        "modality ablation needs a checkpoint with the spatial pathway");
  }
  const Config& c = ckpt.config;
  struct RowSpec {
    const char* label;
    GateSetting gates;
  };
  const RowSpec rows[] = {{"no_condition", {0, 0}},
                          {"depth", {1, 0}},
                          {"depth+pose", {1, 1}}};
  AblationMatrix m;
  for (const RowSpec& row : rows) {
    AblationCell cell;
    cell.label = row.label;
    cell.gates = row.gates;
    for (uint64_t seed : seeds) {
      ChunkPolicy policy(ckpt.params, c, /*use_spatial=*/true, row.gates,
                         c.execution_mode);
      EvalReport rep = evaluate(policy, spec, episodes, seed, max_steps,
                                c.image_height, c.image_width);
      cell.per_seed.push_back(rep.success_rate);
    }
    cell.mean = vector_mean(cell.per_seed);
    cell.se = vector_se(cell.per_seed);
    m.cells.push_back(std::move(cell));
  }
  return m;
}

AblationMatrix run_fusion_ablation(const Dataset& ds,
                                   const Checkpoint& baseline,
                                   const Checkpoint& esm, const Config& c,
                                   const VariationSpec& spec,
                                   const std::vector<uint64_t>& seeds,
                                   int episodes, int max_steps,
                                   const StageOptions& opt) {
  AblationMatrix m;
  for (FusionMode mode :
       {FusionMode::addition, FusionMode::film, FusionMode::cross_attention}) {
    Config cm = c;
    cm.fusion_mode = mode;
    Checkpoint s1 = stage1(ds, baseline, esm, cm, opt);
    Checkpoint s2 = stage2(ds, s1, cm, opt);
    AblationCell cell;
    cell.label = to_string(mode);
    cell.gates = {1, 1};
    for (uint64_t seed : seeds) {
      ChunkPolicy policy(s2.params, cm, /*use_spatial=*/true, cell.gates,
                         cm.execution_mode);
      EvalReport rep = evaluate(policy, spec, episodes, seed, max_steps,
                                cm.image_height, cm.image_width);
      cell.per_seed.push_back(rep.success_rate);
    }
    cell.mean = vector_mean(cell.per_seed);
    cell.se = vector_se(cell.per_seed);
    m.cells.push_back(std::move(cell));
  }
  return m;
}

std::string ablation_to_jsonl(const AblationMatrix& m) {
  std::ostringstream out;
  for (const AblationCell& cell : m.cells) {
    json rec{{"row", cell.label},
             {"depth_gate", cell.gates.b_d},
             {"pose_gate", cell.gates.b_p},
             {"per_seed", cell.per_seed},
             {"mean", cell.mean},
             {"se", cell.se}};
    out << rec.dump() << "\n";
  }
  return out.str();
}

std::string ablation_to_table(const AblationMatrix& m) {
  std::ostringstream out;
  out << "row            gates   mean     se      per-seed\n";
  for (const AblationCell& cell : m.cells) {
    char head[64];
    std::snprintf(head, sizeof(head), "%-14s (%d,%d)   %.4f   %.4f  ",
                  cell.label.c_str(), cell.gates.b_d, cell.gates.b_p,
                  cell.mean, cell.se);
    out << head;
    for (double r : cell.per_seed) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), " %.2f", r);
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

double esm_depth_abs_rel(const ParameterStore& params, const Config& c,
                         const VariationSpec& spec, int scenes, uint64_t seed,
                         int b_d) {
  if (scenes < 1) throw std::invalid_argument("scenes must be >= 1");
  double total = 0;
  for (int i = 0; i < scenes; ++i) {
    Rng rng = Rng::derive(seed, "absrel", (uint64_t)i);
    Scene scene = generate_scene(spec, rng);
    RenderResult rr = render(scene, c.image_height, c.image_width);
    Observation obs;
    obs.side_image = rr.rgb;
    obs.depth = rr.depth;
    obs.depth_valid = rr.valid;
    obs.camera = rr.camera;
    obs.instruction = {0};
    Graph g;
    EsmEncoding enc = esm_forward(g, params, c, obs, b_d, /*b_p=*/0);
    ReconOutput out = recon_to_output(reconstruct(g, params, c, enc), c);
    double err = 0;
    int count = 0;
    for (int r = 0; r < rr.depth.rows(); ++r) {
      for (int col = 0; col < rr.depth.cols(); ++col) {
        if (rr.valid(r, col) == 0 || rr.depth(r, col) <= 0) continue;
        err += std::abs(out.depth(r, col) - rr.depth(r, col)) /
               rr.depth(r, col);
        ++count;
      }
    }
    if (count == 0) throw std::runtime_error("no valid depth in scene");
    total += err / count;
  }
  return total / scenes;
}

}  // namespace svla
