#include "svla/pipeline.hpp"

#include <json.hpp>
#include <ostream>
#include <stdexcept>

#include "svla/optimizer.hpp"

namespace svla {

namespace {

using json = nlohmann::ordered_json;

struct Sample {
  const DatasetEpisode* ep;
  int t;
  GateSetting gates;
  int dx = 0, dy = 0;  // training-time translation, pixels
};

Sample draw_sample(const Dataset& ds, const Config& c, Rng& rng,
                   bool with_gates, bool with_shift) {
  Sample s;
  s.ep = &ds.episodes[rng.uniform_int(ds.episodes.size())];
  s.t = (int)rng.uniform_int((uint64_t)s.ep->length());
  if (with_gates) {
    s.gates.b_d = rng.bernoulli(c.bernoulli_p);
    s.gates.b_p = rng.bernoulli(c.bernoulli_p);
  }
  if (with_shift && c.augment_shift > 0) {
    const int span = 2 * c.augment_shift + 1;
    s.dx = (int)rng.uniform_int((uint64_t)span) - c.augment_shift;
    s.dy = (int)rng.uniform_int((uint64_t)span) - c.augment_shift;
  }
  return s;
}

MatrixXd shift_plane(const MatrixXd& m, int dx, int dy, double fill) {
  MatrixXd out = MatrixXd::Constant(m.rows(), m.cols(), fill);
  for (int i = 0; i < m.rows(); ++i) {
    const int si = i - dy;
    if (si < 0 || si >= m.rows()) continue;
    for (int j = 0; j < m.cols(); ++j) {
      const int sj = j - dx;
      if (sj >= 0 && sj < m.cols()) out(i, j) = m(si, sj);
    }
  }
  return out;
}

// Rigid in-plane translation of an observation. The camera looks straight
// down, so shifting pixels by (dx, dy) matches shifting the scene by
// (dx/W, dy/H) in the world; revealed border pixels become background in the
// color planes and invalid in the depth mask. The wrist view (if any) moves
// with the gripper and is left untouched.
Observation shift_observation(Observation obs, int dx, int dy) {
  if (dx == 0 && dy == 0) return obs;
  for (MatrixXd& p : obs.side_image.planes) p = shift_plane(p, dx, dy, 0.0);
  if (obs.depth) *obs.depth = shift_plane(*obs.depth, dx, dy, 0.0);
  if (obs.depth_valid) *obs.depth_valid = shift_plane(*obs.depth_valid, dx, dy, 0.0);
  return obs;
}

// one behavior-cloning step over a uniform batch; returns (loss, mse, bce)
struct BcStats {
  double loss, mse, bce;
};

BcStats bc_batch(Graph& g, const Dataset& ds, const ParameterStore& s,
                 const Config& c, Rng& rng, bool use_spatial, Var& total_out) {
  Var total;
  double mse_sum = 0, bce_sum = 0;
  for (int b = 0; b < c.batch_size; ++b) {
    Sample smp = draw_sample(ds, c, rng, use_spatial, /*with_shift=*/true);
    auto window = observation_window(*smp.ep, smp.t, c.window);
    for (Observation& o : window) o = shift_observation(std::move(o), smp.dx, smp.dy);
    PolicyOutput out =
        policy_forward(g, s, c, window, smp.gates, use_spatial);
    MatrixXd targets = chunk_targets(*smp.ep, smp.t, c.chunk_size);
    targets.col(0).array() += (double)smp.dx / ds.image_width;
    targets.col(1).array() += (double)smp.dy / ds.image_height;
    MatrixXd pose_gt = targets.leftCols(6);
    MatrixXd grip_gt = targets.col(6).transpose();
    LossParts lp = composite_loss(g, out.pred, pose_gt, grip_gt, c.lambda_bce);
    total = b == 0 ? lp.total : add(total, lp.total);
    mse_sum += lp.mse.value()(0, 0);
    bce_sum += lp.bce.value()(0, 0);
  }
  total_out = scale(total, 1.0 / c.batch_size);
  return {total_out.value()(0, 0), mse_sum / c.batch_size,
          bce_sum / c.batch_size};
}

void log_line(const StageOptions& opt, const json& record) {
  if (opt.log) *opt.log << record.dump() << "\n";
}

int stage_steps(const StageOptions& opt, int config_steps) {
  return opt.override_steps >= 0 ? opt.override_steps : config_steps;
}

Checkpoint run_bc_stage(const Dataset& ds, ParameterStore params,
                        const Config& c, const std::string& stage,
                        const std::set<ParamGroup>& trainable_groups,
                        double lr, int steps, bool use_spatial,
                        const StageOptions& opt) {
  check_dataset_matches(ds, c);
  std::set<std::string> trainable;
  for (const std::string& n : params.names_in(trainable_groups))
    trainable.insert(n);
  AdamW optimizer(lr, trainable, c.weight_decay);
  Rng rng = Rng::derive(c.seed, stage + "/batches");
  for (int step = 0; step < steps; ++step) {
    Graph g;
    Var total;
    BcStats stats = bc_batch(g, ds, params, c, rng, use_spatial, total);
    g.backward(total);
    optimizer.step(params, g.param_grads());
    if (step == 0 || (step + 1) % opt.log_every == 0 || step + 1 == steps) {
      log_line(opt, {{"stage", stage},
                     {"step", step + 1},
                     {"loss", stats.loss},
                     {"mse", stats.mse},
                     {"bce", stats.bce}});
    }
  }
  return Checkpoint{std::move(params), c, stage, (uint64_t)steps};
}

}  // namespace

ParameterStore policy_skeleton(const Config& c, bool use_spatial) {
  ParameterStore s;
  Rng rng(0);
  init_policy(s, c, vocab_size(), rng, use_spatial);
  return s;
}

ParameterStore esm_skeleton(const Config& c) {
  ParameterStore s;
  Rng rng(0);
  init_esm(s, c, rng);
  return s;
}

MatrixXd gt_pointmap_rows(const MatrixXd& depth, const MaskMatrix& valid,
                          const CameraParams& camera, int patch) {
  std::vector<MatrixXd> planes = unproject_depth(depth, valid, camera);
  MatrixXd x = patchify_plane(planes[0], patch);
  MatrixXd y = patchify_plane(planes[1], patch);
  MatrixXd z = patchify_plane(planes[2], patch);
  MatrixXd rows(x.rows(), 3 * x.cols());
  rows << x, y, z;
  return rows;
}

Checkpoint pretrain_vla(const Dataset& ds, const Config& c,
                        const StageOptions& opt) {
  ParameterStore params;
  Rng init_rng = Rng::derive(c.seed, "pretrain_vla/init");
  init_policy(params, c, vocab_size(), init_rng, /*use_spatial=*/false);
  return run_bc_stage(ds, std::move(params), c, "pretrain_vla",
                      {ParamGroup::vlm, ParamGroup::action_head},
                      c.lr_pretrain_vla,
                      stage_steps(opt, c.steps_pretrain_vla),
                      /*use_spatial=*/false, opt);
}

Checkpoint pretrain_esm(const Dataset& ds, const Config& c,
                        const StageOptions& opt) {
  check_dataset_matches(ds, c);
  ParameterStore params;
  Rng init_rng = Rng::derive(c.seed, "pretrain_esm/init");
  init_esm(params, c, init_rng);
  std::set<std::string> trainable;
  for (const std::string& n : params.names_in({ParamGroup::spatial}))
    trainable.insert(n);
  AdamW optimizer(c.lr_pretrain_esm, trainable, c.weight_decay);
  Rng rng = Rng::derive(c.seed, "pretrain_esm/batches");
  int steps = stage_steps(opt, c.steps_pretrain_esm);
  for (int step = 0; step < steps; ++step) {
    Graph g;
    Var total;
    double depth_sum = 0, pointmap_sum = 0, pose_sum = 0;
    for (int b = 0; b < c.batch_size; ++b) {
      Sample smp = draw_sample(ds, c, rng, /*with_gates=*/true,
                               /*with_shift=*/true);
      Observation obs =
          shift_observation(smp.ep->observation(smp.t), smp.dx, smp.dy);
      EsmEncoding enc =
          esm_forward(g, params, c, obs, smp.gates.b_d, smp.gates.b_p);
      ReconVars recon = reconstruct(g, params, c, enc);
      MatrixXd gt_depth = patchify_plane(*obs.depth, c.patch_size);
      MatrixXd gt_mask = patchify_plane(*obs.depth_valid, c.patch_size);
      MatrixXd gt_points =
          gt_pointmap_rows(*obs.depth, *obs.depth_valid, *obs.camera,
                           c.patch_size);
      Eigen::Matrix<double, 7, 1> gt_pose =
          obs.camera->as_vector().head<7>();
      ReconLossVars lp =
          recon_loss(g, recon, gt_depth, gt_mask, gt_points, gt_pose);
      total = b == 0 ? lp.total : add(total, lp.total);
      depth_sum += lp.depth_l1.value()(0, 0);
      pointmap_sum += lp.pointmap_l1.value()(0, 0);
      pose_sum += lp.pose_err.value()(0, 0);
    }
    total = scale(total, 1.0 / c.batch_size);
    g.backward(total);
    optimizer.step(params, g.param_grads());
    if (step == 0 || (step + 1) % opt.log_every == 0 || step + 1 == steps) {
      log_line(opt, {{"stage", "pretrain_esm"},
                     {"step", step + 1},
                     {"loss", total.value()(0, 0)},
                     {"depth_l1", depth_sum / c.batch_size},
                     {"pointmap_l1", pointmap_sum / c.batch_size},
                     {"pose_err", pose_sum / c.batch_size}});
    }
  }
  return Checkpoint{std::move(params), c, "pretrain_esm", (uint64_t)steps};
}

Checkpoint stage1(const Dataset& ds, const Checkpoint& baseline,
                  const Checkpoint& esm, const Config& c,
                  const StageOptions& opt) {
  check_compatible(baseline.params, policy_skeleton(c, /*use_spatial=*/false),
                   "stage1 baseline checkpoint");
  check_compatible(esm.params, esm_skeleton(c), "stage1 spatial checkpoint");
  ParameterStore params = baseline.params;
  params.merge(esm.params);
  Rng init_rng = Rng::derive(c.seed, "stage1/init");
  init_adapter(params, c, init_rng);
  return run_bc_stage(ds, std::move(params), c, "stage1",
                      {ParamGroup::adapter}, c.lr_stage1,
                      stage_steps(opt, c.steps_stage1),
                      /*use_spatial=*/true, opt);
}

Checkpoint stage2(const Dataset& ds, const Checkpoint& after_stage1,
                  const Config& c, const StageOptions& opt) {
  check_compatible(after_stage1.params, policy_skeleton(c, /*use_spatial=*/true),
                   "stage2 input checkpoint");
  return run_bc_stage(ds, after_stage1.params, c, "stage2",
                      {ParamGroup::vlm, ParamGroup::adapter}, c.lr_stage2,
                      stage_steps(opt, c.steps_stage2),
                      /*use_spatial=*/true, opt);
}

double mean_composite_loss(const Dataset& ds, const ParameterStore& s,
                           const Config& c, bool use_spatial, uint64_t seed,
                           int samples) {
  if (samples <= 0) throw std::invalid_argument("samples must be >= 1");
  check_dataset_matches(ds, c);
  Rng rng = Rng::derive(seed, "heldout_loss");
  double sum = 0;
  for (int i = 0; i < samples; ++i) {
    Graph g;
    Sample smp = draw_sample(ds, c, rng, use_spatial, /*with_shift=*/false);
    auto window = observation_window(*smp.ep, smp.t, c.window);
    PolicyOutput out = policy_forward(g, s, c, window, smp.gates, use_spatial);
    MatrixXd targets = chunk_targets(*smp.ep, smp.t, c.chunk_size);
    LossParts lp = composite_loss(g, out.pred, targets.leftCols(6),
                                  targets.col(6).transpose(), c.lambda_bce);
    sum += lp.total.value()(0, 0);
  }
  return sum / samples;
}

}  // namespace svla
