// Acceptance gate: one test case per release criterion, each printing a
// single PASS/FAIL line. Run the binary directly for the full report or let
// ctest drive the cases individually.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gradcheck.hpp"
#include "svla/dataset.hpp"
#include "svla/eval.hpp"

using namespace svla;
using Eigen::MatrixXd;

namespace {

// prints its verdict even when a failed REQUIRE unwinds the test case
struct CriterionReport {
  std::string name;
  bool passed = false;
  explicit CriterionReport(std::string n) : name(std::move(n)) {}
  ~CriterionReport() {
    std::printf("%s: %s\n", name.c_str(), passed ? "PASS" : "FAIL");
    std::fflush(stdout);
  }
};

Config tiny_config() {
  Config c;
  c.image_height = 14;
  c.image_width = 14;
  c.patch_size = 7;
  c.spatial_dim = 8;
  c.act_dim = 16;
  c.chunk_size = 5;
  c.backbone_blocks = 1;
  c.spatial_blocks = 1;
  c.attention_heads = 2;
  c.backbone_ffn_hidden = 16;
  c.spatial_ffn_hidden = 16;
  c.adapter_hidden = 8;
  c.predictor_hidden = 16;
  c.lstm_hidden = 16;
  c.batch_size = 4;
  validate_config(c);
  return c;
}

Config micro_config() {
  Config c;
  c.image_height = 4;
  c.image_width = 4;
  c.image_channels = 2;
  c.patch_size = 2;
  c.spatial_dim = 4;
  c.act_dim = 4;
  c.max_instruction_len = 2;
  c.chunk_size = 1;
  c.window = 2;
  c.attention_heads = 2;
  c.backbone_blocks = 1;
  c.backbone_ffn_hidden = 4;
  c.spatial_blocks = 1;
  c.spatial_ffn_hidden = 4;
  c.adapter_hidden = 2;
  c.predictor_hidden = 4;
  c.lstm_hidden = 4;
  validate_config(c);
  return c;
}

// like the dataset generator: retry placement failures inside the substream
Scene draw_scene(const VariationSpec& spec, Rng& rng) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    try {
      return generate_scene(spec, rng);
    } catch (const std::runtime_error&) {
    }
  }
  throw std::runtime_error("scene generation kept failing");
}

Observation seeded_observation(const Config& c, uint64_t seed) {
  Rng rng = Rng::derive(seed, "acceptance/obs");
  Scene scene = draw_scene(base_family(), rng);
  const VariationSpec spec = base_family();
  Task task = sample_task(scene, spec.kinds[rng.uniform_int(spec.kinds.size())], rng);
  return make_observation(scene, task, 0, c.image_height, c.image_width);
}

// the 4×4 micro architecture uses fewer channels than the renderer emits,
// so its observations are synthesized directly
Observation micro_observation(const Config& c, uint64_t seed) {
  Rng rng = Rng::derive(seed, "acceptance/micro");
  Observation obs;
  Image img(c.image_channels, c.image_height, c.image_width);
  for (auto& p : img.planes) {
    for (int i = 0; i < p.rows(); ++i) {
      for (int j = 0; j < p.cols(); ++j) p(i, j) = rng.uniform();
    }
  }
  obs.side_image = img;
  MatrixXd depth(c.image_height, c.image_width);
  MatrixXd mask(c.image_height, c.image_width);
  for (int i = 0; i < depth.rows(); ++i) {
    for (int j = 0; j < depth.cols(); ++j) {
      depth(i, j) = rng.uniform(0.5, 2.0);
      mask(i, j) = 1.0;
    }
  }
  mask(c.image_height - 1, 0) = 0.0;
  obs.depth = depth;
  obs.depth_valid = mask;
  obs.camera = make_camera(0.3, c.image_height, c.image_width);
  obs.instruction = {(int)rng.uniform_int(vocab_size()),
                     (int)rng.uniform_int(vocab_size())};
  return obs;
}

long store_param_count(const ParameterStore& s) {
  long total = 0;
  for (const auto& name : s.names()) total += (long)s.at(name).size();
  return total;
}

void erase_by_infix(ParameterStore& s, const std::string& infix) {
  for (auto it = s.entries.begin(); it != s.entries.end();) {
    if (it->first.find(infix) != std::string::npos) {
      it = s.entries.erase(it);
    } else {
      ++it;
    }
  }
}

// scratch 2-layer tanh mlp matching the library layout
MatrixXd scratch_mlp2(const ParameterStore& s, const std::string& p,
                      const MatrixXd& x) {
  MatrixXd h = ((x * s.at(p + ".fc1.w")).rowwise() +
                s.at(p + ".fc1.b").row(0)).array().tanh();
  return (h * s.at(p + ".fc2.w")).rowwise() + s.at(p + ".fc2.b").row(0);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), ("missing artifact " + path).c_str());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void run_cli(const std::string& args) {
  const std::string cmd = "./svla_cli " + args + " > /dev/null 2>&1";
  REQUIRE_MESSAGE(std::system(cmd.c_str()) == 0, cmd.c_str());
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / (double)v.size();
}

}  // namespace

TEST_CASE("criterion 1: zero-init spatial pathway leaves the policy bitwise unchanged") {
  CriterionReport rep("criterion 1 (zero-init identity)");
  Config c = tiny_config();
  REQUIRE(c.fusion_mode == FusionMode::addition);

  ParameterStore baseline;
  Rng init = Rng::derive(42, "c1/init");
  init_policy(baseline, c, vocab_size(), init, /*use_spatial=*/false);

  ParameterStore spatial = baseline;
  Rng esm_rng = Rng::derive(42, "c1/esm");
  init_esm(spatial, c, esm_rng);
  Rng adapter_rng = Rng::derive(42, "c1/adapter");
  init_adapter(spatial, c, adapter_rng);

  for (int i = 0; i < 100; ++i) {
    std::vector<Observation> window{seeded_observation(c, (uint64_t)i)};
    Graph g_base;
    PolicyOutput plain =
        policy_forward(g_base, baseline, c, window, {0, 0}, false);
    Graph g_spatial;
    PolicyOutput fused = policy_forward(g_spatial, spatial, c, window,
                                        {i % 2, (i / 2) % 2}, true);
    REQUIRE(plain.chunk.values == fused.chunk.values);
  }
  rep.passed = true;
}

TEST_CASE("criterion 2: post-training stages freeze their contracted partitions") {
  CriterionReport rep("criterion 2 (freezing contracts)");
  Config c = tiny_config();
  c.seed = 7;
  Dataset ds = build_dataset(base_family(), 30, c, c.seed);

  StageOptions fast;
  fast.override_steps = 50;
  Checkpoint vla = pretrain_vla(ds, c, fast);
  Checkpoint esm = pretrain_esm(ds, c, fast);

  StageOptions full;
  full.override_steps = 1000;
  Checkpoint s1 = stage1(ds, vla, esm, c, full);
  bool adapter_moved = false;
  for (const auto& name : s1.params.names()) {
    if (name.rfind("vlm.", 0) == 0 || name.rfind("head.", 0) == 0) {
      REQUIRE(s1.params.at(name) == vla.params.at(name));
    } else if (name.rfind("spatial.", 0) == 0) {
      REQUIRE(s1.params.at(name) == esm.params.at(name));
    } else if (s1.params.at(name).cwiseAbs().sum() > 0) {
      adapter_moved = true;
    }
  }
  CHECK(adapter_moved);

  Checkpoint s2 = stage2(ds, s1, c, full);
  bool vlm_moved = false;
  for (const auto& name : s2.params.names()) {
    if (name.rfind("head.", 0) == 0 || name.rfind("spatial.", 0) == 0) {
      REQUIRE(s2.params.at(name) == s1.params.at(name));
    } else if (name.rfind("vlm.", 0) == 0 &&
               s2.params.at(name) != s1.params.at(name)) {
      vlm_moved = true;
    }
  }
  CHECK(vlm_moved);
  rep.passed = true;
}

TEST_CASE("criterion 3: gated-off conditioning ignores arbitrary depth and pose") {
  CriterionReport rep("criterion 3 (gate-off equivalence)");
  Config c = tiny_config();
  ParameterStore store;
  Rng init = Rng::derive(9, "c3/init");
  init_policy(store, c, vocab_size(), init, /*use_spatial=*/true);

  Observation obs = seeded_observation(c, 900);
  Graph g_ref;
  MatrixXd want =
      policy_forward(g_ref, store, c, {obs}, {0, 0}, true).chunk.values;

  Rng noise(33);
  for (int trial = 0; trial < 1000; ++trial) {
    Observation garbled = obs;
    for (int i = 0; i < garbled.depth->rows(); ++i) {
      for (int j = 0; j < garbled.depth->cols(); ++j) {
        (*garbled.depth)(i, j) = noise.uniform(-1e3, 1e3);
        (*garbled.depth_valid)(i, j) = noise.bernoulli(0.5);
      }
    }
    garbled.camera->translation =
        Vector3d(noise.uniform(-50, 50), noise.uniform(-50, 50),
                 noise.uniform(-50, 50));
    garbled.camera->quaternion = quat_normalize_or_identity(
        Eigen::Vector4d(noise.normal(), noise.normal(), noise.normal(),
                        noise.normal()));
    Graph g;
    REQUIRE(policy_forward(g, store, c, {garbled}, {0, 0}, true).chunk.values ==
            want);
  }
  rep.passed = true;
}

TEST_CASE("criterion 4: analytic gradients match central finite differences") {
  CriterionReport rep("criterion 4 (gradient correctness)");
  struct ModeCase {
    FusionMode fusion;
    PredictorMode predictor;
    std::vector<std::string> unused;  // erased so the instance stays small
  };
  const std::vector<ModeCase> cases = {
      {FusionMode::addition, PredictorMode::mlp, {".film.", ".ca.", ".lstm."}},
      {FusionMode::film, PredictorMode::mlp, {".ca.", ".lstm."}},
      {FusionMode::cross_attention, PredictorMode::lstm, {".film."}},
  };

  for (size_t k = 0; k < cases.size(); ++k) {
    Config c = micro_config();
    c.fusion_mode = cases[k].fusion;
    c.predictor_mode = cases[k].predictor;
    validate_config(c);

    ParameterStore s;
    Rng init = Rng::derive(70 + k, "c4/init");
    init_policy(s, c, vocab_size(), init, /*use_spatial=*/true);
    for (const std::string& infix : cases[k].unused) erase_by_infix(s, infix);
    // the reconstruction heads are not part of the policy loss
    erase_by_infix(s, ".depth_head.");
    erase_by_infix(s, ".pointmap_head.");
    erase_by_infix(s, ".pose_head.");
    REQUIRE(store_param_count(s) <= 1000);

    std::vector<Observation> window{micro_observation(c, 400 + k),
                                    micro_observation(c, 500 + k)};
    Rng target_rng(60 + (uint64_t)k);
    MatrixXd pose_gt(c.chunk_size, 6);
    MatrixXd grip_gt(1, c.chunk_size);
    for (int i = 0; i < c.chunk_size; ++i) {
      for (int j = 0; j < 6; ++j) pose_gt(i, j) = target_rng.normal();
      grip_gt(0, i) = (double)target_rng.bernoulli(0.5);
    }

    auto build = [&](Graph& g, const ParameterStore& store) {
      PolicyOutput out = policy_forward(g, store, c, window, {1, 1}, true);
      return composite_loss(g, out.pred, pose_gt, grip_gt, c.lambda_bce).total;
    };
    const std::string err = gradient_check(s, build);
    REQUIRE_MESSAGE(err.empty(), err.c_str());
  }

  // reconstruction objective on its own <=1k instance
  {
    Config c = micro_config();
    ParameterStore s;
    Rng init = Rng::derive(80, "c4/esm");
    init_esm(s, c, init);
    REQUIRE(store_param_count(s) <= 1000);

    Observation obs = micro_observation(c, 800);
    MatrixXd gt_depth = patchify_plane(*obs.depth, c.patch_size);
    MatrixXd gt_mask = patchify_plane(*obs.depth_valid, c.patch_size);
    MatrixXd gt_points =
        gt_pointmap_rows(*obs.depth, *obs.depth_valid, *obs.camera,
                         c.patch_size);
    Eigen::Matrix<double, 7, 1> gt_pose = obs.camera->as_vector().head<7>();
    auto build = [&](Graph& g, const ParameterStore& store) {
      EsmEncoding enc = esm_forward(g, store, c, obs, 1, 1);
      ReconVars r = reconstruct(g, store, c, enc);
      return recon_loss(g, r, gt_depth, gt_mask, gt_points, gt_pose).total;
    };
    const std::string err = gradient_check(s, build);
    REQUIRE_MESSAGE(err.empty(), err.c_str());
  }
  rep.passed = true;
}

TEST_CASE("criterion 5: composite loss and fusion operators match hand oracles") {
  CriterionReport rep("criterion 5 (loss oracle)");
  {
    Config c = tiny_config();
    c.chunk_size = 1;
    Graph g;
    ChunkPrediction pred =
        split_prediction(g, c, g.input(MatrixXd::Zero(1, 7)));
    MatrixXd pose_gt = MatrixXd::Zero(1, 6);
    pose_gt(0, 0) = 1.0;
    MatrixXd grip_gt = MatrixXd::Ones(1, 1);
    LossParts lp = composite_loss(g, pred, pose_gt, grip_gt, 0.01);
    const double want = 1.0 / 6.0 + 0.01 * std::log(2.0);
    REQUIRE(std::abs(lp.total.value()(0, 0) - want) < 1e-9);
  }

  Config c = tiny_config();
  for (int seed = 0; seed < 100; ++seed) {
    ParameterStore s;
    Rng rng((uint64_t)seed);
    init_action_head(s, c, rng);
    MatrixXd t_act(1, c.act_dim), t_spl(1, c.act_dim);
    for (int j = 0; j < c.act_dim; ++j) {
      t_act(0, j) = rng.normal();
      t_spl(0, j) = rng.normal();
    }

    Graph ga;
    REQUIRE((fuse_addition(ga, ga.input(t_act), ga.input(t_spl)).value() -
             (t_act + t_spl)).cwiseAbs().maxCoeff() < 1e-10);

    Graph gf;
    MatrixXd got_film =
        fuse_film(gf, s, c, gf.input(t_act), gf.input(t_spl)).value();
    MatrixXd affine = scratch_mlp2(s, "head.film.affine", t_spl);
    MatrixXd gamma = affine.leftCols(c.act_dim);
    MatrixXd beta = affine.rightCols(c.act_dim);
    MatrixXd gate =
        (1.0 /
         (1.0 + (-scratch_mlp2(s, "head.film.gate", t_spl).array()).exp()))
            .matrix();
    MatrixXd want_film =
        gate.array() * (gamma.array() * t_act.array() + beta.array()) +
        (1.0 - gate.array()) * t_spl.array();
    REQUIRE((got_film - want_film).cwiseAbs().maxCoeff() < 1e-10);

    Graph gc;
    MatrixXd got_ca =
        fuse_cross_attention(gc, s, c, gc.input(t_act), gc.input(t_spl))
            .value();
    MatrixXd want_ca = t_act + (t_spl * s.at("head.ca.wv")) * s.at("head.ca.wo");
    REQUIRE((got_ca - want_ca).cwiseAbs().maxCoeff() < 1e-10);
  }
  rep.passed = true;
}

TEST_CASE("criterion 6: depth normalization is invariant to positive rescaling") {
  CriterionReport rep("criterion 6 (depth normalization invariance)");
  Rng rng(606);
  for (int trial = 0; trial < 100; ++trial) {
    MatrixXd depth(6, 6);
    MatrixXd mask(6, 6);
    int valid = 0;
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        depth(i, j) = rng.uniform(0.2, 5.0);
        mask(i, j) = rng.bernoulli(0.8);
        valid += (int)mask(i, j);
      }
    }
    if (valid == 0) mask(0, 0) = 1.0;
    const double k = rng.uniform(0.1, 17.0);
    MatrixXd a = normalize_depth(k * depth, mask);
    MatrixXd b = normalize_depth(depth, mask);
    REQUIRE((a - b).cwiseAbs().maxCoeff() <= 1e-12);
  }
  rep.passed = true;
}

TEST_CASE("criterion 7: cloned policy reaches 90% on lift and put") {
  CriterionReport rep("criterion 7 (end-to-end learning)");
  Config c;  // shipped defaults
  c.seed = 0;
  Dataset ds = build_dataset(base_family(), 500, c, c.seed);

  StageOptions quiet;
  Checkpoint vla = pretrain_vla(ds, c, quiet);
  Checkpoint esm = pretrain_esm(ds, c, quiet);
  Checkpoint s1 = stage1(ds, vla, esm, c, quiet);
  Checkpoint s2 = stage2(ds, s1, c, quiet);

  VariationSpec lift_put = base_family();
  lift_put.kinds = {TaskKind::lift, TaskKind::put_on};

  double total = 0;
  for (uint64_t eval_seed = 1; eval_seed <= 5; ++eval_seed) {
    ChunkPolicy policy(s2.params, c, /*use_spatial=*/true, {1, 1},
                       c.execution_mode);
    EvalReport r = evaluate(policy, lift_put, 50, eval_seed, 15,
                            c.image_height, c.image_width);
    total += r.success_rate;
  }
  const double mean_success = total / 5.0;
  std::printf("criterion 7 detail: mean lift/put success %.3f\n", mean_success);
  REQUIRE(mean_success >= 0.90);
  rep.passed = true;
}

TEST_CASE("criterion 8: depth conditioning lifts height-family success") {
  CriterionReport rep("criterion 8 (modality-transfer direction)");
  Config c;  // shipped defaults
  c.seed = 0;
  Dataset ds = build_dataset(height_family(), 500, c, c.seed);

  StageOptions quiet;
  Checkpoint vla = pretrain_vla(ds, c, quiet);
  Checkpoint esm = pretrain_esm(ds, c, quiet);
  Checkpoint s1 = stage1(ds, vla, esm, c, quiet);
  Checkpoint s2 = stage2(ds, s1, c, quiet);

  AblationMatrix m =
      run_modality_ablation(s2, height_family(), {1, 2, 3, 4, 5}, 50, 15);
  REQUIRE(m.cells.size() >= 2);
  const AblationCell& off = m.cells[0];   // gates (0,0)
  const AblationCell& depth = m.cells[1]; // gates (1,0)
  REQUIRE(off.gates.b_d == 0);
  REQUIRE(depth.gates.b_d == 1);
  REQUIRE(depth.gates.b_p == 0);

  std::vector<double> diffs(depth.per_seed.size());
  for (size_t i = 0; i < diffs.size(); ++i) {
    diffs[i] = depth.per_seed[i] - off.per_seed[i];
  }
  const double mean_diff = mean_of(diffs);
  double var = 0;
  for (double d : diffs) var += (d - mean_diff) * (d - mean_diff);
  var /= (double)(diffs.size() - 1);
  const double se_diff = std::sqrt(var / (double)diffs.size());
  std::printf(
      "criterion 8 detail: success %.3f (gates 0,0) vs %.3f (gates 1,0), "
      "paired diff %.3f, 2*SE %.3f\n",
      off.mean, depth.mean, mean_diff, 2 * se_diff);
  REQUIRE(depth.mean > off.mean);
  REQUIRE(mean_diff > 2 * se_diff);
  rep.passed = true;
}

TEST_CASE("criterion 9: depth input improves held-out depth reconstruction") {
  CriterionReport rep("criterion 9 (conditioning benefit)");
  Config c;  // shipped defaults
  Dataset ds = build_dataset(height_family(), 500, c, 0);

  StageOptions quiet;
  double on_sum = 0, off_sum = 0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Config cs = c;
    cs.seed = 1000 + seed;
    Checkpoint esm = pretrain_esm(ds, cs, quiet);
    on_sum += esm_depth_abs_rel(esm.params, cs, height_family(), 40, 777, 1);
    off_sum += esm_depth_abs_rel(esm.params, cs, height_family(), 40, 777, 0);
  }
  std::printf("criterion 9 detail: mean abs-rel %.5f (depth on) vs %.5f (off)\n",
              on_sum / 5, off_sum / 5);
  REQUIRE(on_sum < off_sum);
  rep.passed = true;
}

TEST_CASE("criterion 10: chain metric scores the expert five and the idle policy zero") {
  CriterionReport rep("criterion 10 (chain metric soundness)");
  Config c = tiny_config();
  for (uint64_t i = 0; i < 20; ++i) {
    Rng rng = Rng::derive(2024, "chain", i);
    Scene scene = draw_scene(base_family(), rng);
    std::vector<Task> chain = make_chain(scene, rng);
    REQUIRE(chain.size() == 5);

    ExpertReplayPolicy expert(c.chunk_size, c.image_height, c.image_width);
    REQUIRE(chain_length(expert, scene, chain, 15, c.image_height,
                         c.image_width) == 5);
    NeverGraspPolicy idle;
    REQUIRE(chain_length(idle, scene, chain, 15, c.image_height,
                         c.image_width) == 0);
  }
  rep.passed = true;
}

TEST_CASE("criterion 11: seeded command-line reruns produce identical bytes") {
  CriterionReport rep("criterion 11 (reproducibility)");
  const std::string dir = "/tmp/svla_acc";
  REQUIRE(std::system(("rm -rf " + dir + " && mkdir -p " + dir).c_str()) == 0);

  const std::string cfg = dir + "/config.txt";
  {
    std::ofstream out(cfg);
    out << "image_height = 14\nimage_width = 14\npatch_size = 7\n"
        << "spatial_dim = 8\nact_dim = 16\nattention_heads = 2\n"
        << "backbone_blocks = 1\nspatial_blocks = 1\n"
        << "backbone_ffn_hidden = 16\nspatial_ffn_hidden = 16\n"
        << "adapter_hidden = 8\npredictor_hidden = 16\nlstm_hidden = 16\n"
        << "batch_size = 4\nseed = 3\n";
  }
  auto twice = [&](const std::string& args, const std::string& a,
                   const std::string& b) {
    run_cli(args + " --out " + a);
    run_cli(args + " --out " + b);
    REQUIRE(read_file(a) == read_file(b));
  };

  const std::string base = " --config " + cfg;
  twice("gen-data" + base + " --family base --episodes 12",
        dir + "/dsA", dir + "/dsB");
  twice("pretrain-vla" + base + " --data " + dir + "/dsA --steps 40",
        dir + "/vlaA", dir + "/vlaB");
  twice("pretrain-esm" + base + " --data " + dir + "/dsA --steps 40",
        dir + "/esmA", dir + "/esmB");
  twice("stage1" + base + " --data " + dir + "/dsA --baseline " + dir +
            "/vlaA --esm " + dir + "/esmA --steps 40",
        dir + "/s1A", dir + "/s1B");
  twice("stage2" + base + " --data " + dir + "/dsA --ckpt " + dir +
            "/s1A --steps 40",
        dir + "/s2A", dir + "/s2B");
  twice("eval" + base + " --ckpt " + dir + "/s2A --episodes 6",
        dir + "/evA", dir + "/evB");
  twice("ablate-modality" + base + " --ckpt " + dir +
            "/s2A --episodes 4 --eval-seeds 2",
        dir + "/abmA", dir + "/abmB");
  twice("ablate-fusion" + base + " --data " + dir + "/dsA --baseline " + dir +
            "/vlaA --esm " + dir + "/esmA --episodes 3 --eval-seeds 2 --steps 25",
        dir + "/abfA", dir + "/abfB");

  const std::string inspect = "./svla_cli inspect-ckpt --ckpt " + dir + "/s2A";
  REQUIRE(std::system((inspect + " > " + dir + "/insA 2>&1").c_str()) == 0);
  REQUIRE(std::system((inspect + " > " + dir + "/insB 2>&1").c_str()) == 0);
  REQUIRE(read_file(dir + "/insA") == read_file(dir + "/insB"));
  rep.passed = true;
}
