// Command-line front end: dataset generation, the four training stages,
// evaluation and the two ablation studies. Every command is a deterministic
// function of its flags — progress logs go to stderr, artifacts carry no
// timestamps, so rerunning a command reproduces its outputs byte for byte.

#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "svla/checkpoint.hpp"
#include "svla/eval.hpp"
#include "svla/pipeline.hpp"

using json = nlohmann::ordered_json;
using namespace svla;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path,
                  "key=value config file (defaults apply when omitted)");
  cmd->add_option("--seed", flags.seed, "override the config seed");
}

Config resolve_config(const CommonFlags& flags) {
  Config c = flags.config_path.empty() ? Config{} : load_config(flags.config_path);
  if (flags.seed) c.seed = *flags.seed;
  validate_config(c);
  return c;
}

VariationSpec family_by_name(const std::string& name) {
  if (name == "base") return base_family();
  if (name == "height") return height_family();
  throw CLI::ValidationError("--family", "must be 'base' or 'height'");
}

class Stopwatch {
 public:
  explicit Stopwatch(std::string label) : label_(std::move(label)) {}
  ~Stopwatch() {
    auto dt = std::chrono::steady_clock::now() - start_;
    std::cerr << label_ << " finished in "
              << std::chrono::duration<double>(dt).count() << " s\n";
  }

 private:
  std::string label_;
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale vision-language-action training and evaluation"};
  app.require_subcommand(1);

  // --- gen-data -------------------------------------------------------------
  CommonFlags gen_flags;
  std::string gen_family = "base", gen_out;
  int gen_episodes = 500;
  auto* gen = app.add_subcommand("gen-data", "generate expert demonstrations");
  add_common(gen, gen_flags);
  gen->add_option("--family", gen_family, "task family: base or height");
  gen->add_option("--episodes", gen_episodes, "episode count")
      ->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "output dataset path")->required();

  // --- training stages ------------------------------------------------------
  struct StageFlags {
    CommonFlags common;
    std::string data, out;
    int steps = -1;
  };
  auto add_stage_common = [](CLI::App* cmd, StageFlags& f) {
    add_common(cmd, f.common);
    cmd->add_option("--data", f.data, "training dataset")->required();
    cmd->add_option("--out", f.out, "output checkpoint path")->required();
    cmd->add_option("--steps", f.steps, "override the config step count");
  };

  StageFlags vla_flags;
  auto* vla = app.add_subcommand(
      "pretrain-vla", "train the spatial-free policy (backbone + head)");
  add_stage_common(vla, vla_flags);

  StageFlags esm_flags;
  auto* esm = app.add_subcommand(
      "pretrain-esm", "train the spatial encoder on reconstruction");
  add_stage_common(esm, esm_flags);

  StageFlags s1_flags;
  std::string s1_baseline, s1_esm;
  auto* s1 = app.add_subcommand(
      "stage1", "adapter-only post-training on the merged checkpoints");
  add_stage_common(s1, s1_flags);
  s1->add_option("--baseline", s1_baseline, "pretrain-vla checkpoint")
      ->required();
  s1->add_option("--esm", s1_esm, "pretrain-esm checkpoint")->required();

  StageFlags s2_flags;
  std::string s2_in;
  auto* s2 = app.add_subcommand(
      "stage2", "backbone + adapter post-training, head and encoder frozen");
  add_stage_common(s2, s2_flags);
  s2->add_option("--ckpt", s2_in, "stage1 checkpoint")->required();

  // --- eval -----------------------------------------------------------------
  CommonFlags eval_flags;
  std::string eval_ckpt, eval_family = "base", eval_out;
  int eval_episodes = 50, eval_max_steps = 40;
  int eval_bd = 1, eval_bp = 1;
  auto* ev = app.add_subcommand("eval", "roll out a checkpoint");
  add_common(ev, eval_flags);
  ev->add_option("--ckpt", eval_ckpt, "checkpoint to evaluate")->required();
  ev->add_option("--family", eval_family, "task family: base or height");
  ev->add_option("--episodes", eval_episodes, "episode count")
      ->check(CLI::PositiveNumber);
  ev->add_option("--max-steps", eval_max_steps, "action budget per episode");
  ev->add_option("--depth-gate", eval_bd, "force the depth condition 0/1");
  ev->add_option("--pose-gate", eval_bp, "force the camera condition 0/1");
  ev->add_option("--out", eval_out, "also write the records to this file");

  // --- ablations ------------------------------------------------------------
  CommonFlags abm_flags;
  std::string abm_ckpt, abm_family = "height", abm_out;
  int abm_episodes = 50, abm_max_steps = 40;
  std::vector<uint64_t> abm_seeds{0, 1, 2, 3, 4};
  auto* abm = app.add_subcommand(
      "ablate-modality", "success under forced condition gates");
  add_common(abm, abm_flags);
  abm->add_option("--ckpt", abm_ckpt, "post-trained checkpoint")->required();
  abm->add_option("--family", abm_family, "task family: base or height");
  abm->add_option("--episodes", abm_episodes, "episodes per seed");
  abm->add_option("--max-steps", abm_max_steps, "action budget per episode");
  abm->add_option("--eval-seeds", abm_seeds, "evaluation seeds");
  abm->add_option("--out", abm_out, "output report path (line-delimited)");

  CommonFlags abf_flags;
  std::string abf_data, abf_baseline, abf_esm, abf_family = "base", abf_out;
  int abf_episodes = 50, abf_max_steps = 40, abf_steps = -1;
  std::vector<uint64_t> abf_seeds{0, 1, 2, 3, 4};
  auto* abf = app.add_subcommand(
      "ablate-fusion", "post-train and compare the three fusion strategies");
  add_common(abf, abf_flags);
  abf->add_option("--data", abf_data, "training dataset")->required();
  abf->add_option("--baseline", abf_baseline, "pretrain-vla checkpoint")
      ->required();
  abf->add_option("--esm", abf_esm, "pretrain-esm checkpoint")->required();
  abf->add_option("--family", abf_family, "task family: base or height");
  abf->add_option("--episodes", abf_episodes, "episodes per seed");
  abf->add_option("--max-steps", abf_max_steps, "action budget per episode");
  abf->add_option("--eval-seeds", abf_seeds, "evaluation seeds");
  abf->add_option("--steps", abf_steps, "override both stages' step counts");
  abf->add_option("--out", abf_out, "output report path (line-delimited)");

  // --- inspect --------------------------------------------------------------
  std::string ins_ckpt;
  auto* ins = app.add_subcommand("inspect-ckpt", "print checkpoint contents");
  ins->add_option("--ckpt", ins_ckpt, "checkpoint path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) {
      Config c = resolve_config(gen_flags);
      Stopwatch watch("gen-data");
      Dataset ds = build_dataset(family_by_name(gen_family), gen_episodes, c,
                                 c.seed);
      save_dataset(gen_out, ds);
      std::cerr << "wrote " << gen_episodes << " episodes to " << gen_out
                << "\n";
    } else if (vla->parsed()) {
      Config c = resolve_config(vla_flags.common);
      Dataset ds = load_dataset(vla_flags.data);
      Stopwatch watch("pretrain-vla");
      StageOptions opt{&std::cerr, 100, vla_flags.steps};
      save_checkpoint(vla_flags.out, pretrain_vla(ds, c, opt));
    } else if (esm->parsed()) {
      Config c = resolve_config(esm_flags.common);
      Dataset ds = load_dataset(esm_flags.data);
      Stopwatch watch("pretrain-esm");
      StageOptions opt{&std::cerr, 100, esm_flags.steps};
      save_checkpoint(esm_flags.out, pretrain_esm(ds, c, opt));
    } else if (s1->parsed()) {
      Config c = resolve_config(s1_flags.common);
      Dataset ds = load_dataset(s1_flags.data);
      Checkpoint baseline = load_checkpoint(s1_baseline);
      Checkpoint esm_ckpt = load_checkpoint(s1_esm);
      Stopwatch watch("stage1");
      StageOptions opt{&std::cerr, 100, s1_flags.steps};
      save_checkpoint(s1_flags.out, stage1(ds, baseline, esm_ckpt, c, opt));
    } else if (s2->parsed()) {
      Config c = resolve_config(s2_flags.common);
      Dataset ds = load_dataset(s2_flags.data);
      Checkpoint input = load_checkpoint(s2_in);
      Stopwatch watch("stage2");
      StageOptions opt{&std::cerr, 100, s2_flags.steps};
      save_checkpoint(s2_flags.out, stage2(ds, input, c, opt));
    } else if (ev->parsed()) {
      Checkpoint ckpt = load_checkpoint(eval_ckpt);
      Config c = ckpt.config;
      if (eval_flags.seed) c.seed = *eval_flags.seed;
      bool use_spatial = infer_use_spatial(ckpt);
      GateSetting gates{use_spatial ? eval_bd : 0, use_spatial ? eval_bp : 0};
      ChunkPolicy policy(ckpt.params, c, use_spatial, gates,
                         c.execution_mode);
      Stopwatch watch("eval");
      EvalReport rep =
          evaluate(policy, family_by_name(eval_family), eval_episodes, c.seed,
                   eval_max_steps, c.image_height, c.image_width);
      std::ostringstream records;
      for (int i = 0; i < rep.episodes; ++i) {
        records << json{{"episode", i},
                        {"success", rep.outcome[(size_t)i]},
                        {"steps", rep.steps[(size_t)i]}}
                       .dump()
                << "\n";
      }
      records << json{{"episodes", rep.episodes},
                      {"successes", rep.successes},
                      {"success_rate", rep.success_rate}}
                     .dump()
              << "\n";
      std::cout << records.str();
      if (!eval_out.empty()) write_text(eval_out, records.str());
    } else if (abm->parsed()) {
      Checkpoint ckpt = load_checkpoint(abm_ckpt);
      Stopwatch watch("ablate-modality");
      AblationMatrix m =
          run_modality_ablation(ckpt, family_by_name(abm_family), abm_seeds,
                                abm_episodes, abm_max_steps);
      std::cout << ablation_to_table(m);
      if (!abm_out.empty()) write_text(abm_out, ablation_to_jsonl(m));
    } else if (abf->parsed()) {
      Config c = resolve_config(abf_flags);
      Dataset ds = load_dataset(abf_data);
      Checkpoint baseline = load_checkpoint(abf_baseline);
      Checkpoint esm_ckpt = load_checkpoint(abf_esm);
      Stopwatch watch("ablate-fusion");
      StageOptions opt{&std::cerr, 100, abf_steps};
      AblationMatrix m = run_fusion_ablation(
          ds, baseline, esm_ckpt, c, family_by_name(abf_family), abf_seeds,
          abf_episodes, abf_max_steps, opt);
      std::cout << ablation_to_table(m);
      if (!abf_out.empty()) write_text(abf_out, ablation_to_jsonl(m));
    } else if (ins->parsed()) {
      Checkpoint ckpt = load_checkpoint(ins_ckpt);
      std::cout << "stage: " << ckpt.stage << "\nstep: " << ckpt.step
                << "\ntensors: " << ckpt.params.entries.size()
                << "\nparameters: " << ckpt.params.total_parameters() << "\n";
      for (const auto& [name, entry] : ckpt.params.entries) {
        std::cout << "  " << name << "  " << entry.value.rows() << "x"
                  << entry.value.cols() << "  [" << to_string(entry.group)
                  << "]\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
