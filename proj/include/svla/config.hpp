#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace svla {

enum class FusionMode { addition, film, cross_attention };
enum class PredictorMode { mlp, lstm };
enum class ExecutionMode { full_chunk, ensemble };

std::string to_string(FusionMode m);
std::string to_string(PredictorMode m);
std::string to_string(ExecutionMode m);

// Runtime configuration, loaded from a flat key=value text file. Every key is
// optional; missing keys take the defaults below. Unknown keys are rejected.
struct Config {
  // model shapes
  int image_height = 28;
  int image_width = 28;
  int image_channels = 4;
  int patch_size = 14;
  int spatial_dim = 32;        // width of the spatial token stream
  int act_dim = 64;            // width of the semantic backbone
  int max_instruction_len = 8;
  int chunk_size = 5;          // C, actions predicted per chunk
  int window = 1;              // H, feature history consumed by the predictor
  int backbone_blocks = 2;
  int spatial_blocks = 2;
  int attention_heads = 4;
  int backbone_ffn_hidden = 128;
  int spatial_ffn_hidden = 64;
  int adapter_hidden = 32;
  int predictor_hidden = 128;
  int lstm_hidden = 64;

  // training
  double lr_pretrain_vla = 1e-3;
  double lr_pretrain_esm = 1e-3;
  double lr_stage1 = 1e-3;
  double lr_stage2 = 3e-4;
  int batch_size = 32;
  int steps_pretrain_vla = 3000;
  int steps_pretrain_esm = 1500;
  int steps_stage1 = 1000;
  int steps_stage2 = 1000;
  double lambda_bce = 0.01;    // gripper BCE weight in the composite loss
  double bernoulli_p = 0.5;    // probability of injecting each 3D condition
  double weight_decay = 0.0;
  int augment_shift = 2;       // max |pixels| of random training translation
  uint64_t seed = 0;

  // modes
  FusionMode fusion_mode = FusionMode::addition;
  PredictorMode predictor_mode = PredictorMode::mlp;
  ExecutionMode execution_mode = ExecutionMode::full_chunk;

  int patches_per_side_h() const { return image_height / patch_size; }
  int patches_per_side_w() const { return image_width / patch_size; }
  int patch_count() const { return patches_per_side_h() * patches_per_side_w(); }

  bool operator==(const Config&) const = default;
};

// Parses a config file. Throws ConfigError naming the offending key on
// unknown keys, malformed values, or invariant violations.
Config load_config(const std::string& path);
Config parse_config_text(const std::string& text);
std::string serialize_config(const Config& c);
void validate_config(const Config& c);

// FNV-1a digest of the canonical serialization; checkpoints and datasets
// embed it so shape-incompatible artifacts are rejected early.
uint64_t config_digest(const Config& c);

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace svla
