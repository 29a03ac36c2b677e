#include "svla/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace svla {

std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::addition: return "addition";
    case FusionMode::film: return "film";
    case FusionMode::cross_attention: return "cross_attention";
  }
  throw std::logic_error("unreachable fusion mode");
}

std::string to_string(PredictorMode m) {
  return m == PredictorMode::mlp ? "mlp" : "lstm";
}

std::string to_string(ExecutionMode m) {
  return m == ExecutionMode::full_chunk ? "full_chunk" : "ensemble";
}

namespace {

FusionMode fusion_from_string(const std::string& s) {
  if (s == "addition") return FusionMode::addition;
  if (s == "film") return FusionMode::film;
  if (s == "cross_attention") return FusionMode::cross_attention;
  throw ConfigError("invalid value for fusion_mode: " + s);
}

PredictorMode predictor_from_string(const std::string& s) {
  if (s == "mlp") return PredictorMode::mlp;
  if (s == "lstm") return PredictorMode::lstm;
  throw ConfigError("invalid value for predictor_mode: " + s);
}

ExecutionMode execution_from_string(const std::string& s) {
  if (s == "full_chunk") return ExecutionMode::full_chunk;
  if (s == "ensemble") return ExecutionMode::ensemble;
  throw ConfigError("invalid value for execution_mode: " + s);
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("invalid integer for " + key + ": " + v);
  }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return (uint64_t)x;
  } catch (const std::exception&) {
    throw ConfigError("invalid integer for " + key + ": " + v);
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("invalid number for " + key + ": " + v);
  }
}

std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Config parse_config_text(const std::string& text) {
  Config c;
  // dispatch table keyed by the documented config key names
  std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters;
  auto set_int = [&](const std::string& key, int* field) {
    setters[key] = [field](const std::string& k, const std::string& v) {
      *field = parse_int(k, v);
    };
  };
  auto set_double = [&](const std::string& key, double* field) {
    setters[key] = [field](const std::string& k, const std::string& v) {
      *field = parse_double(k, v);
    };
  };
  set_int("image_height", &c.image_height);
  set_int("image_width", &c.image_width);
  set_int("image_channels", &c.image_channels);
  set_int("patch_size", &c.patch_size);
  set_int("spatial_dim", &c.spatial_dim);
  set_int("act_dim", &c.act_dim);
  set_int("max_instruction_len", &c.max_instruction_len);
  set_int("chunk_size", &c.chunk_size);
  set_int("window", &c.window);
  set_int("backbone_blocks", &c.backbone_blocks);
  set_int("spatial_blocks", &c.spatial_blocks);
  set_int("attention_heads", &c.attention_heads);
  set_int("backbone_ffn_hidden", &c.backbone_ffn_hidden);
  set_int("spatial_ffn_hidden", &c.spatial_ffn_hidden);
  set_int("adapter_hidden", &c.adapter_hidden);
  set_int("predictor_hidden", &c.predictor_hidden);
  set_int("lstm_hidden", &c.lstm_hidden);
  set_double("lr_pretrain_vla", &c.lr_pretrain_vla);
  set_double("lr_pretrain_esm", &c.lr_pretrain_esm);
  set_double("lr_stage1", &c.lr_stage1);
  set_double("lr_stage2", &c.lr_stage2);
  set_int("batch_size", &c.batch_size);
  set_int("steps_pretrain_vla", &c.steps_pretrain_vla);
  set_int("steps_pretrain_esm", &c.steps_pretrain_esm);
  set_int("steps_stage1", &c.steps_stage1);
  set_int("steps_stage2", &c.steps_stage2);
  set_double("lambda_bce", &c.lambda_bce);
  set_double("bernoulli_p", &c.bernoulli_p);
  set_double("weight_decay", &c.weight_decay);
  set_int("augment_shift", &c.augment_shift);
  setters["seed"] = [&c](const std::string& k, const std::string& v) {
    c.seed = parse_u64(k, v);
  };
  setters["fusion_mode"] = [&c](const std::string&, const std::string& v) {
    c.fusion_mode = fusion_from_string(v);
  };
  setters["predictor_mode"] = [&c](const std::string&, const std::string& v) {
    c.predictor_mode = predictor_from_string(v);
  };
  setters["execution_mode"] = [&c](const std::string&, const std::string& v) {
    c.execution_mode = execution_from_string(v);
  };

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key=value, got: " + line);
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError("unknown config key: " + key);
    }
    it->second(key, value);
  }
  validate_config(c);
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

void validate_config(const Config& c) {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("invalid " + key + ": " + why);
  };
  if (c.image_height <= 0) fail("image_height", "must be positive");
  if (c.image_width <= 0) fail("image_width", "must be positive");
  if (c.image_channels <= 0) fail("image_channels", "must be positive");
  if (c.patch_size <= 0) fail("patch_size", "must be positive");
  if (c.image_height % c.patch_size != 0) {
    fail("patch_size", "must divide image_height");
  }
  if (c.image_width % c.patch_size != 0) {
    fail("patch_size", "must divide image_width");
  }
  if (c.spatial_dim <= 0) fail("spatial_dim", "must be positive");
  if (c.act_dim <= 0) fail("act_dim", "must be positive");
  if (c.max_instruction_len <= 0) fail("max_instruction_len", "must be positive");
  if (c.chunk_size < 1) fail("chunk_size", "must be >= 1");
  if (c.window < 1) fail("window", "must be >= 1");
  if (c.backbone_blocks < 0) fail("backbone_blocks", "must be >= 0");
  if (c.spatial_blocks < 0) fail("spatial_blocks", "must be >= 0");
  if (c.attention_heads <= 0) fail("attention_heads", "must be positive");
  if (c.act_dim % c.attention_heads != 0) {
    fail("attention_heads", "must divide act_dim");
  }
  if (c.spatial_dim % c.attention_heads != 0) {
    fail("attention_heads", "must divide spatial_dim");
  }
  if (c.backbone_ffn_hidden <= 0) fail("backbone_ffn_hidden", "must be positive");
  if (c.spatial_ffn_hidden <= 0) fail("spatial_ffn_hidden", "must be positive");
  if (c.adapter_hidden <= 0) fail("adapter_hidden", "must be positive");
  if (c.predictor_hidden <= 0) fail("predictor_hidden", "must be positive");
  if (c.lstm_hidden <= 0) fail("lstm_hidden", "must be positive");
  if (c.predictor_mode == PredictorMode::lstm && c.lstm_hidden != c.act_dim) {
    fail("lstm_hidden", "must equal act_dim so both predictors share one output head");
  }
  if (!(c.lr_pretrain_vla > 0)) fail("lr_pretrain_vla", "must be positive");
  if (!(c.lr_pretrain_esm > 0)) fail("lr_pretrain_esm", "must be positive");
  if (!(c.lr_stage1 > 0)) fail("lr_stage1", "must be positive");
  if (!(c.lr_stage2 > 0)) fail("lr_stage2", "must be positive");
  if (c.batch_size < 1) fail("batch_size", "must be >= 1");
  if (c.steps_pretrain_vla < 0) fail("steps_pretrain_vla", "must be >= 0");
  if (c.steps_pretrain_esm < 0) fail("steps_pretrain_esm", "must be >= 0");
  if (c.steps_stage1 < 0) fail("steps_stage1", "must be >= 0");
  if (c.steps_stage2 < 0) fail("steps_stage2", "must be >= 0");
  if (c.lambda_bce < 0) fail("lambda_bce", "must be >= 0");
  if (c.bernoulli_p < 0.0 || c.bernoulli_p > 1.0) {
    fail("bernoulli_p", "must lie in [0,1]");
  }
  if (c.weight_decay < 0) fail("weight_decay", "must be >= 0");
  if (c.augment_shift < 0) fail("augment_shift", "must be >= 0");
  if (c.augment_shift >= std::min(c.image_height, c.image_width)) {
    fail("augment_shift", "must be smaller than the image");
  }
}

std::string serialize_config(const Config& c) {
  std::ostringstream out;
  out << "image_height = " << c.image_height << "\n";
  out << "image_width = " << c.image_width << "\n";
  out << "image_channels = " << c.image_channels << "\n";
  out << "patch_size = " << c.patch_size << "\n";
  out << "spatial_dim = " << c.spatial_dim << "\n";
  out << "act_dim = " << c.act_dim << "\n";
  out << "max_instruction_len = " << c.max_instruction_len << "\n";
  out << "chunk_size = " << c.chunk_size << "\n";
  out << "window = " << c.window << "\n";
  out << "backbone_blocks = " << c.backbone_blocks << "\n";
  out << "spatial_blocks = " << c.spatial_blocks << "\n";
  out << "attention_heads = " << c.attention_heads << "\n";
  out << "backbone_ffn_hidden = " << c.backbone_ffn_hidden << "\n";
  out << "spatial_ffn_hidden = " << c.spatial_ffn_hidden << "\n";
  out << "adapter_hidden = " << c.adapter_hidden << "\n";
  out << "predictor_hidden = " << c.predictor_hidden << "\n";
  out << "lstm_hidden = " << c.lstm_hidden << "\n";
  out << "lr_pretrain_vla = " << format_double(c.lr_pretrain_vla) << "\n";
  out << "lr_pretrain_esm = " << format_double(c.lr_pretrain_esm) << "\n";
  out << "lr_stage1 = " << format_double(c.lr_stage1) << "\n";
  out << "lr_stage2 = " << format_double(c.lr_stage2) << "\n";
  out << "batch_size = " << c.batch_size << "\n";
  out << "steps_pretrain_vla = " << c.steps_pretrain_vla << "\n";
  out << "steps_pretrain_esm = " << c.steps_pretrain_esm << "\n";
  out << "steps_stage1 = " << c.steps_stage1 << "\n";
  out << "steps_stage2 = " << c.steps_stage2 << "\n";
  out << "lambda_bce = " << format_double(c.lambda_bce) << "\n";
  out << "bernoulli_p = " << format_double(c.bernoulli_p) << "\n";
  out << "weight_decay = " << format_double(c.weight_decay) << "\n";
  out << "augment_shift = " << c.augment_shift << "\n";
  out << "seed = " << c.seed << "\n";
  out << "fusion_mode = " << to_string(c.fusion_mode) << "\n";
  out << "predictor_mode = " << to_string(c.predictor_mode) << "\n";
  out << "execution_mode = " << to_string(c.execution_mode) << "\n";
  return out.str();
}

uint64_t config_digest(const Config& c) {
  const std::string s = serialize_config(c);
  uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace svla
