#include "svla/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "svla/binio.hpp"

namespace svla {

namespace {
constexpr char kMagic[] = "SVLACKPT";
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kMagic, 8);
  write_u32(out, kCheckpointVersion);
  write_string(out, ckpt.stage);
  write_u64(out, ckpt.step);
  write_string(out, serialize_config(ckpt.config));
  write_u64(out, ckpt.params.entries.size());
  for (const auto& [name, entry] : ckpt.params.entries) {
    write_string(out, name);
    write_string(out, to_string(entry.group));
    write_u64(out, static_cast<uint64_t>(entry.value.rows()));
    write_u64(out, static_cast<uint64_t>(entry.value.cols()));
    write_matrix(out, entry.value);
  }
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  expect_magic(in, kMagic, "checkpoint");
  uint32_t version = read_u32(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.stage = read_string(in);
  ckpt.step = read_u64(in);
  ckpt.config = parse_config_text(read_string(in));
  uint64_t count = read_u64(in);
  for (uint64_t i = 0; i < count; ++i) {
    std::string name = read_string(in);
    ParamGroup group = param_group_from_string(read_string(in));
    auto rows = static_cast<Eigen::Index>(read_u64(in));
    auto cols = static_cast<Eigen::Index>(read_u64(in));
    ckpt.params.add(name, read_matrix(in, rows, cols, "tensor " + name), group);
  }
  return ckpt;
}

void check_compatible(const ParameterStore& loaded,
                      const ParameterStore& reference,
                      const std::string& what) {
  for (const auto& [name, entry] : reference.entries) {
    if (!loaded.has(name)) {
      throw std::runtime_error(what + ": missing tensor " + name);
    }
    const Eigen::MatrixXd& got = loaded.at(name);
    if (got.rows() != entry.value.rows() || got.cols() != entry.value.cols()) {
      std::ostringstream msg;
      msg << what << ": shape mismatch for tensor " << name << " (expected "
          << entry.value.rows() << "x" << entry.value.cols() << ", found "
          << got.rows() << "x" << got.cols() << ")";
      throw std::runtime_error(msg.str());
    }
  }
  for (const auto& [name, entry] : loaded.entries) {
    if (!reference.has(name)) {
      throw std::runtime_error(what + ": unexpected tensor " + name);
    }
  }
}

}  // namespace svla
