#include "svla/dataset.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "svla/binio.hpp"

namespace svla {

namespace {

constexpr char kMagic[] = "SVLADSET";

void write_spec(std::ostream& out, const VariationSpec& spec) {
  write_i32(out, spec.distractors);
  write_f64(out, spec.small_lo);
  write_f64(out, spec.small_hi);
  write_f64(out, spec.large_lo);
  write_f64(out, spec.large_hi);
  write_f64(out, spec.height_lo);
  write_f64(out, spec.height_hi);
  write_f64(out, spec.min_height_gap);
  write_f64(out, spec.tilt_lo);
  write_f64(out, spec.tilt_hi);
  write_f64(out, spec.stacked_prob);
  write_u32(out, (uint32_t)spec.kinds.size());
  for (TaskKind k : spec.kinds) write_u32(out, (uint32_t)k);
}

VariationSpec read_spec(std::istream& in) {
  VariationSpec spec;
  spec.distractors = read_i32(in);
  spec.small_lo = read_f64(in);
  spec.small_hi = read_f64(in);
  spec.large_lo = read_f64(in);
  spec.large_hi = read_f64(in);
  spec.height_lo = read_f64(in);
  spec.height_hi = read_f64(in);
  spec.min_height_gap = read_f64(in);
  spec.tilt_lo = read_f64(in);
  spec.tilt_hi = read_f64(in);
  spec.stacked_prob = read_f64(in);
  uint32_t n = read_u32(in);
  spec.kinds.clear();
  for (uint32_t i = 0; i < n; ++i) {
    uint32_t k = read_u32(in);
    if (k > (uint32_t)TaskKind::put_on_higher) {
      throw std::runtime_error("unknown task kind id " + std::to_string(k));
    }
    spec.kinds.push_back((TaskKind)k);
  }
  return spec;
}

void write_camera(std::ostream& out, const CameraParams& cam) {
  Eigen::Matrix<double, 11, 1> v = cam.as_vector();
  for (int i = 0; i < 11; ++i) write_f64(out, v[i]);
}

CameraParams read_camera(std::istream& in) {
  CameraParams cam;
  for (int i = 0; i < 3; ++i) cam.translation[i] = read_f64(in);
  for (int i = 0; i < 4; ++i) cam.quaternion[i] = read_f64(in);
  cam.fx = read_f64(in);
  cam.fy = read_f64(in);
  cam.cx = read_f64(in);
  cam.cy = read_f64(in);
  cam.validate();
  return cam;
}

}  // namespace

Observation DatasetEpisode::observation(int t) const {
  if (t < 0 || t >= length()) {
    throw std::out_of_range("observation index " + std::to_string(t) +
                            " outside episode of length " +
                            std::to_string(length()));
  }
  Observation obs;
  obs.side_image = images[(size_t)t];
  obs.depth = depths[(size_t)t];
  obs.depth_valid = masks[(size_t)t];
  obs.camera = camera;
  obs.instruction = task.instruction;
  obs.timestep = t;
  return obs;
}

Dataset build_dataset(const VariationSpec& spec, int episodes, const Config& c,
                      uint64_t seed) {
  if (episodes <= 0) throw std::invalid_argument("episode count must be >= 1");
  Dataset ds;
  ds.spec = spec;
  ds.image_height = c.image_height;
  ds.image_width = c.image_width;
  ds.image_channels = c.image_channels;
  ds.chunk_size = c.chunk_size;
  ds.episodes.reserve((size_t)episodes);
  for (int i = 0; i < episodes; ++i) {
    Rng rng = Rng::derive(seed, "episode", (uint64_t)i);
    Episode ep;
    bool ok = false;
    for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
      try {
        Scene scene = generate_scene(spec, rng);
        TaskKind kind = spec.kinds[rng.uniform_int(spec.kinds.size())];
        Task task = sample_task(scene, kind, rng);
        ep = expert_policy(scene, task, c.chunk_size, c.image_height,
                           c.image_width);
        ok = true;
      } catch (const std::runtime_error&) {
        // rare placement failure; the rng state has advanced, retry
      }
    }
    if (!ok) {
      throw std::runtime_error("failed to generate episode " +
                               std::to_string(i) + " after 64 attempts");
    }
    DatasetEpisode de;
    de.task = ep.task;
    de.camera = ep.initial_scene.camera;
    de.actions = ep.actions;
    for (const Observation& obs : ep.observations) {
      de.images.push_back(obs.side_image);
      de.depths.push_back(*obs.depth);
      de.masks.push_back(*obs.depth_valid);
    }
    ds.episodes.push_back(std::move(de));
  }
  return ds;
}

void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kMagic, 8);
  write_u32(out, kDatasetVersion);
  write_u32(out, (uint32_t)ds.image_height);
  write_u32(out, (uint32_t)ds.image_width);
  write_u32(out, (uint32_t)ds.image_channels);
  write_u32(out, (uint32_t)ds.chunk_size);
  write_spec(out, ds.spec);
  write_u64(out, ds.episodes.size());
  for (const DatasetEpisode& ep : ds.episodes) {
    write_u32(out, (uint32_t)ep.task.kind);
    write_i32(out, ep.task.source);
    write_i32(out, ep.task.target);
    write_f64(out, ep.task.region_x);
    write_f64(out, ep.task.region_y);
    write_u64(out, ep.task.instruction.size());
    for (int id : ep.task.instruction) write_i32(out, id);
    write_camera(out, ep.camera);
    write_u64(out, (uint64_t)ep.actions.rows());
    write_matrix(out, ep.actions);
    for (int t = 0; t < ep.length(); ++t) {
      const Image& img = ep.images[(size_t)t];
      for (const MatrixXd& plane : img.planes) write_matrix(out, plane);
      write_matrix(out, ep.depths[(size_t)t]);
      Eigen::MatrixXi mask = ep.masks[(size_t)t].cast<int>();
      write_int_matrix(out, mask);
    }
  }
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path);
  expect_magic(in, kMagic, "dataset");
  uint32_t version = read_u32(in);
  if (version != kDatasetVersion) {
    throw std::runtime_error("unsupported dataset version " +
                             std::to_string(version));
  }
  Dataset ds;
  ds.image_height = (int)read_u32(in);
  ds.image_width = (int)read_u32(in);
  ds.image_channels = (int)read_u32(in);
  ds.chunk_size = (int)read_u32(in);
  ds.spec = read_spec(in);
  uint64_t count = read_u64(in);
  for (uint64_t e = 0; e < count; ++e) {
    DatasetEpisode ep;
    uint32_t kind = read_u32(in);
    if (kind > (uint32_t)TaskKind::put_on_higher) {
      throw std::runtime_error("unknown task kind id " + std::to_string(kind));
    }
    ep.task.kind = (TaskKind)kind;
    ep.task.source = read_i32(in);
    ep.task.target = read_i32(in);
    ep.task.region_x = read_f64(in);
    ep.task.region_y = read_f64(in);
    uint64_t ilen = read_u64(in);
    for (uint64_t i = 0; i < ilen; ++i)
      ep.task.instruction.push_back(read_i32(in));
    ep.camera = read_camera(in);
    auto steps = (Eigen::Index)read_u64(in);
    std::ostringstream tag;
    tag << "episode " << e;
    ep.actions = read_matrix(in, steps, 7, tag.str() + " actions");
    for (Eigen::Index t = 0; t < steps; ++t) {
      Image img(ds.image_channels, ds.image_height, ds.image_width);
      for (int c = 0; c < ds.image_channels; ++c) {
        img.planes[(size_t)c] =
            read_matrix(in, ds.image_height, ds.image_width,
                        tag.str() + " image plane");
      }
      ep.images.push_back(std::move(img));
      ep.depths.push_back(read_matrix(in, ds.image_height, ds.image_width,
                                      tag.str() + " depth"));
      Eigen::MatrixXi mask = read_int_matrix(
          in, ds.image_height, ds.image_width, tag.str() + " mask");
      ep.masks.push_back(mask.cast<double>());
    }
    ds.episodes.push_back(std::move(ep));
  }
  return ds;
}

void check_dataset_matches(const Dataset& ds, const Config& c) {
  auto fail = [](const std::string& what, int got, int want) {
    std::ostringstream msg;
    msg << "dataset " << what << " = " << got
        << " does not match config value " << want;
    throw std::runtime_error(msg.str());
  };
  if (ds.image_height != c.image_height)
    fail("image_height", ds.image_height, c.image_height);
  if (ds.image_width != c.image_width)
    fail("image_width", ds.image_width, c.image_width);
  if (ds.image_channels != c.image_channels)
    fail("image_channels", ds.image_channels, c.image_channels);
  if (ds.chunk_size != c.chunk_size)
    fail("chunk_size", ds.chunk_size, c.chunk_size);
}

MatrixXd chunk_targets(const DatasetEpisode& ep, int t, int chunk) {
  if (t < 0 || t >= ep.length()) {
    throw std::out_of_range("chunk start " + std::to_string(t) +
                            " outside episode");
  }
  if (chunk < 1) throw std::invalid_argument("chunk must be >= 1");
  MatrixXd out(chunk, 7);
  for (int k = 0; k < chunk; ++k) {
    int row = std::min(t + k, ep.length() - 1);
    out.row(k) = ep.actions.row(row);
  }
  return out;
}

std::vector<Observation> observation_window(const DatasetEpisode& ep, int t,
                                            int window) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  std::vector<Observation> out;
  for (int s = std::max(0, t - window + 1); s <= t; ++s) {
    out.push_back(ep.observation(s));
  }
  return out;
}

}  // namespace svla
