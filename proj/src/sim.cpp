#include "svla/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace svla {

// --- instruction grammar ---------------------------------------------------

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words = {
      "lift", "put",   "stack", "the",  "block", "on",   "higher",
      "red",  "green", "blue",  "front", "back",  "left", "right"};
  return words;
}

int vocab_size() { return (int)vocabulary().size(); }

int token_id(const std::string& word) {
  const auto& v = vocabulary();
  for (size_t i = 0; i < v.size(); ++i) {
    if (v[i] == word) return (int)i;
  }
  throw std::invalid_argument("unknown word: " + word);
}

std::string token_text(int id) {
  const auto& v = vocabulary();
  if (id < 0 || id >= (int)v.size()) {
    throw std::out_of_range("unknown token id: " + std::to_string(id));
  }
  return v[id];
}

std::string detokenize(const std::vector<int>& ids) {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token_text(ids[i]);
  }
  return out;
}

namespace {

const char* kColorWords[3] = {"red", "green", "blue"};

std::vector<int> tokens(std::initializer_list<std::string> words) {
  std::vector<int> ids;
  for (const auto& w : words) ids.push_back(token_id(w));
  return ids;
}

}  // namespace

// --- scene -----------------------------------------------------------------

SceneObject& Scene::object(int id) {
  for (auto& o : objects) {
    if (o.id == id) return o;
  }
  throw std::out_of_range("no object with id " + std::to_string(id));
}

const SceneObject& Scene::object(int id) const {
  return const_cast<Scene*>(this)->object(id);
}

double Scene::epsilon_pos() const {
  double smallest = 1.0;
  for (const auto& o : objects) smallest = std::min(smallest, o.size);
  return 0.5 * smallest;
}

CameraParams make_camera(double tilt, int image_h, int image_w) {
  CameraParams cam;
  cam.translation = Vector3d(0.5, -0.5, 1.2);
  // rotate the straight-down view away from vertical by `tilt` about x; the
  // third rotation row (the range axis) becomes (0, sin tilt, -cos tilt)
  cam.quaternion = quat_from_axis_angle(Vector3d(1, 0, 0), M_PI - tilt);
  cam.fx = image_w;
  cam.fy = image_h;
  cam.cx = 0.0;
  cam.cy = 0.0;
  return cam;
}

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::lift: return "lift";
    case TaskKind::put_on: return "put_on";
    case TaskKind::stack: return "stack";
    case TaskKind::put_on_higher: return "put_on_higher";
  }
  throw std::logic_error("unreachable task kind");
}

VariationSpec base_family() { return VariationSpec{}; }

VariationSpec height_family() {
  VariationSpec spec;
  spec.height_lo = 0.05;
  spec.height_hi = 0.28;
  spec.min_height_gap = 0.07;
  spec.kinds = {TaskKind::lift, TaskKind::put_on_higher};
  return spec;
}

// --- scene generation ------------------------------------------------------

namespace {

constexpr double kEdgeMargin = 0.04;
constexpr double kGapMargin = 0.02;
constexpr double kHomeClearance = 0.25;

bool overlaps(const SceneObject& a, const SceneObject& b) {
  const double r = 0.5 * (a.size + b.size) + kGapMargin;
  return std::abs(a.x - b.x) < r && std::abs(a.y - b.y) < r;
}

}  // namespace

Scene generate_scene(const VariationSpec& spec, Rng& rng) {
  bool needs_target = false;
  for (TaskKind k : spec.kinds) {
    if (k == TaskKind::stack || k == TaskKind::put_on_higher) needs_target = true;
  }
  const int n = (needs_target ? 2 : 1) + spec.distractors;
  if (n < 1 || n > 3) {
    throw std::invalid_argument("scene needs between 1 and 3 blocks");
  }

  Scene scene;
  const double tilt = rng.uniform(spec.tilt_lo, spec.tilt_hi);
  scene.camera = make_camera(tilt, 28, 28);  // intrinsics fixed at render time

  std::vector<SceneObject> objs(n);
  for (int i = 0; i < n; ++i) {
    objs[i].id = i;
    objs[i].size = i == 0 ? rng.uniform(spec.small_lo, spec.small_hi)
                          : rng.uniform(spec.large_lo, spec.large_hi);
  }
  for (int i = 0; i < n; ++i) {
    objs[i].height = rng.uniform(spec.height_lo, spec.height_hi);
  }
  if (spec.min_height_gap > 0.0 && n >= 3) {
    // target-class blocks must differ in height by at least the gap
    int tries = 0;
    while (std::abs(objs[1].height - objs[2].height) < spec.min_height_gap) {
      objs[2].height = rng.uniform(spec.height_lo, spec.height_hi);
      if (++tries > 1000) {
        throw std::runtime_error("could not satisfy the height gap");
      }
    }
  }

  int colors[3] = {0, 1, 2};
  for (int i = 2; i > 0; --i) {
    std::swap(colors[i], colors[rng.uniform_int((uint64_t)i + 1)]);
  }
  for (int i = 0; i < n; ++i) objs[i].color = colors[i];

  const bool start_stacked =
      n >= 2 && spec.stacked_prob > 0.0 && rng.uniform() < spec.stacked_prob;

  for (int i = 0; i < n; ++i) {
    if (i == 0 && start_stacked) continue;  // placed on its support below
    const double lo = kEdgeMargin + 0.5 * objs[i].size;
    const double hi = 1.0 - kEdgeMargin - 0.5 * objs[i].size;
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      objs[i].x = rng.uniform(lo, hi);
      objs[i].y = rng.uniform(lo, hi);
      if (std::max(std::abs(objs[i].x - kHomeX), std::abs(objs[i].y - kHomeY)) <
          kHomeClearance) {
        continue;  // keep the gripper's parking spot visually unambiguous
      }
      placed = true;
      for (int j = 0; j < i; ++j) {
        if (j == 0 && start_stacked) continue;
        if (overlaps(objs[i], objs[j])) {
          placed = false;
          break;
        }
      }
    }
    if (!placed) throw std::runtime_error("block placement failed");
  }

  if (start_stacked) {
    const int support = 1 + (int)rng.uniform_int((uint64_t)(n - 1));
    objs[0].x = objs[support].x;
    objs[0].y = objs[support].y;
    objs[0].bottom = objs[support].top();
    objs[0].support = support;
  }

  scene.objects = std::move(objs);
  return scene;
}

Scene with_home_gripper(Scene scene) {
  scene.gripper = GripperState{};
  return scene;
}

// --- task sampling ---------------------------------------------------------

namespace {

struct Region {
  const char* first;
  const char* second;
  double x, y;
};

const Region kRegions[4] = {
    {"front", "left", 0.25, 0.25},
    {"front", "right", 0.75, 0.25},
    {"back", "left", 0.25, 0.75},
    {"back", "right", 0.75, 0.75},
};

bool region_clear(const Scene& scene, const Region& r, int source) {
  const auto& src = scene.object(source);
  // a region is usable when no other block intrudes and the source is not
  // already sitting there
  for (const auto& o : scene.objects) {
    if (o.id == source) continue;
    const double reach = 0.5 * (o.size + src.size) + kGapMargin;
    if (std::abs(o.x - r.x) < reach && std::abs(o.y - r.y) < reach) return false;
  }
  const double dx = src.x - r.x, dy = src.y - r.y;
  if (src.support == -1 && std::sqrt(dx * dx + dy * dy) < 2.0 * kEpsRegion) {
    return false;
  }
  return true;
}

}  // namespace

Task sample_task(const Scene& scene, TaskKind kind, Rng& rng) {
  Task task;
  task.kind = kind;
  task.source = 0;
  const auto& src = scene.object(0);
  const std::string src_color = kColorWords[src.color];

  switch (kind) {
    case TaskKind::lift:
      task.instruction = tokens({"lift", "the", src_color, "block"});
      break;
    case TaskKind::put_on: {
      std::vector<int> clear;
      for (int r = 0; r < 4; ++r) {
        if (region_clear(scene, kRegions[r], 0)) clear.push_back(r);
      }
      if (clear.empty()) throw std::runtime_error("no free region for put_on");
      const Region& r = kRegions[clear[rng.uniform_int(clear.size())]];
      task.region_x = r.x;
      task.region_y = r.y;
      task.instruction =
          tokens({"put", "the", src_color, "block", "on", "the", r.first, r.second});
      break;
    }
    case TaskKind::stack: {
      std::vector<int> candidates;
      for (const auto& o : scene.objects) {
        if (o.id != 0 && o.id != src.support) candidates.push_back(o.id);
      }
      if (candidates.empty()) throw std::runtime_error("no stack target");
      task.target = candidates[rng.uniform_int(candidates.size())];
      const std::string tgt_color = kColorWords[scene.object(task.target).color];
      task.instruction = tokens(
          {"stack", "the", src_color, "block", "on", "the", tgt_color, "block"});
      break;
    }
    case TaskKind::put_on_higher: {
      // the taller of the target-class blocks; never named by color
      int best = -1;
      for (const auto& o : scene.objects) {
        if (o.id == 0) continue;
        if (best < 0 || o.height > scene.object(best).height) best = o.id;
      }
      if (best < 0) throw std::runtime_error("no target for put_on_higher");
      task.target = best;
      task.instruction = tokens(
          {"put", "the", src_color, "block", "on", "the", "higher", "block"});
      break;
    }
  }
  return task;
}

std::vector<Task> make_chain(const Scene& scene, Rng& rng) {
  if (scene.objects.size() < 3) {
    throw std::invalid_argument("chains need three blocks");
  }
  // fixed template; the block colors and regions still vary with the scene
  std::vector<Task> chain;
  chain.push_back(sample_task(scene, TaskKind::lift, rng));

  Task stack1 = sample_task(scene, TaskKind::stack, rng);
  stack1.target = 1;
  const auto& src = scene.object(0);
  stack1.instruction = tokens({"stack", "the", kColorWords[src.color], "block",
                               "on", "the",
                               kColorWords[scene.object(1).color], "block"});
  chain.push_back(stack1);

  chain.push_back(sample_task(scene, TaskKind::lift, rng));

  // region clearance only depends on blocks 1 and 2, which never move
  Scene sans_source = scene;
  sans_source.objects.erase(sans_source.objects.begin());
  std::vector<int> clear;
  for (int r = 0; r < 4; ++r) {
    bool ok = true;
    for (const auto& o : sans_source.objects) {
      const double reach = 0.5 * (o.size + src.size) + kGapMargin;
      if (std::abs(o.x - kRegions[r].x) < reach &&
          std::abs(o.y - kRegions[r].y) < reach) {
        ok = false;
        break;
      }
    }
    if (ok) clear.push_back(r);
  }
  if (clear.empty()) throw std::runtime_error("no free region for the chain");
  const Region& region = kRegions[clear[rng.uniform_int(clear.size())]];
  Task put;
  put.kind = TaskKind::put_on;
  put.source = 0;
  put.region_x = region.x;
  put.region_y = region.y;
  put.instruction = tokens({"put", "the", kColorWords[src.color], "block", "on",
                            "the", region.first, region.second});
  chain.push_back(put);

  Task stack2 = stack1;
  stack2.target = 2;
  stack2.instruction = tokens({"stack", "the", kColorWords[src.color], "block",
                               "on", "the",
                               kColorWords[scene.object(2).color], "block"});
  chain.push_back(stack2);
  return chain;
}

// --- rendering -------------------------------------------------------------

namespace {

// length of [lo, hi] ∩ [p, p+1], all in pixel units; a fully covered pixel
// yields exactly 1 because the bounds are picked, not recomputed
double pixel_overlap(double lo, double hi, int p) {
  return std::max(0.0, std::min(hi, (double)p + 1) - std::max(lo, (double)p));
}

}  // namespace

RenderResult render(const Scene& scene, int image_h, int image_w) {
  RenderResult out;
  out.rgb = Image(4, image_h, image_w);
  out.depth = MatrixXd::Zero(image_h, image_w);
  out.valid = MatrixXd::Ones(image_h, image_w);
  out.camera = scene.camera;
  out.camera.fx = image_w;
  out.camera.fy = image_h;

  const Eigen::Matrix3d rot = out.camera.rotation();
  const Eigen::RowVector3d range_axis = rot.row(2);
  const Vector3d cam_t = out.camera.translation;

  // bottom-to-top paint order for the color compositing below
  std::vector<int> order(scene.objects.size());
  for (size_t k = 0; k < order.size(); ++k) order[k] = (int)k;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto &oa = scene.objects[a], &ob = scene.objects[b];
    if (oa.top() != ob.top()) return oa.top() < ob.top();
    return oa.id < ob.id;
  });

  for (int i = 0; i < image_h; ++i) {
    const double y = (i + 0.5) / image_h;
    for (int j = 0; j < image_w; ++j) {
      const double x = (j + 0.5) / image_w;

      // Color planes composite area coverage bottom-to-top: a block scales
      // everything underneath by its uncovered fraction. Edge pixels thus
      // carry the block's sub-pixel position, which pure center-ray
      // sampling would quantize away.
      for (int idx : order) {
        const auto& o = scene.objects[idx];
        const double f =
            pixel_overlap((o.x - 0.5 * o.size) * image_w,
                          (o.x + 0.5 * o.size) * image_w, j) *
            pixel_overlap((o.y - 0.5 * o.size) * image_h,
                          (o.y + 0.5 * o.size) * image_h, i);
        if (f == 0.0) continue;
        for (int ch = 0; ch < kGripperPlane; ++ch) {
          out.rgb.planes[ch](i, j) *= 1.0 - f;
        }
        out.rgb.planes[o.color](i, j) += f;
      }

      // depth stays a center-ray sample: topmost block surface under the
      // vertical pixel ray; ties keep the earlier block, which cannot
      // happen for stacked blocks anyway
      double z_top = 0.0;
      for (const auto& o : scene.objects) {
        if (o.covers(x, y) && o.top() > z_top) z_top = o.top();
      }

      if (scene.gripper) {
        const auto& g = *scene.gripper;
        const double s = kGripBase + kGripPerZ * g.z;
        // two finger bars; closing pulls them inward. Blocks under the
        // gripper stay visible (the finger plane never hides color planes),
        // and center-ray finger pixels carry the gripper's own height into
        // the depth map.
        const double sep = (g.closed ? kClosedSep : 0.5) * s;
        const double half_len = 0.5 * s + kFingerHalf;
        const double fy =
            pixel_overlap((g.y - half_len) * image_h, (g.y + half_len) * image_h, i);
        const double left =
            pixel_overlap((g.x - sep - kFingerHalf) * image_w,
                          (g.x - sep + kFingerHalf) * image_w, j);
        const double right =
            pixel_overlap((g.x + sep - kFingerHalf) * image_w,
                          (g.x + sep + kFingerHalf) * image_w, j);
        const double both =
            pixel_overlap((g.x + sep - kFingerHalf) * image_w,
                          (g.x - sep + kFingerHalf) * image_w, j);
        const double fx = left + right - both;  // bars may overlap when closed
        out.rgb.planes[kGripperPlane](i, j) = fx * fy;

        const bool on_finger =
            (std::abs(std::abs(x - g.x) - sep) <= kFingerHalf) &&
            std::abs(y - g.y) <= half_len;
        if (on_finger && g.z > z_top) z_top = g.z;
      }

      const Vector3d p(x, y, z_top);
      out.depth(i, j) = range_axis * (p - cam_t);
    }
  }
  return out;
}

std::vector<MatrixXd> unproject_depth(const MatrixXd& depth,
                                      const MaskMatrix& valid,
                                      const CameraParams& camera) {
  const int h = (int)depth.rows(), w = (int)depth.cols();
  std::vector<MatrixXd> points(3, MatrixXd::Zero(h, w));
  const Eigen::RowVector3d r3 = camera.rotation().row(2);
  if (r3[2] == 0.0) {
    throw std::invalid_argument("camera range axis is horizontal");
  }
  const Vector3d c = camera.translation;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (valid(i, j) == 0.0) continue;
      const double x = (j + 0.5 - camera.cx) / camera.fx;
      const double y = (i + 0.5 - camera.cy) / camera.fy;
      const double z =
          c.z() + (depth(i, j) - r3[0] * (x - c.x()) - r3[1] * (y - c.y())) / r3[2];
      points[0](i, j) = x;
      points[1](i, j) = y;
      points[2](i, j) = z;
    }
  }
  return points;
}

Observation make_observation(const Scene& scene, const Task& task, int timestep,
                             int image_h, int image_w) {
  RenderResult r = render(scene, image_h, image_w);
  Observation obs;
  obs.side_image = std::move(r.rgb);
  obs.depth = std::move(r.depth);
  obs.depth_valid = std::move(r.valid);
  obs.camera = r.camera;
  obs.instruction = task.instruction;
  obs.timestep = timestep;
  return obs;
}

// --- dynamics --------------------------------------------------------------

namespace {

bool graspable(const Scene& scene, const SceneObject& o) {
  for (const auto& other : scene.objects) {
    if (other.support == o.id) return false;  // something rests on it
  }
  return true;
}

}  // namespace

Scene step(const Scene& scene, const Eigen::Matrix<double, 7, 1>& action) {
  if (!action.allFinite()) {
    throw std::invalid_argument("action must be finite");
  }
  Scene next = scene;
  if (!next.gripper) next.gripper = GripperState{};
  GripperState& g = *next.gripper;

  const bool was_closed = g.closed;
  g.x = std::clamp(action[0], 0.0, 1.0);
  g.y = std::clamp(action[1], 0.0, 1.0);
  g.z = std::clamp(action[2], 0.0, kZMax);
  g.rx = action[3];
  g.ry = action[4];
  g.rz = action[5];
  g.closed = action[6] >= 0.5;

  if (g.held >= 0) {
    // held block rides with the gripper, its top at the gripper height
    SceneObject& o = next.object(g.held);
    o.x = g.x;
    o.y = g.y;
    o.bottom = g.z - o.height;
    o.support = -1;
  }

  if (g.closed && !was_closed && g.held < 0) {
    // closing edge: grasp the nearest graspable block within tolerance
    const double eps = next.epsilon_pos();
    int best = -1;
    double best_d = 0.0;
    for (const auto& o : next.objects) {
      if (!graspable(next, o)) continue;
      const double d = std::hypot(g.x - o.x, g.y - o.y);
      if (d <= eps && std::abs(g.z - o.top()) <= kEpsZ) {
        if (best < 0 || d < best_d) {
          best = o.id;
          best_d = d;
        }
      }
    }
    if (best >= 0) {
      g.held = best;
      SceneObject& o = next.object(best);
      o.x = g.x;
      o.y = g.y;
      o.bottom = g.z - o.height;
      o.support = -1;
    }
  } else if (!g.closed && was_closed && g.held >= 0) {
    // opening edge: drop straight down onto the tallest block under the
    // release point, or the table
    SceneObject& o = next.object(g.held);
    o.x = g.x;
    o.y = g.y;
    int support = -1;
    double support_top = 0.0;
    for (const auto& other : next.objects) {
      if (other.id == o.id) continue;
      if (other.covers(g.x, g.y) && other.top() >= support_top) {
        support = other.id;
        support_top = other.top();
      }
    }
    o.bottom = support_top;
    o.support = support;
    g.held = -1;
  }
  return next;
}

bool success(const Scene& scene, const Task& task) {
  const auto& src = scene.object(task.source);
  const bool held =
      scene.gripper && scene.gripper->held == task.source;
  switch (task.kind) {
    case TaskKind::lift:
      return held && src.bottom >= 0.1;
    case TaskKind::put_on: {
      if (held || src.support != -1) return false;
      const double d = std::hypot(src.x - task.region_x, src.y - task.region_y);
      return d <= kEpsRegion;
    }
    case TaskKind::stack:
    case TaskKind::put_on_higher: {
      if (held || src.support != task.target) return false;
      const auto& tgt = scene.object(task.target);
      const double d = std::hypot(src.x - tgt.x, src.y - tgt.y);
      return d <= scene.epsilon_pos();
    }
  }
  return false;
}

// --- experts ---------------------------------------------------------------

Episode expert_policy(const Scene& scene, const Task& task, int chunk_size,
                      int image_h, int image_w) {
  if (chunk_size < 1) throw std::invalid_argument("chunk_size must be >= 1");
  Scene start = scene;
  if (!start.gripper) start.gripper = GripperState{};

  const auto& src = start.object(task.source);
  using A = Eigen::Matrix<double, 7, 1>;
  auto pose = [](double x, double y, double z, double grip) {
    A a;
    a << x, y, z, 0, 0, 0, grip;
    return a;
  };

  std::vector<A> plan;
  const double grasp_z = src.top();
  plan.push_back(pose(src.x, src.y, kZTravel, 0));
  plan.push_back(pose(src.x, src.y, grasp_z, 0));
  plan.push_back(pose(src.x, src.y, grasp_z, 1));
  plan.push_back(pose(src.x, src.y, grasp_z + kLiftRise, 1));

  if (task.kind != TaskKind::lift) {
    double tx, ty, place_z;
    if (task.kind == TaskKind::put_on) {
      tx = task.region_x;
      ty = task.region_y;
      place_z = src.height + 0.02;
    } else {
      const auto& tgt = start.object(task.target);
      tx = tgt.x;
      ty = tgt.y;
      place_z = tgt.top() + src.height + 0.02;
    }
    const double transit_z = std::min(std::max(kZTravel, place_z + 0.05), kZMax);
    plan.push_back(pose(tx, ty, transit_z, 1));
    plan.push_back(pose(tx, ty, place_z, 1));
    plan.push_back(pose(tx, ty, place_z, 0));
    plan.push_back(pose(tx, ty, kZHome, 0));
  }
  while (plan.size() % (size_t)chunk_size != 0) {
    plan.push_back(plan.back());  // hold
  }

  Episode ep;
  ep.initial_scene = start;
  ep.task = task;
  ep.actions = MatrixXd((int)plan.size(), 7);
  Scene current = start;
  for (size_t t = 0; t < plan.size(); ++t) {
    ep.observations.push_back(
        make_observation(current, task, (int)t, image_h, image_w));
    ep.actions.row((int)t) = plan[t].transpose();
    current = step(current, plan[t]);
  }
  ep.success = success(current, task);
  if (!ep.success) {
    throw std::runtime_error("expert failed task " + to_string(task.kind));
  }
  return ep;
}

}  // namespace svla
