#pragma once

#include <optional>
#include <string>
#include <vector>

#include "svla/rng.hpp"
#include "svla/types.hpp"

namespace svla {

// Deterministic tabletop world. The table is the unit square in the z=0
// plane; blocks are axis-aligned square prisms described by footprint side
// length and height. Dynamics are kinematic: the gripper teleports to each
// commanded pose, grasping snaps an object to the gripper, releasing drops
// it straight down onto whatever supports it.

// --- instruction grammar ---------------------------------------------------

// closed vocabulary; token ids are positions in this list
const std::vector<std::string>& vocabulary();
int vocab_size();
int token_id(const std::string& word);                 // throws on unknown word
std::string token_text(int id);                        // throws on unknown id
std::string detokenize(const std::vector<int>& ids);

// --- scene -----------------------------------------------------------------

struct SceneObject {
  int id = 0;
  int color = 0;          // index into the one-hot color planes (0..2)
  double x = 0, y = 0;    // footprint center
  double size = 0.1;      // footprint side length
  double height = 0.06;
  double bottom = 0.0;    // z of the base; >0 when resting on another block
  int support = -1;       // id of the block underneath, -1 = table

  double top() const { return bottom + height; }
  bool covers(double px, double py) const {
    return std::abs(px - x) <= 0.5 * size && std::abs(py - y) <= 0.5 * size;
  }
};

struct GripperState {
  double x = 0.08, y = 0.08, z = 0.52;
  double rx = 0, ry = 0, rz = 0;   // euler angles, unused by the dynamics
  bool closed = false;
  int held = -1;                   // object id, -1 when empty
};

struct Scene {
  std::vector<SceneObject> objects;
  // absent gripper = pure geometry; used by render tests and ESM data
  std::optional<GripperState> gripper;
  CameraParams camera;

  SceneObject& object(int id);
  const SceneObject& object(int id) const;
  // half the smallest footprint in the scene; grasp/stack tolerance
  double epsilon_pos() const;
};

// workspace and rendering constants
inline constexpr double kZMax = 0.6;          // gripper z ceiling
inline constexpr double kEpsZ = 0.03;         // grasp height tolerance
inline constexpr double kEpsRegion = 0.08;    // put-on-region tolerance
inline constexpr double kZTravel = 0.38;      // transit height
inline constexpr double kZHome = 0.52;        // gripper parking height
inline constexpr double kHomeX = 0.08, kHomeY = 0.08;
inline constexpr double kLiftRise = 0.25;     // lift clearance above grasp
// gripper finger span grows with z so the image encodes gripper height
inline constexpr double kGripBase = 0.10;
inline constexpr double kGripPerZ = 0.45;
inline constexpr double kFingerHalf = 0.035;  // half-width of a finger bar
inline constexpr double kClosedSep = 0.15;    // closed finger offset, in spans
inline constexpr double kSceneBound = 2.0;    // camera translation normalizer
inline constexpr int kGripperPlane = 3;       // color plane of the gripper

// tilted overhead camera: vertical pixel rays, range measured along the
// tilted view axis; tilt is the angle away from straight-down
CameraParams make_camera(double tilt, int image_h, int image_w);

// --- tasks -----------------------------------------------------------------

enum class TaskKind { lift, put_on, stack, put_on_higher };
std::string to_string(TaskKind k);

struct Task {
  TaskKind kind = TaskKind::lift;
  int source = 0;
  int target = -1;               // object id for stack / put_on_higher
  double region_x = 0, region_y = 0;  // for put_on
  std::vector<int> instruction;
};

// --- variation spec --------------------------------------------------------

struct VariationSpec {
  int distractors = 1;            // blocks beyond the task's required ones
  double small_lo = 0.10, small_hi = 0.13;   // source-class footprints
  double large_lo = 0.20, large_hi = 0.24;   // target-class footprints
  double height_lo = 0.06, height_hi = 0.06;
  double min_height_gap = 0.0;    // between target-class blocks
  double tilt_lo = 0.25, tilt_hi = 0.45;
  double stacked_prob = 0.0;      // source starts on a target-class block
  std::vector<TaskKind> kinds{TaskKind::lift, TaskKind::put_on, TaskKind::stack};
};

// fixed-height tasks solvable from the color planes alone
VariationSpec base_family();
// variable heights invisible in the color planes; depth required
VariationSpec height_family();

// Rejection-samples a non-overlapping layout: object 0 from the small size
// class, the rest from the large class, distinct colors, gripper parked at
// home. Throws std::runtime_error after bounded placement retries.
Scene generate_scene(const VariationSpec& spec, Rng& rng);

// Picks task roles on an existing scene: source = object 0, stack targets
// exclude the source's current support, put_on picks an unoccupied region.
Task sample_task(const Scene& scene, TaskKind kind, Rng& rng);

// 5-task chain on one scene, sequentially feasible by construction
std::vector<Task> make_chain(const Scene& scene, Rng& rng);

// --- rendering -------------------------------------------------------------

struct RenderResult {
  Image rgb;          // one-hot color planes; plane 3 is the gripper
  MatrixXd depth;     // range along the camera view axis
  MaskMatrix valid;   // 1 where depth carries geometry (everywhere here)
  CameraParams camera;
};

RenderResult render(const Scene& scene, int image_h, int image_w);

// inverse of the render camera model: per-pixel world x/y/z planes.
// Pixels where valid==0 are left at zero.
std::vector<MatrixXd> unproject_depth(const MatrixXd& depth,
                                      const MaskMatrix& valid,
                                      const CameraParams& camera);

Observation make_observation(const Scene& scene, const Task& task, int timestep,
                             int image_h, int image_w);

// --- dynamics --------------------------------------------------------------

// Applies one 7-vector action [x y z rx ry rz grip]; grip >= 0.5 means
// closed. Clamps the commanded pose into the workspace. Returns the next
// scene; rendering is left to the caller.
Scene step(const Scene& scene, const Eigen::Matrix<double, 7, 1>& action);

bool success(const Scene& scene, const Task& task);

// --- experts ---------------------------------------------------------------

struct Episode {
  Scene initial_scene;
  Task task;
  std::vector<Observation> observations;   // one per executed action
  MatrixXd actions;                        // T×7, gripper column binary
  bool success = false;
};

// Scripted waypoint expert, padded with holds to a multiple of chunk_size.
// Throws std::runtime_error if the task is infeasible in the scene.
Episode expert_policy(const Scene& scene, const Task& task, int chunk_size,
                      int image_h, int image_w);

// scene with gripper parked at home, open
Scene with_home_gripper(Scene scene);

}  // namespace svla
