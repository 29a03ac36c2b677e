#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace svla {

using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

// Multi-plane image: planes[c] is an H×W matrix, values in [0,1].
struct Image {
  std::vector<MatrixXd> planes;

  Image() = default;
  Image(int channels, int h, int w) {
    planes.assign(channels, MatrixXd::Zero(h, w));
  }

  int channels() const { return (int)planes.size(); }
  int height() const { return planes.empty() ? 0 : (int)planes[0].rows(); }
  int width() const { return planes.empty() ? 0 : (int)planes[0].cols(); }
  bool finite() const;
};

// Boolean validity mask stored as 0/1 doubles so it can flow through the
// same numeric paths as depth.
using MaskMatrix = MatrixXd;

// quaternion convention: (w, x, y, z), unit norm.
Eigen::Vector4d quat_normalize_or_identity(const Eigen::Vector4d& q);
Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& q);
Eigen::Vector4d quat_from_axis_angle(const Vector3d& axis, double angle);

struct CameraParams {
  Vector3d translation = Vector3d::Zero();      // meters, world frame
  Eigen::Vector4d quaternion{1, 0, 0, 0};       // wxyz, world-to-camera
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;  // pixels

  // world-to-camera rotation; row 2 is the range axis used by the renderer.
  Eigen::Matrix3d rotation() const { return quat_to_rotation(quaternion); }

  // 7-vector (translation, quaternion) followed by the 4 intrinsics.
  Eigen::Matrix<double, 11, 1> as_vector() const;

  // throws std::invalid_argument when the quaternion is not unit norm
  // (tolerance 1e-6) or fx/fy are not positive.
  void validate() const;
};

struct Observation {
  Image side_image;
  std::optional<Image> wrist_image;
  std::optional<MatrixXd> depth;        // meters, >= 0 where valid
  std::optional<MaskMatrix> depth_valid;
  std::optional<CameraParams> camera;
  std::vector<int> instruction;         // token ids, non-empty
  int timestep = 0;

  // enforces: depth and depth_valid are present together, images and depth
  // are finite, instruction is non-empty, timestep >= 0.
  void validate() const;
};

// C×7 action block: columns 0-5 are absolute pose (xyz + euler angles),
// column 6 is gripper state (probability internally, binary in expert data).
struct ActionChunk {
  MatrixXd values;

  ActionChunk() = default;
  explicit ActionChunk(int c) : values(MatrixXd::Zero(c, 7)) {}
  explicit ActionChunk(MatrixXd v) : values(std::move(v)) {}

  int chunk_size() const { return (int)values.rows(); }

  // enforces: 7 columns, C >= 1, finite entries, gripper column in [0,1].
  void validate() const;
};

}  // namespace svla
