#include "svla/types.hpp"

#include <Eigen/Geometry>
#include <cmath>

namespace svla {

bool Image::finite() const {
  for (const auto& p : planes) {
    if (!p.allFinite()) return false;
  }
  return true;
}

Eigen::Vector4d quat_normalize_or_identity(const Eigen::Vector4d& q) {
  const double n = q.norm();
  if (n == 0.0) return Eigen::Vector4d{1, 0, 0, 0};
  return q / n;
}

Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& q) {
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

Eigen::Vector4d quat_from_axis_angle(const Vector3d& axis, double angle) {
  const Eigen::Quaterniond q(Eigen::AngleAxisd(angle, axis.normalized()));
  return Eigen::Vector4d{q.w(), q.x(), q.y(), q.z()};
}

Eigen::Matrix<double, 11, 1> CameraParams::as_vector() const {
  Eigen::Matrix<double, 11, 1> v;
  v << translation, quaternion, fx, fy, cx, cy;
  return v;
}

void CameraParams::validate() const {
  if (!translation.allFinite() || !quaternion.allFinite()) {
    throw std::invalid_argument("camera parameters must be finite");
  }
  if (std::abs(quaternion.norm() - 1.0) > 1e-6) {
    throw std::invalid_argument("camera quaternion must have unit norm");
  }
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("camera focal lengths must be positive");
  }
}

void Observation::validate() const {
  if (depth.has_value() != depth_valid.has_value()) {
    throw std::invalid_argument(
        "depth and depth_valid must be present together");
  }
  if (!side_image.finite()) {
    throw std::invalid_argument("side_image has non-finite values");
  }
  if (wrist_image && !wrist_image->finite()) {
    throw std::invalid_argument("wrist_image has non-finite values");
  }
  if (depth) {
    if (!depth->allFinite() || !depth_valid->allFinite()) {
      throw std::invalid_argument("depth has non-finite values");
    }
    if (depth->rows() != depth_valid->rows() ||
        depth->cols() != depth_valid->cols()) {
      throw std::invalid_argument("depth and depth_valid shapes differ");
    }
  }
  if (camera) camera->validate();
  if (instruction.empty()) {
    throw std::invalid_argument("instruction must be non-empty");
  }
  if (timestep < 0) {
    throw std::invalid_argument("timestep must be non-negative");
  }
}

void ActionChunk::validate() const {
  if (values.cols() != 7) {
    throw std::invalid_argument("action chunk must have 7 columns");
  }
  if (values.rows() < 1) {
    throw std::invalid_argument("action chunk must have at least one row");
  }
  if (!values.allFinite()) {
    throw std::invalid_argument("action chunk has non-finite values");
  }
  for (int i = 0; i < values.rows(); ++i) {
    const double g = values(i, 6);
    if (g < 0.0 || g > 1.0) {
      throw std::invalid_argument("gripper column must lie in [0,1]");
    }
  }
}

}  // namespace svla
