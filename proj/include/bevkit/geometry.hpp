#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace bevkit {

struct DepthBins;

using Matrix34d = Eigen::Matrix<double, 3, 4>;

// Pinhole camera. Extrinsics map ego-frame points into the camera frame:
// X_cam = R * X_ego + t. Camera frame is x right, y down, z forward.
class Camera {
 public:
  // Throws Error(kValidation) naming the camera and offending field.
  Camera(std::string name, int width, int height, const Eigen::Matrix3d& K,
         const Eigen::Matrix3d& R, const Eigen::Vector3d& t, int feature_stride);

  const std::string& name() const { return name_; }
  int width() const { return width_; }
  int height() const { return height_; }
  int feature_stride() const { return feature_stride_; }
  const Eigen::Matrix3d& intrinsics() const { return K_; }
  const Eigen::Matrix3d& rotation() const { return R_; }
  const Eigen::Vector3d& translation() const { return t_; }

  // Feature-map size: ceil(image / stride) on each axis.
  int feature_width() const { return (width_ + feature_stride_ - 1) / feature_stride_; }
  int feature_height() const { return (height_ + feature_stride_ - 1) / feature_stride_; }

  // Camera center in ego coordinates.
  Eigen::Vector3d center() const { return -R_.transpose() * t_; }

  const Eigen::Matrix3d& intrinsics_inverse() const { return K_inv_; }

 private:
  std::string name_;
  int width_;
  int height_;
  Eigen::Matrix3d K_;
  Eigen::Matrix3d R_;
  Eigen::Vector3d t_;
  Eigen::Matrix3d K_inv_;
  int feature_stride_;
};

class Rig {
 public:
  // Requires at least one camera and unique names.
  explicit Rig(std::vector<Camera> cameras);

  std::size_t size() const { return cameras_.size(); }
  const Camera& operator[](std::size_t i) const { return cameras_[i]; }
  const std::vector<Camera>& cameras() const { return cameras_; }

 private:
  std::vector<Camera> cameras_;
};

struct ProjectionHit {
  int camera_index = 0;
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
  bool valid = false;
};

// Depths at or below this are behind the image plane.
inline constexpr double kMinDepth = 1e-9;

Matrix34d make_projection_matrix(const Camera& camera);

// d * [u v 1]^T = P * [x y z 1]^T. u, v are still filled in for points in
// front of the camera that fall outside the image.
ProjectionHit project(const Camera& camera, const Eigen::Vector3d& point_ego,
                      int camera_index = 0);

// Ego-frame point whose projection is (u, v) at the given depth. Throws on
// non-positive depth.
Eigen::Vector3d unproject(const Camera& camera, double u, double v, double depth);

// Ego-frame points for every feature-cell center and depth-bin center,
// ordered row-major over cells, then ascending bins.
struct FrustumPoints {
  int cells_w = 0;
  int cells_h = 0;
  int bins = 0;
  std::vector<Eigen::Vector3d> points;

  const Eigen::Vector3d& at(int row, int col, int bin) const {
    return points[(static_cast<std::size_t>(row) * cells_w + col) * bins + bin];
  }
};

FrustumPoints build_frustum(const Camera& camera, const DepthBins& bins);

}  // namespace bevkit
