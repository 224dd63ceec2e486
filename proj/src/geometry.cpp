#include "bevkit/geometry.hpp"

#include <cmath>
#include <set>

#include <Eigen/LU>

#include "bevkit/depth.hpp"
#include "bevkit/error.hpp"

namespace bevkit {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

namespace {

[[noreturn]] void reject(const std::string& camera, const std::string& field,
                         const std::string& why) {
  throw Error(ErrorCode::kValidation, "camera '" + camera + "': " + field + ": " + why);
}

}  // namespace

Camera::Camera(std::string name, int width, int height, const Eigen::Matrix3d& K,
               const Eigen::Matrix3d& R, const Eigen::Vector3d& t, int feature_stride)
    : name_(std::move(name)), width_(width), height_(height), K_(K), R_(R), t_(t),
      feature_stride_(feature_stride) {
  if (width_ < 1) reject(name_, "width", "must be >= 1");
  if (height_ < 1) reject(name_, "height", "must be >= 1");
  if (feature_stride_ < 1) reject(name_, "stride", "must be >= 1");
  if (!K_.allFinite() || !R_.allFinite() || !t_.allFinite()) {
    reject(name_, "K/R/t", "non-finite entry");
  }
  if (K_(2, 0) != 0.0 || K_(2, 1) != 0.0 || K_(2, 2) != 1.0) {
    reject(name_, "K", "last row must be [0, 0, 1]");
  }
  if (!(K_(0, 0) > 0.0) || !(K_(1, 1) > 0.0)) {
    reject(name_, "K", "focal lengths must be positive");
  }
  const double ortho_err =
      (R_.transpose() * R_ - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > 1e-9) {
    reject(name_, "R", "not orthonormal (max |R^T R - I| = " + std::to_string(ortho_err) + ")");
  }
  K_inv_ = K_.inverse();
}

Rig::Rig(std::vector<Camera> cameras) : cameras_(std::move(cameras)) {
  if (cameras_.empty()) {
    throw Error(ErrorCode::kValidation, "rig: at least one camera required");
  }
  std::set<std::string> names;
  for (const auto& cam : cameras_) {
    if (!names.insert(cam.name()).second) {
      throw Error(ErrorCode::kValidation, "rig: duplicate camera name '" + cam.name() + "'");
    }
  }
}

Matrix34d make_projection_matrix(const Camera& camera) {
  Matrix34d extrinsic;
  extrinsic.leftCols<3>() = camera.rotation();
  extrinsic.col(3) = camera.translation();
  return camera.intrinsics() * extrinsic;
}

ProjectionHit project(const Camera& camera, const Eigen::Vector3d& point_ego, int camera_index) {
  const Eigen::Vector3d p_cam = camera.rotation() * point_ego + camera.translation();
  const Eigen::Vector3d h = camera.intrinsics() * p_cam;
  ProjectionHit hit;
  hit.camera_index = camera_index;
  hit.depth = h.z();
  if (hit.depth <= kMinDepth) {
    hit.valid = false;
    return hit;
  }
  hit.u = h.x() / hit.depth;
  hit.v = h.y() / hit.depth;
  hit.valid = hit.u >= 0.0 && hit.u < camera.width() && hit.v >= 0.0 && hit.v < camera.height();
  return hit;
}

Eigen::Vector3d unproject(const Camera& camera, double u, double v, double depth) {
  if (!(depth > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "unproject: depth must be positive");
  }
  const Eigen::Vector3d p_cam = camera.intrinsics_inverse() * Eigen::Vector3d(u, v, 1.0) * depth;
  return camera.rotation().transpose() * (p_cam - camera.translation());
}

FrustumPoints build_frustum(const Camera& camera, const DepthBins& bins) {
  bins.validate();
  FrustumPoints f;
  f.cells_w = camera.feature_width();
  f.cells_h = camera.feature_height();
  f.bins = bins.count;
  f.points.resize(static_cast<std::size_t>(f.cells_w) * f.cells_h * f.bins);
  const double stride = camera.feature_stride();

#pragma omp parallel for schedule(static)
  for (int row = 0; row < f.cells_h; ++row) {
    for (int col = 0; col < f.cells_w; ++col) {
      const double u = (col + 0.5) * stride;
      const double v = (row + 0.5) * stride;
      const std::size_t base = (static_cast<std::size_t>(row) * f.cells_w + col) * f.bins;
      for (int k = 0; k < f.bins; ++k) {
        f.points[base + k] = unproject(camera, u, v, bins.center(k));
      }
    }
  }
  return f;
}

}  // namespace bevkit
