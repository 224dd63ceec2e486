#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "bevkit/array.hpp"
#include "bevkit/bvtm.hpp"
#include "bevkit/depth.hpp"
#include "bevkit/frpn.hpp"
#include "bevkit/fvtm.hpp"
#include "bevkit/geometry.hpp"

namespace bevkit {

struct SceneObject {
  Box3D box;
  std::vector<double> feature;
};

struct Scene {
  Rig rig;
  std::vector<SceneObject> objects;
  std::optional<double> ground_z = 0.0;  // nullopt: no ground plane
  std::uint64_t seed = 0;

  std::vector<Box3D> boxes() const;
};

struct SceneGenOptions {
  int boxes = 4;
  int channels = 16;
  double min_range = 8.0;
  double max_range = 40.0;
  double ground_z = 0.0;
};

// Deterministic in (rig, options, seed).
Scene generate_scene(const Rig& rig, const SceneGenOptions& options, std::uint64_t seed);

// Deterministic feature vector in [0.1, 1] per component.
std::vector<double> seeded_feature(int channels, std::uint64_t seed, std::uint64_t salt);

inline constexpr double kNoHit = std::numeric_limits<double>::infinity();

// Nearest positive ray hit per feature cell, as camera-frame depth; kNoHit
// where the ray escapes.
Array2D<double> render_depth(const Scene& scene, const Camera& camera);

// Feature of the first object hit per cell; zero for ground or sky.
FeatureMap render_features(const Scene& scene, const Camera& camera, int channels);

DepthDistMap oracle_depth_map(const Array2D<double>& depth, const DepthBins& bins, double sigma);

struct PipelineConfig {
  DepthBins bins;
  BevSpec bev;                 // channels must match scene features
  double depth_sigma = 1.0;    // oracle depth-net spread, meters
  double threshold = kDefaultForegroundThreshold;
  std::optional<MaskHeadWeights> mask_weights;  // nullopt: oracle GT mask
  std::optional<DeformableParams> params;       // nullopt: identity sampler
  RefineOptions refine;
  int threads = 0;
};

struct PipelineResult {
  BevGrid bev;
  ForegroundMask mask;
  Array2D<std::uint8_t> gt_mask;
  std::vector<BevQuery> queries;
  BevGrid refined;
  SparsityReport sparsity_before;
  SparsityReport sparsity_after;
};

PipelineResult run_pipeline(const Scene& scene, const PipelineConfig& config);

struct EgoPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // ego-to-global

  static EgoPose planar(double x, double y, double yaw);
  void validate() const;
};

// Resamples prev into the current ego frame (planar x, y, yaw) and stacks
// [current | warped prev] along channels.
BevGrid warp_and_stack(const BevGrid& current, const BevGrid& previous,
                       const EgoPose& pose_previous, const EgoPose& pose_current);

// mATE, mASE, mAOE, mAVE, mAAE.
using TpErrors = std::array<double, 5>;

double nds(double mean_ap, const TpErrors& tp);

}  // namespace bevkit
