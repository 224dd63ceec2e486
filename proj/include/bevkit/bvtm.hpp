#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "bevkit/array.hpp"
#include "bevkit/depth.hpp"
#include "bevkit/frpn.hpp"
#include "bevkit/fvtm.hpp"
#include "bevkit/geometry.hpp"

namespace bevkit {

// Reference heights per BEV query, endpoint-inclusive.
struct HeightSampling {
  double z_min = -5.0;
  double z_max = 3.0;
  int n_ref = 4;

  void validate() const;
  std::vector<double> heights() const;
};

// Affine map y = W x + b, W row-major out x in.
struct LinearMap {
  int out = 0;
  int in = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  static LinearMap zeros(int out, int in);
  static LinearMap identity(int n);

  void apply(std::span<const double> x, std::span<double> y) const;
  // Only output rows [row_begin, row_begin + y.size()).
  void apply_rows(std::span<const double> x, int row_begin, std::span<double> y) const;
};

// Parameters of the deformable sampler. Value channels are split evenly
// across heads; offsets are in feature-map cells and shared across cameras
// and reference heights of a query.
struct DeformableParams {
  int channels = 1;
  int heads = 8;
  int points_per_head = 4;
  LinearMap offset_map;  // C -> heads * points * 2, (du, dv) pairs
  LinearMap weight_map;  // C -> heads * points, softmax per head
  LinearMap value_map;   // C -> C
  LinearMap output_map;  // C -> C

  // Zero offsets, uniform attention, identity value/output maps.
  static DeformableParams identity(int channels, int heads = 8, int points_per_head = 4);

  void validate() const;
  int head_dim() const { return channels / heads; }
};

struct RefHit {
  int ref_index = 0;
  int camera_index = 0;
  ProjectionHit hit;
  Eigen::Vector2d feature_uv = Eigen::Vector2d::Zero();  // pixel / stride
  double consistency = 0.0;
};

// Metric center of the query cell lifted to each sampled height.
std::vector<Eigen::Vector3d> reference_points(int ix, int iy, const BevSpec& spec,
                                              const HeightSampling& heights);

// Camera-major, reference-minor. Invalid hits carry zero consistency.
std::vector<RefHit> project_refs(std::span<const Eigen::Vector3d> points, const Rig& rig,
                                 std::span<const DepthDistMap> depth_maps);

// Clamp-to-edge bilinear sample at feature-map coordinates (cell centers at
// i + 0.5).
void bilinear_sample(const FeatureMap& feat, double u, double v, std::span<double> out);

std::vector<double> deformable_sample(std::span<const double> query, const FeatureMap& feat,
                                      const Eigen::Vector2d& uv, const DeformableParams& params);

enum class HitNormalization {
  kValidHitCount,  // divide by max(1, number of valid hits)
  kNone,
};

std::vector<double> sca(std::span<const double> query, std::span<const FeatureMap> feats,
                        std::span<const RefHit> hits, const DeformableParams& params,
                        HitNormalization norm = HitNormalization::kValidHitCount);

// As sca, with each sample scaled by its hit's depth consistency.
std::vector<double> sca_da(std::span<const double> query, std::span<const FeatureMap> feats,
                           std::span<const RefHit> hits, const DeformableParams& params,
                           HitNormalization norm = HitNormalization::kValidHitCount);

struct RefineOptions {
  HeightSampling heights;
  HitNormalization norm = HitNormalization::kValidHitCount;
  int threads = 0;
};

// One backward pass: B'[q] = B[q] + sca_da(q) for every query; other cells
// copied unchanged.
BevGrid refine(const BevGrid& bev, std::span<const BevQuery> queries, const Rig& rig,
               std::span<const FeatureMap> feats, std::span<const DepthDistMap> depth_maps,
               const DeformableParams& params, const RefineOptions& options = {});

}  // namespace bevkit
