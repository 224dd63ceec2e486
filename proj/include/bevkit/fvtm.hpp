#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "bevkit/array.hpp"
#include "bevkit/depth.hpp"
#include "bevkit/geometry.hpp"

namespace bevkit {

// Metric BEV extent and resolution. Column index follows x, row index follows
// y; cells are half-open [min, max).
struct BevSpec {
  double x_min = -51.2;
  double x_max = 51.2;
  double y_min = -51.2;
  double y_max = 51.2;
  int grid_h = 128;
  int grid_w = 128;
  int channels = 1;

  void validate() const;

  double cell_x() const { return (x_max - x_min) / grid_w; }
  double cell_y() const { return (y_max - y_min) / grid_h; }
  std::size_t cell_count() const { return static_cast<std::size_t>(grid_h) * grid_w; }

  // Metric center of cell (ix, iy).
  Eigen::Vector2d cell_center(int ix, int iy) const {
    return {x_min + (ix + 0.5) * cell_x(), y_min + (iy + 0.5) * cell_y()};
  }

  // Flat cell index (iy * grid_w + ix), or -1 outside the extent.
  std::int64_t cell_of(double x, double y) const;

  static BevSpec square(double half_extent, int cells, int channels);
};

struct BevGrid {
  BevSpec spec;
  FeatureMap features;     // grid_h x grid_w x channels
  Array2D<std::uint8_t> occupied;

  explicit BevGrid(const BevSpec& s)
      : spec(s), features(s.grid_h, s.grid_w, s.channels), occupied(s.grid_h, s.grid_w, 0) {}

  std::span<double> at(int ix, int iy) { return features.at(iy, ix); }
  std::span<const double> at(int ix, int iy) const { return features.at(iy, ix); }
  bool is_occupied(int ix, int iy) const { return occupied(iy, ix) != 0; }

  // Bitwise equality of features and occupancy.
  bool identical(const BevGrid& other) const;
};

// Weighted frustum points with their source-pixel features. Features are
// stored once per source pixel and referenced by id.
class LiftedPoints {
 public:
  explicit LiftedPoints(int channels = 1);

  int channels() const { return channels_; }
  std::size_t size() const { return positions_.size(); }
  bool empty() const { return positions_.empty(); }

  // Registers a feature vector and returns its id.
  std::uint32_t add_feature(std::span<const double> feature);
  void add_point(const Eigen::Vector3d& position, std::uint32_t feature_id, double weight);
  // Convenience: one point with its own feature row.
  void push_back(const Eigen::Vector3d& position, std::span<const double> feature, double weight);
  void append(const LiftedPoints& other);
  void reserve(std::size_t points);

  const Eigen::Vector3d& position(std::size_t i) const { return positions_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  std::span<double> weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> feature(std::size_t i) const {
    return {feature_table_.data() + static_cast<std::size_t>(feature_ids_[i]) * channels_,
            static_cast<std::size_t>(channels_)};
  }

 private:
  int channels_;
  std::vector<Eigen::Vector3d> positions_;
  std::vector<double> weights_;
  std::vector<std::uint32_t> feature_ids_;
  std::vector<double> feature_table_;
};

struct SparsityReport {
  std::size_t total_cells = 0;
  std::size_t occupied_cells = 0;
  double occupancy_rate = 0.0;
  std::vector<std::size_t> camera_hits;  // lifted points landing in-extent, per camera

  double blank_rate() const { return 1.0 - occupancy_rate; }
};

struct LiftOptions {
  double weight_floor = 0.0;  // points with weight < floor are dropped
};

// One point per (feature cell, depth bin) carrying that cell's feature and
// bin weight.
LiftedPoints lift(const FeatureMap& features, const DepthDistMap& depth,
                  const FrustumPoints& frustum, const LiftOptions& options = {});

// Serial reference pooling. Points accumulate in input order.
BevGrid splat_naive(const LiftedPoints& points, const BevSpec& spec);

// Sort-then-reduce pooling; bit-identical to splat_naive. threads <= 0 uses
// the OpenMP default.
BevGrid splat_pooled(const LiftedPoints& points, const BevSpec& spec, int threads = 0);

struct ForwardOptions {
  LiftOptions lift;
  int threads = 0;
};

struct ForwardResult {
  BevGrid grid;
  std::vector<std::size_t> camera_hits;
};

// Lift every camera, concatenate in rig order, then splat_pooled.
ForwardResult forward_vtm_with_hits(const Rig& rig, std::span<const FeatureMap> features,
                                    std::span<const DepthDistMap> depths, const BevSpec& spec,
                                    const ForwardOptions& options = {});

inline BevGrid forward_vtm(const Rig& rig, std::span<const FeatureMap> features,
                           std::span<const DepthDistMap> depths, const BevSpec& spec,
                           const ForwardOptions& options = {}) {
  return forward_vtm_with_hits(rig, features, depths, spec, options).grid;
}

SparsityReport occupancy_stats(const BevGrid& grid);
SparsityReport occupancy_stats(const ForwardResult& result);

// Every frustum point of every camera in rig order, unit feature (C = 1) and
// uniform depth weights.
LiftedPoints geometric_lift(const Rig& rig, const DepthBins& bins);

// Purely geometric splat: every frustum point of every camera with unit
// feature and uniform depth weights.
ForwardResult geometric_forward(const Rig& rig, const DepthBins& bins, const BevSpec& spec,
                                int threads = 0);

}  // namespace bevkit
