#include "bevkit/fvtm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "bevkit/error.hpp"

namespace bevkit {

void BevSpec::validate() const {
  if (!(x_max > x_min) || !(y_max > y_min)) {
    throw Error(ErrorCode::kInvalidArgument, "BEV spec: extent must satisfy max > min");
  }
  if (grid_h < 1 || grid_w < 1 || channels < 1) {
    throw Error(ErrorCode::kInvalidArgument, "BEV spec: grid dims and channels must be >= 1");
  }
}

std::int64_t BevSpec::cell_of(double x, double y) const {
  if (!(x >= x_min && x < x_max && y >= y_min && y < y_max)) return -1;
  const int ix = std::min(static_cast<int>(std::floor((x - x_min) / cell_x())), grid_w - 1);
  const int iy = std::min(static_cast<int>(std::floor((y - y_min) / cell_y())), grid_h - 1);
  return static_cast<std::int64_t>(iy) * grid_w + ix;
}

BevSpec BevSpec::square(double half_extent, int cells, int channels) {
  BevSpec s;
  s.x_min = s.y_min = -half_extent;
  s.x_max = s.y_max = half_extent;
  s.grid_h = s.grid_w = cells;
  s.channels = channels;
  s.validate();
  return s;
}

bool BevGrid::identical(const BevGrid& other) const {
  const auto a = features.data();
  const auto b = other.features.data();
  return features.height() == other.features.height() &&
         features.width() == other.features.width() &&
         features.channels() == other.features.channels() && occupied == other.occupied &&
         std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
}

LiftedPoints::LiftedPoints(int channels) : channels_(channels) {
  if (channels < 1) throw Error(ErrorCode::kInvalidArgument, "lifted points: channels < 1");
}

std::uint32_t LiftedPoints::add_feature(std::span<const double> feature) {
  if (static_cast<int>(feature.size()) != channels_) {
    throw Error(ErrorCode::kShapeMismatch, "lifted points: feature length != channels");
  }
  const auto id = static_cast<std::uint32_t>(feature_table_.size() / channels_);
  feature_table_.insert(feature_table_.end(), feature.begin(), feature.end());
  return id;
}

void LiftedPoints::add_point(const Eigen::Vector3d& position, std::uint32_t feature_id,
                             double weight) {
  positions_.push_back(position);
  weights_.push_back(weight);
  feature_ids_.push_back(feature_id);
}

void LiftedPoints::push_back(const Eigen::Vector3d& position, std::span<const double> feature,
                             double weight) {
  add_point(position, add_feature(feature), weight);
}

void LiftedPoints::append(const LiftedPoints& other) {
  if (other.channels_ != channels_) {
    throw Error(ErrorCode::kShapeMismatch, "lifted points: channel mismatch on append");
  }
  const auto shift = static_cast<std::uint32_t>(feature_table_.size() / channels_);
  feature_table_.insert(feature_table_.end(), other.feature_table_.begin(),
                        other.feature_table_.end());
  positions_.insert(positions_.end(), other.positions_.begin(), other.positions_.end());
  weights_.insert(weights_.end(), other.weights_.begin(), other.weights_.end());
  feature_ids_.reserve(feature_ids_.size() + other.feature_ids_.size());
  for (auto id : other.feature_ids_) feature_ids_.push_back(id + shift);
}

void LiftedPoints::reserve(std::size_t points) {
  positions_.reserve(points);
  weights_.reserve(points);
  feature_ids_.reserve(points);
}

LiftedPoints lift(const FeatureMap& features, const DepthDistMap& depth,
                  const FrustumPoints& frustum, const LiftOptions& options) {
  if (features.height() != depth.height() || features.width() != depth.width()) {
    throw Error(ErrorCode::kShapeMismatch, "lift: feature map and depth map sizes differ");
  }
  if (frustum.cells_h != depth.height() || frustum.cells_w != depth.width() ||
      frustum.bins != depth.bins().count) {
    throw Error(ErrorCode::kShapeMismatch, "lift: frustum does not match depth map");
  }
  LiftedPoints out(features.channels());
  out.reserve(frustum.points.size());
  for (int row = 0; row < depth.height(); ++row) {
    for (int col = 0; col < depth.width(); ++col) {
      const auto fid = out.add_feature(features.at(row, col));
      const auto dist = depth.at(row, col);
      for (int k = 0; k < frustum.bins; ++k) {
        if (dist[k] < options.weight_floor) continue;
        out.add_point(frustum.at(row, col, k), fid, dist[k]);
      }
    }
  }
  return out;
}

ForwardResult forward_vtm_with_hits(const Rig& rig, std::span<const FeatureMap> features,
                                    std::span<const DepthDistMap> depths, const BevSpec& spec,
                                    const ForwardOptions& options) {
  if (features.size() != rig.size() || depths.size() != rig.size()) {
    throw Error(ErrorCode::kShapeMismatch, "forward_vtm: per-camera inputs must match rig size");
  }
  spec.validate();
  LiftedPoints all(spec.channels);
  std::vector<std::size_t> hits(rig.size(), 0);
  for (std::size_t i = 0; i < rig.size(); ++i) {
    if (features[i].channels() != spec.channels) {
      throw Error(ErrorCode::kShapeMismatch, "forward_vtm: camera '" + rig[i].name() +
                                                 "' feature channels != BEV channels");
    }
    const FrustumPoints frustum = build_frustum(rig[i], depths[i].bins());
    const LiftedPoints lifted = lift(features[i], depths[i], frustum, options.lift);
    for (std::size_t p = 0; p < lifted.size(); ++p) {
      const auto& pos = lifted.position(p);
      if (lifted.weight(p) > 0.0 && spec.cell_of(pos.x(), pos.y()) >= 0) ++hits[i];
    }
    all.append(lifted);
  }
  return {splat_pooled(all, spec, options.threads), std::move(hits)};
}

SparsityReport occupancy_stats(const BevGrid& grid) {
  SparsityReport r;
  r.total_cells = grid.spec.cell_count();
  for (auto flag : grid.occupied.data()) r.occupied_cells += flag != 0;
  r.occupancy_rate =
      r.total_cells == 0 ? 0.0 : static_cast<double>(r.occupied_cells) / r.total_cells;
  return r;
}

SparsityReport occupancy_stats(const ForwardResult& result) {
  SparsityReport r = occupancy_stats(result.grid);
  r.camera_hits = result.camera_hits;
  return r;
}

LiftedPoints geometric_lift(const Rig& rig, const DepthBins& bins) {
  bins.validate();
  LiftedPoints out(1);
  const double unit = 1.0;
  const std::uint32_t fid = out.add_feature({&unit, 1});
  const double w = 1.0 / bins.count;
  for (const auto& cam : rig.cameras()) {
    const FrustumPoints f = build_frustum(cam, bins);
    out.reserve(out.size() + f.points.size());
    for (const auto& p : f.points) out.add_point(p, fid, w);
  }
  return out;
}

ForwardResult geometric_forward(const Rig& rig, const DepthBins& bins, const BevSpec& spec,
                                int threads) {
  bins.validate();
  BevSpec s = spec;
  s.channels = 1;
  std::vector<FeatureMap> features;
  std::vector<DepthDistMap> depths;
  const auto uniform = DepthDistribution::uniform(bins.count);
  for (const auto& cam : rig.cameras()) {
    features.emplace_back(cam.feature_height(), cam.feature_width(), 1, 1.0);
    DepthDistMap d(bins, cam.feature_height(), cam.feature_width());
    for (int r = 0; r < d.height(); ++r) {
      for (int c = 0; c < d.width(); ++c) d.set(r, c, uniform);
    }
    depths.push_back(std::move(d));
  }
  ForwardOptions opts;
  opts.threads = threads;
  return forward_vtm_with_hits(rig, features, depths, s, opts);
}

}  // namespace bevkit
