#include "bevkit/bvtm.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

#include "bevkit/error.hpp"

namespace bevkit {

void HeightSampling::validate() const {
  if (n_ref < 1) throw Error(ErrorCode::kInvalidArgument, "heights: n_ref must be >= 1");
  if (!(z_min <= z_max)) throw Error(ErrorCode::kInvalidArgument, "heights: z_min > z_max");
}

std::vector<double> HeightSampling::heights() const {
  validate();
  if (n_ref == 1) return {0.5 * (z_min + z_max)};
  std::vector<double> z(n_ref);
  const double step = (z_max - z_min) / (n_ref - 1);
  for (int j = 0; j < n_ref; ++j) z[j] = z_min + j * step;
  z.back() = z_max;
  return z;
}

LinearMap LinearMap::zeros(int out, int in) {
  return {out, in, std::vector<double>(static_cast<std::size_t>(out) * in, 0.0),
          std::vector<double>(out, 0.0)};
}

LinearMap LinearMap::identity(int n) {
  LinearMap m = zeros(n, n);
  for (int i = 0; i < n; ++i) m.weight[static_cast<std::size_t>(i) * n + i] = 1.0;
  return m;
}

void LinearMap::apply(std::span<const double> x, std::span<double> y) const {
  apply_rows(x, 0, y);
}

void LinearMap::apply_rows(std::span<const double> x, int row_begin, std::span<double> y) const {
  if (static_cast<int>(x.size()) != in || row_begin < 0 ||
      row_begin + static_cast<int>(y.size()) > out) {
    throw Error(ErrorCode::kShapeMismatch, "linear map: dimension mismatch");
  }
  for (std::size_t r = 0; r < y.size(); ++r) {
    const std::size_t row = row_begin + r;
    const double* w = weight.data() + row * in;
    double acc = bias[row];
    for (int c = 0; c < in; ++c) acc += w[c] * x[c];
    y[r] = acc;
  }
}

DeformableParams DeformableParams::identity(int channels, int heads, int points_per_head) {
  DeformableParams p;
  p.channels = channels;
  p.heads = heads;
  p.points_per_head = points_per_head;
  p.offset_map = LinearMap::zeros(heads * points_per_head * 2, channels);
  p.weight_map = LinearMap::zeros(heads * points_per_head, channels);
  p.value_map = LinearMap::identity(channels);
  p.output_map = LinearMap::identity(channels);
  p.validate();
  return p;
}

void DeformableParams::validate() const {
  if (channels < 1 || heads < 1 || points_per_head < 1) {
    throw Error(ErrorCode::kInvalidArgument, "deformable params: counts must be >= 1");
  }
  if (channels % heads != 0) {
    throw Error(ErrorCode::kShapeMismatch, "deformable params: channels not divisible by heads");
  }
  const auto check = [](const LinearMap& m, int out, int in, const char* name) {
    if (m.out != out || m.in != in ||
        m.weight.size() != static_cast<std::size_t>(out) * in ||
        m.bias.size() != static_cast<std::size_t>(out)) {
      throw Error(ErrorCode::kShapeMismatch, std::string("deformable params: ") + name +
                                                 " has inconsistent dimensions");
    }
  };
  check(offset_map, heads * points_per_head * 2, channels, "offset_map");
  check(weight_map, heads * points_per_head, channels, "weight_map");
  check(value_map, channels, channels, "value_map");
  check(output_map, channels, channels, "output_map");
}

std::vector<Eigen::Vector3d> reference_points(int ix, int iy, const BevSpec& spec,
                                              const HeightSampling& heights) {
  if (ix < 0 || ix >= spec.grid_w || iy < 0 || iy >= spec.grid_h) {
    throw Error(ErrorCode::kInvalidArgument, "reference_points: cell outside grid");
  }
  const Eigen::Vector2d xy = spec.cell_center(ix, iy);
  std::vector<Eigen::Vector3d> pts;
  for (double z : heights.heights()) pts.emplace_back(xy.x(), xy.y(), z);
  return pts;
}

std::vector<RefHit> project_refs(std::span<const Eigen::Vector3d> points, const Rig& rig,
                                 std::span<const DepthDistMap> depth_maps) {
  if (depth_maps.size() != rig.size()) {
    throw Error(ErrorCode::kShapeMismatch, "project_refs: one depth map per camera required");
  }
  std::vector<RefHit> hits;
  hits.reserve(rig.size() * points.size());
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const Camera& cam = rig[i];
    const double stride = cam.feature_stride();
    for (std::size_t j = 0; j < points.size(); ++j) {
      RefHit h;
      h.ref_index = static_cast<int>(j);
      h.camera_index = static_cast<int>(i);
      h.hit = project(cam, points[j], static_cast<int>(i));
      if (h.hit.valid) {
        h.feature_uv = {h.hit.u / stride, h.hit.v / stride};
        const auto dist = sample_distribution(depth_maps[i], h.feature_uv.x(), h.feature_uv.y());
        h.consistency = consistency(dist, h.hit.depth, depth_maps[i].bins());
      }
      hits.push_back(h);
    }
  }
  return hits;
}

void bilinear_sample(const FeatureMap& feat, double u, double v, std::span<double> out) {
  if (feat.height() < 1 || feat.width() < 1) {
    throw Error(ErrorCode::kShapeMismatch, "bilinear_sample: empty feature map");
  }
  const auto axis = [](double coord, int size, int& i0, int& i1, double& t) {
    const double x = std::clamp(coord - 0.5, 0.0, static_cast<double>(size - 1));
    i0 = static_cast<int>(std::floor(x));
    i1 = std::min(i0 + 1, size - 1);
    t = x - i0;
  };
  int c0, c1, r0, r1;
  double tu, tv;
  axis(u, feat.width(), c0, c1, tu);
  axis(v, feat.height(), r0, r1, tv);
  const auto a = feat.at(r0, c0);
  const auto b = feat.at(r0, c1);
  const auto c = feat.at(r1, c0);
  const auto d = feat.at(r1, c1);
  const double wa = (1 - tu) * (1 - tv), wb = tu * (1 - tv), wc = (1 - tu) * tv, wd = tu * tv;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = wa * a[k] + wb * b[k] + wc * c[k] + wd * d[k];
  }
}

std::vector<double> deformable_sample(std::span<const double> query, const FeatureMap& feat,
                                      const Eigen::Vector2d& uv, const DeformableParams& params) {
  const int channels = params.channels;
  if (static_cast<int>(query.size()) != channels || feat.channels() != channels) {
    throw Error(ErrorCode::kShapeMismatch, "deformable_sample: channel mismatch");
  }
  const int heads = params.heads, points = params.points_per_head, hd = params.head_dim();

  std::vector<double> offsets(static_cast<std::size_t>(heads) * points * 2);
  std::vector<double> logits(static_cast<std::size_t>(heads) * points);
  params.offset_map.apply(query, offsets);
  params.weight_map.apply(query, logits);

  std::vector<double> concat(channels, 0.0);
  std::vector<double> sample(channels);
  std::vector<double> value(hd);
  for (int h = 0; h < heads; ++h) {
    const double* lg = logits.data() + static_cast<std::size_t>(h) * points;
    const double peak = *std::max_element(lg, lg + points);
    double norm = 0.0;
    for (int p = 0; p < points; ++p) norm += std::exp(lg[p] - peak);

    for (int p = 0; p < points; ++p) {
      const double w = std::exp(lg[p] - peak) / norm;
      const double* off = offsets.data() + (static_cast<std::size_t>(h) * points + p) * 2;
      bilinear_sample(feat, uv.x() + off[0], uv.y() + off[1], sample);
      params.value_map.apply_rows(sample, h * hd, value);
      for (int k = 0; k < hd; ++k) concat[h * hd + k] += w * value[k];
    }
  }
  std::vector<double> out(channels);
  params.output_map.apply(concat, out);
  return out;
}

namespace {

std::vector<double> aggregate(std::span<const double> query, std::span<const FeatureMap> feats,
                              std::span<const RefHit> hits, const DeformableParams& params,
                              HitNormalization norm, bool depth_aware) {
  std::vector<double> total(params.channels, 0.0);
  int valid = 0;
  for (const auto& h : hits) {
    if (!h.hit.valid) continue;
    if (h.camera_index < 0 || static_cast<std::size_t>(h.camera_index) >= feats.size()) {
      throw Error(ErrorCode::kShapeMismatch, "sca: hit references a missing camera feature map");
    }
    ++valid;
    const auto s = deformable_sample(query, feats[h.camera_index], h.feature_uv, params);
    const double scale = depth_aware ? h.consistency : 1.0;
    for (int k = 0; k < params.channels; ++k) total[k] += s[k] * scale;
  }
  if (norm == HitNormalization::kValidHitCount && valid > 1) {
    for (double& t : total) t /= valid;
  }
  return total;
}

}  // namespace

std::vector<double> sca(std::span<const double> query, std::span<const FeatureMap> feats,
                        std::span<const RefHit> hits, const DeformableParams& params,
                        HitNormalization norm) {
  return aggregate(query, feats, hits, params, norm, false);
}

std::vector<double> sca_da(std::span<const double> query, std::span<const FeatureMap> feats,
                           std::span<const RefHit> hits, const DeformableParams& params,
                           HitNormalization norm) {
  return aggregate(query, feats, hits, params, norm, true);
}

BevGrid refine(const BevGrid& bev, std::span<const BevQuery> queries, const Rig& rig,
               std::span<const FeatureMap> feats, std::span<const DepthDistMap> depth_maps,
               const DeformableParams& params, const RefineOptions& options) {
  params.validate();
  if (params.channels != bev.spec.channels) {
    throw Error(ErrorCode::kShapeMismatch, "refine: params channels != BEV channels");
  }
  if (feats.size() != rig.size() || depth_maps.size() != rig.size()) {
    throw Error(ErrorCode::kShapeMismatch, "refine: per-camera inputs must match rig size");
  }
  options.heights.validate();

  BevGrid out = bev;
  const auto n = static_cast<std::int64_t>(queries.size());
  const int threads = options.threads > 0 ? options.threads : 0;
  bool failed = false;
  std::string failure;

#pragma omp parallel for schedule(dynamic, 16) num_threads(threads > 0 ? threads : omp_get_max_threads())
  for (std::int64_t qi = 0; qi < n; ++qi) {
    try {
      const BevQuery& q = queries[qi];
      const auto refs = reference_points(q.x, q.y, bev.spec, options.heights);
      const auto hits = project_refs(refs, rig, depth_maps);
      const auto update = sca_da(q.feature, feats, hits, params, options.norm);
      auto cell = out.at(q.x, q.y);
      const auto base = bev.at(q.x, q.y);
      bool nonzero = false;
      for (int k = 0; k < bev.spec.channels; ++k) {
        cell[k] = base[k] + update[k];
        nonzero = nonzero || update[k] != 0.0;
      }
      if (nonzero) out.occupied(q.y, q.x) = 1;
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        failure = e.what();
      }
    }
  }
  if (failed) throw Error(ErrorCode::kShapeMismatch, "refine: " + failure);
  return out;
}

}  // namespace bevkit
