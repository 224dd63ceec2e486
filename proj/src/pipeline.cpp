#include "bevkit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "bevkit/error.hpp"

namespace bevkit {

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

struct RayHit {
  double t = kNoHit;
  int object = -1;  // -1 for ground or nothing
};

// Slab test in the box frame. Returns the entry parameter, or kNoHit.
double intersect_box(const Box3D& box, const Eigen::Vector3d& origin,
                     const Eigen::Vector3d& dir) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const Eigen::Vector3d o = origin - box.center;
  const Eigen::Vector3d lo(c * o.x() + s * o.y(), -s * o.x() + c * o.y(), o.z());
  const Eigen::Vector3d ld(c * dir.x() + s * dir.y(), -s * dir.x() + c * dir.y(), dir.z());
  const Eigen::Vector3d half = 0.5 * box.size;

  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (ld[a] == 0.0) {
      if (lo[a] < -half[a] || lo[a] > half[a]) return kNoHit;
      continue;
    }
    double t0 = (-half[a] - lo[a]) / ld[a];
    double t1 = (half[a] - lo[a]) / ld[a];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter > t_exit || t_enter <= kMinDepth) return kNoHit;
  return t_enter;
}

RayHit cast(const Scene& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
  RayHit best;
  if (scene.ground_z && dir.z() != 0.0) {
    const double t = (*scene.ground_z - origin.z()) / dir.z();
    if (t > kMinDepth) best.t = t;
  }
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const double t = intersect_box(scene.objects[i].box, origin, dir);
    if (t < best.t) best = {t, static_cast<int>(i)};
  }
  return best;
}

// Ray through the feature-cell center, parameterized so that the ray
// parameter equals camera-frame depth.
Eigen::Vector3d cell_ray(const Camera& cam, int row, int col) {
  const double s = cam.feature_stride();
  const Eigen::Vector3d pix((col + 0.5) * s, (row + 0.5) * s, 1.0);
  return cam.rotation().transpose() * (cam.intrinsics_inverse() * pix);
}

}  // namespace

std::vector<Box3D> Scene::boxes() const {
  std::vector<Box3D> out;
  for (const auto& o : objects) out.push_back(o.box);
  return out;
}

std::vector<double> seeded_feature(int channels, std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<double> f(channels);
  for (double& v : f) v = uniform(rng, 0.1, 1.0);
  return f;
}

Scene generate_scene(const Rig& rig, const SceneGenOptions& options, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Scene scene{rig, {}, options.ground_z, seed};
  for (int i = 0; i < options.boxes; ++i) {
    const Camera& cam = rig[static_cast<std::size_t>(rng() % rig.size())];
    const Eigen::Vector3d forward = cam.rotation().transpose() * Eigen::Vector3d::UnitZ();
    const double heading = std::atan2(forward.y(), forward.x());
    const double half_fov = std::atan(0.5 * cam.width() / cam.intrinsics()(0, 0));
    const double bearing = heading + uniform(rng, -0.7, 0.7) * half_fov;
    const double range = uniform(rng, options.min_range, options.max_range);

    SceneObject obj;
    obj.box.size = {uniform(rng, 3.5, 5.0), uniform(rng, 1.6, 2.1), uniform(rng, 1.4, 1.9)};
    const Eigen::Vector3d c = cam.center();
    obj.box.center = {c.x() + range * std::cos(bearing), c.y() + range * std::sin(bearing),
                      options.ground_z + 0.5 * obj.box.size.z()};
    obj.box.yaw = uniform(rng, -std::numbers::pi, std::numbers::pi);
    obj.feature = seeded_feature(options.channels, seed, static_cast<std::uint64_t>(i));
    scene.objects.push_back(std::move(obj));
  }
  return scene;
}

Array2D<double> render_depth(const Scene& scene, const Camera& camera) {
  Array2D<double> depth(camera.feature_height(), camera.feature_width(), kNoHit);
  const Eigen::Vector3d origin = camera.center();
#pragma omp parallel for schedule(static)
  for (int row = 0; row < depth.rows(); ++row) {
    for (int col = 0; col < depth.cols(); ++col) {
      depth(row, col) = cast(scene, origin, cell_ray(camera, row, col)).t;
    }
  }
  return depth;
}

FeatureMap render_features(const Scene& scene, const Camera& camera, int channels) {
  for (const auto& o : scene.objects) {
    if (static_cast<int>(o.feature.size()) != channels) {
      throw Error(ErrorCode::kShapeMismatch, "render_features: object feature length != channels");
    }
  }
  FeatureMap out(camera.feature_height(), camera.feature_width(), channels);
  const Eigen::Vector3d origin = camera.center();
#pragma omp parallel for schedule(static)
  for (int row = 0; row < out.height(); ++row) {
    for (int col = 0; col < out.width(); ++col) {
      const RayHit hit = cast(scene, origin, cell_ray(camera, row, col));
      if (hit.object < 0) continue;
      const auto& f = scene.objects[hit.object].feature;
      std::copy(f.begin(), f.end(), out.at(row, col).begin());
    }
  }
  return out;
}

DepthDistMap oracle_depth_map(const Array2D<double>& depth, const DepthBins& bins, double sigma) {
  DepthDistMap map(bins, depth.rows(), depth.cols());
  for (int r = 0; r < depth.rows(); ++r) {
    for (int c = 0; c < depth.cols(); ++c) {
      map.set(r, c, oracle_distribution(depth(r, c), bins, sigma));
    }
  }
  return map;
}

PipelineResult run_pipeline(const Scene& scene, const PipelineConfig& config) {
  config.bins.validate();
  config.bev.validate();
  const int channels = config.bev.channels;

  std::vector<FeatureMap> feats;
  std::vector<DepthDistMap> depths;
  for (const auto& cam : scene.rig.cameras()) {
    feats.push_back(render_features(scene, cam, channels));
    depths.push_back(oracle_depth_map(render_depth(scene, cam), config.bins, config.depth_sigma));
  }

  ForwardOptions fwd_opts;
  fwd_opts.threads = config.threads;
  ForwardResult fwd = forward_vtm_with_hits(scene.rig, feats, depths, config.bev, fwd_opts);

  auto gt = rasterize_gt_mask(scene.boxes(), config.bev);
  ForegroundMask mask =
      config.mask_weights ? mask_head(fwd.grid, *config.mask_weights) : oracle_mask(gt);
  auto queries = select_queries(fwd.grid, mask, config.threshold);

  const DeformableParams params =
      config.params ? *config.params
                    : DeformableParams::identity(channels, channels % 8 == 0 ? 8 : 1, 4);
  RefineOptions refine_opts = config.refine;
  refine_opts.threads = config.threads;
  BevGrid refined = refine(fwd.grid, queries, scene.rig, feats, depths, params, refine_opts);

  SparsityReport before = occupancy_stats(fwd);
  SparsityReport after = occupancy_stats(refined);
  return {std::move(fwd.grid), std::move(mask), std::move(gt), std::move(queries),
          std::move(refined), std::move(before), std::move(after)};
}

EgoPose EgoPose::planar(double x, double y, double yaw) {
  EgoPose p;
  p.rotation = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  p.translation = {x, y, 0.0};
  return p;
}

void EgoPose::validate() const {
  const double err =
      (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!(err <= 1e-9)) throw Error(ErrorCode::kValidation, "ego pose: rotation not orthonormal");
}

BevGrid warp_and_stack(const BevGrid& current, const BevGrid& previous,
                       const EgoPose& pose_previous, const EgoPose& pose_current) {
  const BevSpec& spec = current.spec;
  const BevSpec& ps = previous.spec;
  if (ps.x_min != spec.x_min || ps.x_max != spec.x_max || ps.y_min != spec.y_min ||
      ps.y_max != spec.y_max || ps.grid_h != spec.grid_h || ps.grid_w != spec.grid_w ||
      ps.channels != spec.channels) {
    throw Error(ErrorCode::kShapeMismatch, "warp_and_stack: frames must share a BEV spec");
  }
  pose_previous.validate();
  pose_current.validate();

  // Current ego -> previous ego, reduced to x, y and yaw.
  const Eigen::Matrix3d rel_r = pose_previous.rotation.transpose() * pose_current.rotation;
  const Eigen::Vector3d rel_t =
      pose_previous.rotation.transpose() * (pose_current.translation - pose_previous.translation);
  const double yaw = std::atan2(rel_r(1, 0), rel_r(0, 0));
  const double c = std::cos(yaw), s = std::sin(yaw);

  BevSpec out_spec = spec;
  out_spec.channels = 2 * spec.channels;
  BevGrid out(out_spec);
  const int ch = spec.channels;
  const double cx = spec.cell_x(), cy = spec.cell_y();

#pragma omp parallel for schedule(static)
  for (int iy = 0; iy < spec.grid_h; ++iy) {
    for (int ix = 0; ix < spec.grid_w; ++ix) {
      auto dst = out.at(ix, iy);
      const auto cur = current.at(ix, iy);
      std::copy(cur.begin(), cur.end(), dst.begin());

      const Eigen::Vector2d p = spec.cell_center(ix, iy);
      const double px = c * p.x() - s * p.y() + rel_t.x();
      const double py = s * p.x() + c * p.y() + rel_t.y();
      bool nonzero = false;
      if (px >= spec.x_min && px < spec.x_max && py >= spec.y_min && py < spec.y_max) {
        const double fx = std::clamp((px - spec.x_min) / cx - 0.5, 0.0, spec.grid_w - 1.0);
        const double fy = std::clamp((py - spec.y_min) / cy - 0.5, 0.0, spec.grid_h - 1.0);
        const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
        const int x1 = std::min(x0 + 1, spec.grid_w - 1), y1 = std::min(y0 + 1, spec.grid_h - 1);
        const double tx = fx - x0, ty = fy - y0;
        const auto a = previous.at(x0, y0), b = previous.at(x1, y0);
        const auto d = previous.at(x0, y1), e = previous.at(x1, y1);
        for (int k = 0; k < ch; ++k) {
          const double v = (1 - tx) * (1 - ty) * a[k] + tx * (1 - ty) * b[k] +
                           (1 - tx) * ty * d[k] + tx * ty * e[k];
          dst[ch + k] = v;
          nonzero = nonzero || v != 0.0;
        }
      }
      out.occupied(iy, ix) = current.is_occupied(ix, iy) || nonzero ? 1 : 0;
    }
  }
  return out;
}

double nds(double mean_ap, const TpErrors& tp) {
  if (!(mean_ap >= 0.0 && mean_ap <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "nds: mAP must lie in [0, 1]");
  }
  double tp_score = 0.0;
  for (double e : tp) {
    if (!(e >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "nds: TP errors must be >= 0");
    tp_score += 1.0 - std::min(1.0, e);
  }
  return 0.1 * (5.0 * mean_ap + tp_score);
}

}  // namespace bevkit
