#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bevkit/error.hpp"
#include "bevkit/io.hpp"
#include "bevkit/pipeline.hpp"
#include "oracles.hpp"

using namespace bevkit;

namespace {

Eigen::Matrix3d forward_looking() {
  Eigen::Matrix3d R;
  R << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  return R;
}

// Horizontal camera 1.5 m above the ground plane, looking down ego +x.
Camera horizontal_camera() {
  Eigen::Matrix3d K;
  K << 32, 0, 32, 0, 32, 32, 0, 0, 1;
  const Eigen::Vector3d center(0, 0, 1.5);
  return Camera("front", 64, 64, K, forward_looking(), -forward_looking() * center, 8);
}

SceneObject object(Eigen::Vector3d center, Eigen::Vector3d size, std::vector<double> f) {
  SceneObject o;
  o.box.center = center;
  o.box.size = size;
  o.feature = std::move(f);
  return o;
}

Scene empty_scene(std::optional<double> ground) {
  Scene s{Rig({horizontal_camera()}), {}, ground, 0};
  return s;
}

}  // namespace

TEST(RenderDepth, GroundBelowHorizonSkyAbove) {
  const Scene scene = empty_scene(0.0);
  const Camera& cam = scene.rig[0];
  const auto depth = render_depth(scene, cam);
  ASSERT_EQ(depth.rows(), 8);
  ASSERT_EQ(depth.cols(), 8);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      if (r < 4) {
        EXPECT_EQ(depth(r, c), kNoHit);
      } else {
        // Ray through row center v = 8 r + 4 drops (v - 32) / 32 per meter
        // of depth; it meets z = 0 at depth 1.5 * 32 / (v - 32).
        const double v = 8.0 * r + 4.0;
        EXPECT_NEAR(depth(r, c), 1.5 * 32.0 / (v - 32.0), 1e-12);
      }
    }
  }
  const auto none = render_depth(empty_scene(std::nullopt), cam);
  for (double d : none.data()) EXPECT_EQ(d, kNoHit);
}

TEST(RenderDepth, UnitBoxFrontFace) {
  Scene scene = empty_scene(std::nullopt);
  // Center the box on the ray through feature cell (4, 4), which passes just
  // off the principal axis.
  const Camera& cam = scene.rig[0];
  const Eigen::Vector3d through = unproject(cam, 36, 36, 10.0);
  scene.objects.push_back(object(through, {1, 1, 1}, {1.0}));
  const auto depth = render_depth(scene, cam);
  EXPECT_NEAR(depth(4, 4), 9.5, 1e-12);
}

TEST(RenderDepth, MatchesRayMarchOracle) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> x(6, 30), y(-6, 6), z(0.3, 2.5), len(0.5, 5), yaw(-3, 3);
  for (int trial = 0; trial < 6; ++trial) {
    Scene scene = empty_scene(std::nullopt);
    for (int i = 0; i < 3; ++i) {
      auto o = object({x(rng), y(rng), z(rng)}, {len(rng), len(rng), len(rng)}, {1.0});
      o.box.yaw = yaw(rng);
      scene.objects.push_back(o);
    }
    const Camera& cam = scene.rig[0];
    const auto depth = render_depth(scene, cam);
    const Eigen::Vector3d origin = cam.center();
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) {
        const Eigen::Vector3d far = unproject(cam, 8.0 * c + 4, 8.0 * r + 4, 1.0);
        const Eigen::Vector3d dir = far - origin;  // unit camera depth per unit t
        double best = kNoHit;
        for (const auto& o : scene.objects) {
          best = std::min(best, oracle::ray_box_march(origin, dir, o.box.center, o.box.size,
                                                      o.box.yaw, 60.0, 0.01));
        }
        if (std::isinf(best)) {
          EXPECT_EQ(depth(r, c), kNoHit);
        } else {
          EXPECT_NEAR(depth(r, c), best, 1e-6);
        }
      }
    }
  }
}

TEST(RenderFeatures, HitMissOcclusion) {
  Scene scene = empty_scene(0.0);
  const Camera& cam = scene.rig[0];
  const Eigen::Vector3d near_pt = unproject(cam, 36, 36, 8.0);
  const Eigen::Vector3d far_pt = unproject(cam, 36, 36, 14.0);
  scene.objects.push_back(object(far_pt, {1, 1, 1}, {2.0, 2.0}));
  scene.objects.push_back(object(near_pt, {0.5, 0.5, 0.5}, {5.0, -1.0}));
  const auto feats = render_features(scene, cam, 2);
  EXPECT_EQ(feats.at(4, 4)[0], 5.0);
  EXPECT_EQ(feats.at(4, 4)[1], -1.0);
  EXPECT_EQ(feats.at(0, 0)[0], 0.0);  // sky
  EXPECT_EQ(feats.at(7, 0)[0], 0.0);  // ground
  EXPECT_NEAR(render_depth(scene, cam)(4, 4), 7.75, 1e-12);
}

TEST(OracleDepthMap, SentinelIsZeroDistribution) {
  Array2D<double> depth(1, 2, kNoHit);
  depth(0, 1) = 5.0;
  const auto m = oracle_depth_map(depth, DepthBins{}, 0.0);
  double s0 = 0, s1 = 0;
  for (double w : m.at(0, 0)) s0 += w;
  for (double w : m.at(0, 1)) s1 += w;
  EXPECT_EQ(s0, 0.0);
  EXPECT_NEAR(s1, 1.0, 1e-12);
}

TEST(OracleClosure, SurfacePointsAreConsistent) {
  // With sigma = 0, a ref point on the rendered surface of its own feature
  // cell has consistency equal to the two-hot self product; points 2 bins
  // off the surface along the ray get zero.
  Scene scene = empty_scene(0.0);
  const Camera& cam = scene.rig[0];
  scene.objects.push_back(object(unproject(cam, 36, 36, 12.0), {2, 2, 2}, {1.0}));
  const DepthBins bins;
  std::vector<DepthDistMap> maps{oracle_depth_map(render_depth(scene, cam), bins, 0.0)};
  const double d = render_depth(scene, cam)(4, 4);
  const auto self = two_hot(d, bins);
  const std::vector<Eigen::Vector3d> pts{unproject(cam, 36, 36, d),
                                         unproject(cam, 36, 36, d + 2 * bins.delta),
                                         unproject(cam, 36, 36, d - 2 * bins.delta)};
  const auto hits = project_refs(pts, scene.rig, maps);
  double self_dot = 0;
  for (double w : self.weights) self_dot += w * w;
  EXPECT_NEAR(hits[0].consistency, self_dot, 1e-12);
  EXPECT_EQ(hits[1].consistency, 0.0);
  EXPECT_EQ(hits[2].consistency, 0.0);
}

TEST(GenerateScene, Deterministic) {
  const Rig rig = io::load_rig(BEVKIT_DATA_DIR "/reference_rig.json");
  SceneGenOptions opts;
  opts.boxes = 5;
  const auto a = generate_scene(rig, opts, 99);
  const auto b = generate_scene(rig, opts, 99);
  const auto c = generate_scene(rig, opts, 100);
  ASSERT_EQ(a.objects.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a.objects[i].box.center, b.objects[i].box.center);
    EXPECT_EQ(a.objects[i].feature, b.objects[i].feature);
  }
  EXPECT_NE(a.objects[0].box.center, c.objects[0].box.center);
  for (double v : a.objects[0].feature) {
    EXPECT_GE(v, 0.1);
    EXPECT_LE(v, 1.0);
  }
}

namespace {

PipelineConfig small_config(int channels) {
  PipelineConfig cfg;
  cfg.bev = BevSpec::square(51.2, 200, channels);
  return cfg;
}

}  // namespace

TEST(Pipeline, EmptySceneHasNoQueries) {
  Scene scene = io::load_scene(BEVKIT_DATA_DIR "/scene_empty.json");
  const auto r = run_pipeline(scene, small_config(16));
  EXPECT_TRUE(r.queries.empty());
  EXPECT_TRUE(r.refined.identical(r.bev));
}

TEST(Pipeline, OneBoxRefinesOnlyBoxCells) {
  int channels = 0;
  Scene scene = io::load_scene(BEVKIT_DATA_DIR "/scene_one_box.json", &channels);
  const auto cfg = small_config(channels);
  const auto r = run_pipeline(scene, cfg);
  ASSERT_FALSE(r.queries.empty());
  Array2D<std::uint8_t> is_query(cfg.bev.grid_h, cfg.bev.grid_w, 0);
  for (const auto& q : r.queries) is_query(q.y, q.x) = 1;
  EXPECT_EQ(is_query, r.gt_mask);
  bool changed = false;
  for (int iy = 0; iy < cfg.bev.grid_h; ++iy) {
    for (int ix = 0; ix < cfg.bev.grid_w; ++ix) {
      const auto a = r.bev.at(ix, iy), b = r.refined.at(ix, iy);
      const bool same = std::equal(a.begin(), a.end(), b.begin());
      if (!is_query(iy, ix)) {
        EXPECT_TRUE(same);
        EXPECT_EQ(r.bev.is_occupied(ix, iy), r.refined.is_occupied(ix, iy));
      }
      changed = changed || !same;
    }
  }
  EXPECT_TRUE(changed);
  EXPECT_GE(r.sparsity_after.occupied_cells, r.sparsity_before.occupied_cells);
}

TEST(Pipeline, DeterministicAcrossThreadCounts) {
  int channels = 0;
  Scene scene = io::load_scene(BEVKIT_DATA_DIR "/scene_random.json", &channels);
  auto cfg = small_config(channels);
  cfg.threads = 1;
  cfg.refine.threads = 1;
  const auto a = run_pipeline(scene, cfg);
  cfg.threads = 4;
  cfg.refine.threads = 4;
  const auto b = run_pipeline(scene, cfg);
  EXPECT_TRUE(a.bev.identical(b.bev));
  EXPECT_TRUE(a.refined.identical(b.refined));
}

TEST(Pipeline, LearnedMaskHeadPath) {
  int channels = 0;
  Scene scene = io::load_scene(BEVKIT_DATA_DIR "/scene_one_box.json", &channels);
  auto cfg = small_config(channels);
  MaskHeadWeights w(channels);
  w.bias = -10.0;  // nothing passes the threshold
  cfg.mask_weights = w;
  const auto r = run_pipeline(scene, cfg);
  EXPECT_TRUE(r.queries.empty());
  EXPECT_TRUE(r.refined.identical(r.bev));
}

TEST(Warp, IdentityPose) {
  const BevSpec spec = BevSpec::square(8.0, 16, 2);
  BevGrid cur(spec), prev(spec);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  for (auto& v : cur.features.data()) v = n(rng);
  for (auto& v : prev.features.data()) v = n(rng);
  const auto pose = EgoPose::planar(3.0, -2.0, 0.4);
  const auto out = warp_and_stack(cur, prev, pose, pose);
  ASSERT_EQ(out.spec.channels, 4);
  for (int iy = 0; iy < 16; ++iy) {
    for (int ix = 0; ix < 16; ++ix) {
      for (int k = 0; k < 2; ++k) {
        EXPECT_EQ(out.at(ix, iy)[k], cur.at(ix, iy)[k]);
        EXPECT_NEAR(out.at(ix, iy)[2 + k], prev.at(ix, iy)[k], 1e-12);
      }
    }
  }
}

TEST(Warp, OneCellTranslation) {
  const BevSpec spec = BevSpec::square(8.0, 16, 1);  // 1 m cells
  BevGrid cur(spec), prev(spec);
  for (int iy = 0; iy < 16; ++iy)
    for (int ix = 0; ix < 16; ++ix) prev.at(ix, iy)[0] = 100.0 * iy + ix;
  // The ego moved +1 m in x: current cell ix sits where previous ix + 1 was.
  const auto out = warp_and_stack(cur, prev, EgoPose::planar(0, 0, 0), EgoPose::planar(1, 0, 0));
  for (int iy = 0; iy < 16; ++iy) {
    for (int ix = 0; ix < 15; ++ix) EXPECT_NEAR(out.at(ix, iy)[1], prev.at(ix + 1, iy)[0], 1e-12);
    EXPECT_EQ(out.at(15, iy)[1], 0.0);
  }
}

TEST(Warp, BeyondExtentIsZero) {
  const BevSpec spec = BevSpec::square(8.0, 16, 1);
  BevGrid cur(spec), prev(spec);
  for (auto& v : prev.features.data()) v = 1.0;
  const auto out =
      warp_and_stack(cur, prev, EgoPose::planar(0, 0, 0), EgoPose::planar(100, 0, 0));
  for (int iy = 0; iy < 16; ++iy)
    for (int ix = 0; ix < 16; ++ix) EXPECT_EQ(out.at(ix, iy)[1], 0.0);
  BevGrid other(BevSpec::square(8.0, 8, 1));
  EXPECT_THROW(warp_and_stack(cur, other, EgoPose{}, EgoPose{}), Error);
}

TEST(Nds, TableRowsAndOracle) {
  EXPECT_NEAR(nds(0.312, {0.702, 0.275, 0.518, 0.777, 0.227}), 0.406, 1e-3);
  EXPECT_NEAR(nds(0.307, {0.722, 0.278, 0.606, 0.876, 0.235}), 0.382, 1e-3);
  EXPECT_DOUBLE_EQ(nds(1.0, {0, 0, 0, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(nds(0.2, {1.5, 2, 3, 4, 5}), 0.1);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1.2);
  for (int i = 0; i < 100; ++i) {
    const double m = u(rng) / 1.2;
    const TpErrors tp{u(rng), u(rng), u(rng), u(rng), u(rng)};
    EXPECT_NEAR(nds(m, tp), oracle::nds(m, tp), 1e-15);
    EXPECT_GE(nds(std::min(1.0, m + 0.01), tp), nds(m, tp));
  }
  EXPECT_THROW(nds(1.5, {0, 0, 0, 0, 0}), Error);
}
