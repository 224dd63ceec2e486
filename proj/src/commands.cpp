#include "bevkit/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "bevkit/bvtm.hpp"
#include "bevkit/error.hpp"
#include "bevkit/frpn.hpp"
#include "bevkit/io.hpp"

namespace bevkit::cli {

namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string csv_row(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out + "\n";
}

}  // namespace

void Settings::apply_config_json(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kParse, "config: expected a JSON object");
  try {
    if (doc.contains("d0")) bins.d0 = doc["d0"].get<double>();
    if (doc.contains("delta")) bins.delta = doc["delta"].get<double>();
    if (doc.contains("bins")) bins.count = doc["bins"].get<int>();
    if (doc.contains("half_extent")) half_extent = doc["half_extent"].get<double>();
    if (doc.contains("bev")) bev_size = doc["bev"].get<int>();
    if (doc.contains("stride")) {
      stride = doc["stride"].get<int>();
      stride_override = true;
    }
    if (doc.contains("tf")) threshold = doc["tf"].get<double>();
    if (doc.contains("sigma")) depth_sigma = doc["sigma"].get<double>();
    if (doc.contains("map_sigma")) map_sigma = doc["map_sigma"].get<double>();
    if (doc.contains("heads")) heads = doc["heads"].get<int>();
    if (doc.contains("points")) points_per_head = doc["points"].get<int>();
    if (doc.contains("threads")) threads = doc["threads"].get<int>();
    if (doc.contains("z_min")) heights.z_min = doc["z_min"].get<double>();
    if (doc.contains("z_max")) heights.z_max = doc["z_max"].get<double>();
    if (doc.contains("n_ref")) heights.n_ref = doc["n_ref"].get<int>();
  } catch (const nlohmann::json::type_error& e) {
    throw Error(ErrorCode::kParse, std::string("config: ") + e.what());
  }
  bins.validate();
  heights.validate();
}

Rig with_stride(const Rig& rig, int stride) {
  std::vector<Camera> cams;
  for (const auto& c : rig.cameras()) {
    cams.emplace_back(c.name(), c.width(), c.height(), c.intrinsics(), c.rotation(),
                      c.translation(), stride);
  }
  return Rig(std::move(cams));
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "not an integer list: '" + text + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::kInvalidArgument, "empty integer list");
  return out;
}

DepthBins parse_bins(const std::string& text) {
  std::stringstream ss(text);
  std::string a, b, c;
  if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) {
    throw Error(ErrorCode::kInvalidArgument, "bins must be 'd0,delta,count'");
  }
  DepthBins bins;
  try {
    bins.d0 = std::stod(a);
    bins.delta = std::stod(b);
    bins.count = std::stoi(c);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, "bins must be 'd0,delta,count'");
  }
  bins.validate();
  return bins;
}

std::string sparsity_csv(const Rig& rig, const DepthBins& bins, double half_extent,
                         const std::vector<int>& bev_sizes, int threads) {
  if (bev_sizes.empty()) throw Error(ErrorCode::kInvalidArgument, "sparsity: no BEV sizes");
  const LiftedPoints points = geometric_lift(rig, bins);
  std::string out = "bev_size,total_cells,occupied_cells,occupancy_rate,blank_rate\n";
  for (int size : bev_sizes) {
    const BevGrid grid = splat_pooled(points, BevSpec::square(half_extent, size, 1), threads);
    const SparsityReport r = occupancy_stats(grid);
    out += csv_row({std::to_string(size), std::to_string(r.total_cells),
                    std::to_string(r.occupied_cells), fixed(r.occupancy_rate),
                    fixed(r.blank_rate())});
  }
  return out;
}

ConsistencyMaps consistency_maps(const Scene& scene, const Settings& settings) {
  const Rig rig = settings.stride_override ? with_stride(scene.rig, settings.stride) : scene.rig;
  Scene view{rig, scene.objects, scene.ground_z, scene.seed};
  std::vector<DepthDistMap> depths;
  for (const auto& cam : rig.cameras()) {
    depths.push_back(oracle_depth_map(render_depth(view, cam), settings.bins, settings.map_sigma));
  }
  const BevSpec spec = BevSpec::square(settings.half_extent, settings.bev_size, 1);
  const int n_ref = settings.heights.n_ref;

  ConsistencyMaps maps{Array2D<double>(spec.grid_h, spec.grid_w), {}};
  for (int j = 0; j < n_ref; ++j) maps.per_height.emplace_back(spec.grid_h, spec.grid_w);

#pragma omp parallel for schedule(dynamic, 4)
  for (int iy = 0; iy < spec.grid_h; ++iy) {
    for (int ix = 0; ix < spec.grid_w; ++ix) {
      const auto refs = reference_points(ix, iy, spec, settings.heights);
      const auto hits = project_refs(refs, rig, depths);
      std::vector<double> best(n_ref, 0.0);
      for (const auto& h : hits) best[h.ref_index] = std::max(best[h.ref_index], h.consistency);
      double total = 0.0;
      for (int j = 0; j < n_ref; ++j) {
        maps.per_height[j](iy, ix) = best[j];
        total += best[j];
      }
      maps.combined(iy, ix) = total / n_ref;
    }
  }
  return maps;
}

namespace {

// PGM rows run top to bottom; put +y (left of the ego vehicle) at the top.
Array2D<double> flip_rows(const Array2D<double>& a) {
  Array2D<double> out(a.rows(), a.cols());
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) out(r, c) = a(a.rows() - 1 - r, c);
  }
  return out;
}

}  // namespace

void cmd_consistency_map(const Scene& scene, const Settings& settings, const fs::path& out_dir,
                         bool per_height) {
  const ConsistencyMaps maps = consistency_maps(scene, settings);
  fs::create_directories(out_dir);
  io::save_pgm(out_dir / "consistency.pgm", flip_rows(maps.combined));
  if (per_height) {
    for (std::size_t j = 0; j < maps.per_height.size(); ++j) {
      io::save_pgm(out_dir / ("consistency_h" + std::to_string(j) + ".pgm"),
                   flip_rows(maps.per_height[j]));
    }
  }
}

namespace {

template <typename F>
std::vector<double> time_ms(int repetitions, F&& fn) {
  std::vector<double> ms;
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  return ms;
}

double percentile(const std::vector<double>& sorted, double q) {
  const auto n = sorted.size();
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  return sorted[std::clamp<std::size_t>(rank, 1, n) - 1];
}

double median(const std::vector<double>& sorted) {
  const auto n = sorted.size();
  return n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

}  // namespace

std::vector<BenchRow> run_bench(const Rig& rig, const DepthBins& bins, double half_extent,
                                const std::vector<int>& bev_sizes, int repetitions,
                                int threads) {
  if (repetitions < 1) throw Error(ErrorCode::kInvalidArgument, "bench: repetitions must be >= 1");
  if (bev_sizes.empty()) throw Error(ErrorCode::kInvalidArgument, "bench: no BEV sizes");
  const LiftedPoints points = geometric_lift(rig, bins);

  // Refinement inputs: unit features, uniform depth, and a fixed synthetic
  // scene's footprints as the query set.
  std::vector<FeatureMap> feats;
  std::vector<DepthDistMap> depths;
  const auto uniform = DepthDistribution::uniform(bins.count);
  for (const auto& cam : rig.cameras()) {
    feats.emplace_back(cam.feature_height(), cam.feature_width(), 1, 1.0);
    DepthDistMap d(bins, cam.feature_height(), cam.feature_width());
    for (int r = 0; r < d.height(); ++r) {
      for (int c = 0; c < d.width(); ++c) d.set(r, c, uniform);
    }
    depths.push_back(std::move(d));
  }
  SceneGenOptions gen;
  gen.boxes = 12;
  gen.channels = 1;
  const Scene scene = generate_scene(rig, gen, 0);
  const DeformableParams params = DeformableParams::identity(1, 1, 4);

  std::vector<BenchRow> rows;
  for (int size : bev_sizes) {
    const BevSpec spec = BevSpec::square(half_extent, size, 1);
    const BevGrid reference = splat_naive(points, spec);
    const BevGrid pooled = splat_pooled(points, spec, threads);
    if (!pooled.identical(reference)) {
      throw Error(ErrorCode::kValidation,
                  "bench: pooled kernel disagrees with naive kernel at BEV " + std::to_string(size));
    }
    auto naive_ms = time_ms(repetitions, [&] { (void)splat_naive(points, spec); });
    auto pooled_ms = time_ms(repetitions, [&] { (void)splat_pooled(points, spec, threads); });

    const auto queries =
        select_queries(pooled, oracle_mask(rasterize_gt_mask(scene.boxes(), spec)));
    RefineOptions ropts;
    ropts.threads = threads;
    auto refine_ms = time_ms(repetitions, [&] {
      (void)refine(pooled, queries, rig, feats, depths, params, ropts);
    });

    rows.push_back({"splat_naive", size, points.size(), median(naive_ms), percentile(naive_ms, 0.95)});
    rows.push_back({"splat_pooled", size, points.size(), median(pooled_ms), percentile(pooled_ms, 0.95)});
    rows.push_back({"refine", size, queries.size(), median(refine_ms), percentile(refine_ms, 0.95)});
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "kernel,bev_size,points,median_ms,p95_ms\n";
  for (const auto& r : rows) {
    out += csv_row({r.kernel, std::to_string(r.bev_size), std::to_string(r.points),
                    fixed(r.median_ms, 3), fixed(r.p95_ms, 3)});
  }
  return out;
}

PipelineArtifacts cmd_pipeline(const Scene& scene, const Settings& settings, int channels,
                               const std::optional<MaskHeadWeights>& mask_weights,
                               const std::optional<DeformableParams>& params,
                               const fs::path& out_dir) {
  const Rig rig = settings.stride_override ? with_stride(scene.rig, settings.stride) : scene.rig;
  const Scene view{rig, scene.objects, scene.ground_z, scene.seed};

  PipelineConfig config;
  config.bins = settings.bins;
  config.bev = BevSpec::square(settings.half_extent, settings.bev_size, channels);
  config.depth_sigma = settings.depth_sigma;
  config.threshold = settings.threshold;
  config.mask_weights = mask_weights;
  config.params = params ? params
                         : std::optional(DeformableParams::identity(
                               channels, channels % settings.heads == 0 ? settings.heads : 1,
                               settings.points_per_head));
  config.refine.heights = settings.heights;
  config.threads = settings.threads;

  PipelineArtifacts art{run_pipeline(view, config), {}};
  const PipelineResult& r = art.result;

  const auto count_blank_fg = [&](const BevGrid& g) {
    std::size_t fg = 0, blank = 0;
    for (int iy = 0; iy < g.spec.grid_h; ++iy) {
      for (int ix = 0; ix < g.spec.grid_w; ++ix) {
        if (!r.gt_mask(iy, ix)) continue;
        ++fg;
        blank += !g.is_occupied(ix, iy);
      }
    }
    return std::pair{fg, blank};
  };

  std::string csv = "stage,total_cells,occupied_cells,blank_cells,occupancy_rate,blank_rate\n";
  const auto add = [&](const std::string& stage, std::size_t total, std::size_t blank) {
    const std::size_t occ = total - blank;
    const double rate = total ? static_cast<double>(occ) / total : 0.0;
    csv += csv_row({stage, std::to_string(total), std::to_string(occ), std::to_string(blank),
                    fixed(rate), fixed(total ? 1.0 - rate : 0.0)});
  };
  add("forward", r.sparsity_before.total_cells,
      r.sparsity_before.total_cells - r.sparsity_before.occupied_cells);
  add("refined", r.sparsity_after.total_cells,
      r.sparsity_after.total_cells - r.sparsity_after.occupied_cells);
  const auto [fg0, blank0] = count_blank_fg(r.bev);
  const auto [fg1, blank1] = count_blank_fg(r.refined);
  add("foreground_forward", fg0, blank0);
  add("foreground_refined", fg1, blank1);
  art.sparsity_csv = csv;

  fs::create_directories(out_dir);
  io::save_tensor(out_dir / "B.fbbt", io::to_tensor(r.bev.features));
  io::save_tensor(out_dir / "M.fbbt", io::to_tensor(r.mask.probabilities));
  io::save_tensor(out_dir / "B_refined.fbbt", io::to_tensor(r.refined.features));
  const auto occupancy_image = [](const BevGrid& g) {
    Array2D<double> img(g.spec.grid_h, g.spec.grid_w);
    for (int iy = 0; iy < g.spec.grid_h; ++iy) {
      for (int ix = 0; ix < g.spec.grid_w; ++ix) img(iy, ix) = g.is_occupied(ix, iy) ? 1.0 : 0.0;
    }
    return flip_rows(img);
  };
  io::save_pgm(out_dir / "occupancy_before.pgm", occupancy_image(r.bev));
  io::save_pgm(out_dir / "occupancy_after.pgm", occupancy_image(r.refined));
  io::write_text(out_dir / "sparsity.csv", csv);
  return art;
}

}  // namespace bevkit::cli
