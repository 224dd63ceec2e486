#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bevkit/depth.hpp"
#include "bevkit/fvtm.hpp"
#include "bevkit/geometry.hpp"
#include "bevkit/pipeline.hpp"

namespace bevkit::cli {

namespace fs = std::filesystem;

// Resolved run settings. Built from defaults, then a JSON config file, then
// command-line flags.
struct Settings {
  DepthBins bins;
  double half_extent = 51.2;
  int bev_size = 128;
  int stride = 16;               // overrides rig strides when set on the command line
  bool stride_override = false;
  double threshold = kDefaultForegroundThreshold;
  double depth_sigma = 1.0;
  double map_sigma = 0.0;        // consistency-map oracle spread
  int heads = 8;
  int points_per_head = 4;
  int threads = 0;
  HeightSampling heights;

  // Keys: d0, delta, bins, half_extent, bev, stride, tf, sigma, map_sigma,
  // heads, points, threads, z_min, z_max, n_ref.
  void apply_config_json(const std::string& json_text);
};

Rig with_stride(const Rig& rig, int stride);

std::string sparsity_csv(const Rig& rig, const DepthBins& bins, double half_extent,
                         const std::vector<int>& bev_sizes, int threads = 0);

struct ConsistencyMaps {
  Array2D<double> combined;
  std::vector<Array2D<double>> per_height;
};

// Per cell: sum over heights of the max-over-cameras consistency, divided by
// the number of heights.
ConsistencyMaps consistency_maps(const Scene& scene, const Settings& settings);
void cmd_consistency_map(const Scene& scene, const Settings& settings, const fs::path& out_dir,
                         bool per_height);

struct BenchRow {
  std::string kernel;
  int bev_size = 0;
  std::size_t points = 0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
};

std::vector<BenchRow> run_bench(const Rig& rig, const DepthBins& bins, double half_extent,
                                const std::vector<int>& bev_sizes, int repetitions,
                                int threads = 0);
std::string bench_csv(const std::vector<BenchRow>& rows);

struct PipelineArtifacts {
  PipelineResult result;
  std::string sparsity_csv;
};

PipelineArtifacts cmd_pipeline(const Scene& scene, const Settings& settings, int channels,
                               const std::optional<MaskHeadWeights>& mask_weights,
                               const std::optional<DeformableParams>& params,
                               const fs::path& out_dir);

std::vector<int> parse_int_list(const std::string& text);
DepthBins parse_bins(const std::string& text);

}  // namespace bevkit::cli
