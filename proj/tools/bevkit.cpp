// Command-line front end: sparsity, consistency-map, bench, pipeline.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bevkit/commands.hpp"
#include "bevkit/error.hpp"
#include "bevkit/io.hpp"

namespace {

using namespace bevkit;

struct CommonFlags {
  std::string config;
  std::string bins;
  std::optional<int> stride;
  std::optional<double> half_extent;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file (flags override it)");
  cmd->add_option("--bins", f.bins, "depth bins as d0,delta,count");
  cmd->add_option("--stride", f.stride, "feature stride override for every camera");
  cmd->add_option("--half-extent", f.half_extent, "BEV half extent in meters");
  cmd->add_option("--threads", f.threads, "OpenMP worker count");
}

cli::Settings resolve(const CommonFlags& f) {
  cli::Settings s;
  if (!f.config.empty()) s.apply_config_json(io::read_text(f.config));
  if (!f.bins.empty()) s.bins = cli::parse_bins(f.bins);
  if (f.stride) {
    if (*f.stride < 1) throw Error(ErrorCode::kInvalidArgument, "--stride must be >= 1");
    s.stride = *f.stride;
    s.stride_override = true;
  }
  if (f.half_extent) s.half_extent = *f.half_extent;
  if (f.threads) s.threads = *f.threads;
  return s;
}

Rig load_rig_for(const std::string& path, const cli::Settings& s) {
  Rig rig = io::load_rig(path);
  return s.stride_override ? cli::with_stride(rig, s.stride) : rig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Camera-to-BEV view transformation toolkit"};
  app.require_subcommand(1);

  CommonFlags sparsity_flags, map_flags, bench_flags, pipe_flags;
  std::string rig_path, scene_path, out_dir, bev_list = "128,256,400";
  std::optional<int> bev_single;
  std::optional<double> tf;
  bool per_height = false;
  int reps = 5;
  std::string mask_dir, params_dir;

  auto* sparsity = app.add_subcommand("sparsity", "BEV occupancy of the geometric forward projection");
  sparsity->add_option("--rig", rig_path, "rig JSON")->required();
  sparsity->add_option("--bev", bev_list, "comma-separated square BEV sizes");
  add_common(sparsity, sparsity_flags);

  auto* cmap = app.add_subcommand("consistency-map", "Depth-consistency maps on the BEV plane");
  cmap->add_option("--scene", scene_path, "scene JSON")->required();
  cmap->add_option("--out", out_dir, "output directory")->required();
  cmap->add_flag("--per-height", per_height, "also write one map per reference height");
  cmap->add_option("--bev", bev_single, "square BEV size");
  add_common(cmap, map_flags);

  auto* bench = app.add_subcommand("bench", "Time the pooling kernels and refinement");
  bench->add_option("--rig", rig_path, "rig JSON")->required();
  bench->add_option("--bev", bev_list, "comma-separated square BEV sizes");
  bench->add_option("--reps", reps, "timed repetitions per kernel");
  add_common(bench, bench_flags);

  auto* pipe = app.add_subcommand("pipeline", "Run forward projection, FRPN and refinement");
  pipe->add_option("--scene", scene_path, "scene JSON")->required();
  pipe->add_option("--out", out_dir, "output directory")->required();
  pipe->add_option("--tf", tf, "foreground threshold");
  pipe->add_option("--bev", bev_single, "square BEV size");
  pipe->add_option("--mask-weights", mask_dir, "directory with mask_kernel/mask_bias tensors");
  pipe->add_option("--attn-params", params_dir, "directory with deformable sampler tensors");
  add_common(pipe, pipe_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (sparsity->parsed()) {
      const auto s = resolve(sparsity_flags);
      const auto sizes = cli::parse_int_list(bev_list);
      std::cout << cli::sparsity_csv(load_rig_for(rig_path, s), s.bins, s.half_extent, sizes,
                                     s.threads);
    } else if (cmap->parsed()) {
      auto s = resolve(map_flags);
      if (bev_single) s.bev_size = *bev_single;
      const Scene scene = io::load_scene(scene_path);
      cli::cmd_consistency_map(scene, s, out_dir, per_height);
      std::cout << "wrote consistency maps to " << out_dir << "\n";
    } else if (bench->parsed()) {
      const auto s = resolve(bench_flags);
      const auto sizes = cli::parse_int_list(bev_list);
      const auto rows = cli::run_bench(load_rig_for(rig_path, s), s.bins, s.half_extent, sizes,
                                       reps, s.threads);
      std::cout << cli::bench_csv(rows);
    } else if (pipe->parsed()) {
      auto s = resolve(pipe_flags);
      if (tf) s.threshold = *tf;
      if (bev_single) s.bev_size = *bev_single;
      int channels = 0;
      const Scene scene = io::load_scene(scene_path, &channels);
      std::optional<MaskHeadWeights> mask;
      std::optional<DeformableParams> params;
      if (!mask_dir.empty()) mask = io::load_mask_weights(mask_dir);
      if (!params_dir.empty()) params = io::load_deformable_params(params_dir);
      const auto art = cli::cmd_pipeline(scene, s, channels, mask, params, out_dir);
      std::cout << art.sparsity_csv << "queries," << art.result.queries.size() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
