#include <omp.h>

#include <algorithm>
#include <vector>

#include "bevkit/fvtm.hpp"

namespace bevkit {

// Three passes: bin every point, stable counting sort by cell (per-thread
// histograms over contiguous input chunks keep input order within a cell),
// then reduce each cell's interval independently. Each interval is summed
// in input order starting from zero, which is exactly what splat_naive does.
BevGrid splat_pooled(const LiftedPoints& points, const BevSpec& spec, int threads) {
  spec.validate();
  if (points.channels() != spec.channels) {
    throw Error(ErrorCode::kShapeMismatch, "splat: point channels != BEV channels");
  }
  BevGrid grid(spec);
  const std::size_t n = points.size();
  if (n == 0) return grid;

  const std::size_t cells = spec.cell_count();
  const auto channels = static_cast<std::size_t>(spec.channels);
  const int team = threads > 0 ? threads : omp_get_max_threads();

  std::vector<std::int64_t> keys(n);
  std::vector<std::uint32_t> sorted;
  std::vector<std::size_t> cell_begin(cells + 1, 0);
  std::vector<std::vector<std::size_t>> local_counts;

#pragma omp parallel num_threads(team)
  {
    const int nt = omp_get_num_threads();
    const int tid = omp_get_thread_num();
#pragma omp single
    local_counts.assign(nt, std::vector<std::size_t>(cells, 0));

    const std::size_t lo = n * tid / nt;
    const std::size_t hi = n * (tid + 1) / nt;
    auto& counts = local_counts[tid];
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& p = points.position(i);
      keys[i] = spec.cell_of(p.x(), p.y());
      if (keys[i] >= 0) ++counts[keys[i]];
    }
#pragma omp barrier

#pragma omp single
    {
      // Exclusive scan, cell-major then thread-minor, turning each thread's
      // count into its write cursor for that cell.
      std::size_t running = 0;
      for (std::size_t c = 0; c < cells; ++c) {
        cell_begin[c] = running;
        for (int t = 0; t < nt; ++t) {
          const std::size_t cnt = local_counts[t][c];
          local_counts[t][c] = running;
          running += cnt;
        }
      }
      cell_begin[cells] = running;
      sorted.resize(running);
    }

    for (std::size_t i = lo; i < hi; ++i) {
      if (keys[i] >= 0) sorted[counts[keys[i]]++] = static_cast<std::uint32_t>(i);
    }
#pragma omp barrier

    auto features = grid.features.data();
    auto occupied = grid.occupied.data();
    std::vector<double> acc(channels);
#pragma omp for schedule(dynamic, 256)
    for (std::int64_t c = 0; c < static_cast<std::int64_t>(cells); ++c) {
      const std::size_t begin = cell_begin[c];
      const std::size_t end = cell_begin[c + 1];
      if (begin == end) continue;
      std::fill(acc.begin(), acc.end(), 0.0);
      bool any_positive = false;
      for (std::size_t s = begin; s < end; ++s) {
        const std::size_t i = sorted[s];
        const double w = points.weight(i);
        const auto f = points.feature(i);
        for (std::size_t k = 0; k < channels; ++k) acc[k] += w * f[k];
        any_positive = any_positive || w > 0.0;
      }
      std::copy(acc.begin(), acc.end(), features.begin() + c * channels);
      occupied[c] = any_positive ? 1 : 0;
    }
  }
  return grid;
}

}  // namespace bevkit
