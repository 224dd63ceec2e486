#pragma once

#include <cmath>
#include <random>

#include "bevkit/fvtm.hpp"

namespace gen {

enum class Layout { kUniform, kBoundary, kDuplicate, kMixed };

// Random lifted points over a spec. kBoundary snaps coordinates onto cell
// edges and the extent limits, kDuplicate packs everything into a few cells.
inline bevkit::LiftedPoints lifted_points(std::mt19937_64& rng, const bevkit::BevSpec& spec,
                                         std::size_t count, Layout layout) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> ix(0, spec.grid_w), iy(0, spec.grid_h);
  const int channels = spec.channels;
  bevkit::LiftedPoints pts(channels);
  pts.reserve(count);

  const std::size_t table = std::max<std::size_t>(1, std::min<std::size_t>(count, 4096));
  std::vector<double> f(channels);
  for (std::size_t i = 0; i < table; ++i) {
    for (auto& v : f) v = unit(rng) * 2.0 - 1.0;
    pts.add_feature(f);
  }
  std::uniform_int_distribution<std::uint32_t> fid(0, static_cast<std::uint32_t>(table - 1));

  const double wx = spec.x_max - spec.x_min, wy = spec.y_max - spec.y_min;
  std::vector<Eigen::Vector2d> hot;
  for (int i = 0; i < 3; ++i) {
    hot.emplace_back(spec.x_min + unit(rng) * wx, spec.y_min + unit(rng) * wy);
  }

  for (std::size_t i = 0; i < count; ++i) {
    Layout mode = layout;
    if (layout == Layout::kMixed) mode = static_cast<Layout>(rng() % 3);
    double x = 0, y = 0;
    switch (mode) {
      case Layout::kUniform:
        x = spec.x_min - 0.05 * wx + unit(rng) * 1.1 * wx;
        y = spec.y_min - 0.05 * wy + unit(rng) * 1.1 * wy;
        break;
      case Layout::kBoundary:
        x = spec.x_min + ix(rng) * spec.cell_x();
        y = spec.y_min + iy(rng) * spec.cell_y();
        if (rng() % 4 == 0) x = std::nextafter(x, -1e300);
        if (rng() % 4 == 0) y = std::nextafter(y, 1e300);
        break;
      default: {
        const auto& h = hot[rng() % hot.size()];
        x = h.x();
        y = h.y();
        break;
      }
    }
    const double w = rng() % 10 == 0 ? 0.0 : unit(rng);
    pts.add_point({x, y, unit(rng) * 4.0 - 2.0}, fid(rng), w);
  }
  return pts;
}

}  // namespace gen
