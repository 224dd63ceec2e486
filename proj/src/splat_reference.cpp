#include "bevkit/fvtm.hpp"

namespace bevkit {

BevGrid splat_naive(const LiftedPoints& points, const BevSpec& spec) {
  spec.validate();
  if (points.channels() != spec.channels) {
    throw Error(ErrorCode::kShapeMismatch, "splat: point channels != BEV channels");
  }
  BevGrid grid(spec);
  auto features = grid.features.data();
  auto occupied = grid.occupied.data();
  const auto channels = static_cast<std::size_t>(spec.channels);

  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points.position(i);
    const std::int64_t cell = spec.cell_of(p.x(), p.y());
    if (cell < 0) continue;
    const double w = points.weight(i);
    const auto f = points.feature(i);
    double* dst = features.data() + static_cast<std::size_t>(cell) * channels;
    for (std::size_t c = 0; c < channels; ++c) {
      dst[c] += w * f[c];
    }
    if (w > 0.0) occupied[cell] = 1;
  }
  return grid;
}

}  // namespace bevkit
