#include "bevkit/frpn.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "bevkit/error.hpp"

namespace bevkit {

void MaskHeadWeights::validate() const {
  if (channels < 1 || kernel.size() != 9 * static_cast<std::size_t>(channels)) {
    throw Error(ErrorCode::kShapeMismatch, "mask head: kernel must be 3x3xC");
  }
  for (double k : kernel) {
    if (!std::isfinite(k)) throw Error(ErrorCode::kValidation, "mask head: non-finite kernel");
  }
  if (!std::isfinite(bias)) throw Error(ErrorCode::kValidation, "mask head: non-finite bias");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

ForegroundMask ForegroundMask::from_logits(Array2D<double> logits) {
  ForegroundMask m{std::move(logits), {}};
  m.probabilities = Array2D<double>(m.logits.rows(), m.logits.cols());
  const auto src = m.logits.data();
  auto dst = m.probabilities.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = sigmoid(src[i]);
  return m;
}

void Box3D::validate() const {
  if (!(size.x() > 0.0 && size.y() > 0.0 && size.z() > 0.0)) {
    throw Error(ErrorCode::kValidation, "box: sizes must be positive");
  }
}

std::vector<Eigen::Vector2d> Box3D::footprint() const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double hl = 0.5 * size.x(), hw = 0.5 * size.y();
  const Eigen::Vector2d center2 = center.head<2>();
  std::vector<Eigen::Vector2d> corners;
  const std::array<std::pair<double, double>, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  for (const auto& [a, b] : local) {
    corners.push_back(center2 + Eigen::Vector2d(c * a - s * b, s * a + c * b));
  }
  return corners;
}

ForegroundMask mask_head(const BevGrid& bev, const MaskHeadWeights& weights) {
  weights.validate();
  if (weights.channels != bev.spec.channels) {
    throw Error(ErrorCode::kShapeMismatch, "mask head: kernel channels != BEV channels");
  }
  const int h = bev.spec.grid_h, w = bev.spec.grid_w, channels = bev.spec.channels;
  Array2D<double> logits(h, w);

#pragma omp parallel for schedule(static)
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      double acc = weights.bias;
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = iy + ky - 1;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = ix + kx - 1;
          if (sx < 0 || sx >= w) continue;
          const auto f = bev.at(sx, sy);
          for (int c = 0; c < channels; ++c) acc += weights.at(ky, kx, c) * f[c];
        }
      }
      logits(iy, ix) = acc;
    }
  }
  return ForegroundMask::from_logits(std::move(logits));
}

Array2D<std::uint8_t> rasterize_gt_mask(const std::vector<Box3D>& boxes, const BevSpec& spec) {
  spec.validate();
  Array2D<std::uint8_t> mask(spec.grid_h, spec.grid_w, 0);
  const double cx = spec.cell_x(), cy = spec.cell_y();
  for (const auto& box : boxes) {
    box.validate();
    const auto corners = box.footprint();
    double lo_x = corners[0].x(), hi_x = lo_x, lo_y = corners[0].y(), hi_y = lo_y;
    for (const auto& p : corners) {
      lo_x = std::min(lo_x, p.x());
      hi_x = std::max(hi_x, p.x());
      lo_y = std::min(lo_y, p.y());
      hi_y = std::max(hi_y, p.y());
    }
    const auto to_index = [](double v, double origin, double cell, int n) {
      return std::clamp(static_cast<int>(std::floor((v - origin) / cell)), 0, n - 1);
    };
    const int ix0 = to_index(lo_x, spec.x_min, cx, spec.grid_w);
    const int ix1 = to_index(hi_x, spec.x_min, cx, spec.grid_w);
    const int iy0 = to_index(lo_y, spec.y_min, cy, spec.grid_h);
    const int iy1 = to_index(hi_y, spec.y_min, cy, spec.grid_h);

    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    const double hl = 0.5 * box.size.x(), hw = 0.5 * box.size.y();
    for (int iy = iy0; iy <= iy1; ++iy) {
      for (int ix = ix0; ix <= ix1; ++ix) {
        const Eigen::Vector2d d = spec.cell_center(ix, iy) - box.center.head<2>();
        const double along = c * d.x() + s * d.y();
        const double across = -s * d.x() + c * d.y();
        if (std::abs(along) <= hl && std::abs(across) <= hw) mask(iy, ix) = 1;
      }
    }
  }
  return mask;
}

ForegroundMask oracle_mask(const Array2D<std::uint8_t>& gt, double magnitude) {
  Array2D<double> logits(gt.rows(), gt.cols());
  const auto src = gt.data();
  auto dst = logits.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? magnitude : -magnitude;
  return ForegroundMask::from_logits(std::move(logits));
}

namespace {

void require_same_shape(const Array2D<double>& pred, const Array2D<std::uint8_t>& gt,
                        const char* what) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw Error(ErrorCode::kShapeMismatch, std::string(what) + ": prediction/target shapes differ");
  }
}

}  // namespace

double dice_loss(const Array2D<double>& pred, const Array2D<std::uint8_t>& gt) {
  require_same_shape(pred, gt, "dice_loss");
  double inter = 0.0, sum_p = 0.0, sum_g = 0.0;
  const auto p = pred.data();
  const auto g = gt.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    inter += p[i] * g[i];
    sum_p += p[i];
    sum_g += g[i];
  }
  return 1.0 - (2.0 * inter + kDiceSmooth) / (sum_p + sum_g + kDiceSmooth);
}

double bce_loss(const Array2D<double>& pred, const Array2D<std::uint8_t>& gt) {
  require_same_shape(pred, gt, "bce_loss");
  const auto p = pred.data();
  const auto g = gt.data();
  if (p.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total -= g[i] ? std::log(q) : std::log(1.0 - q);
  }
  return total / static_cast<double>(p.size());
}

double frpn_loss(const Array2D<double>& pred, const Array2D<std::uint8_t>& gt,
                 const FrpnLossWeights& weights) {
  return weights.dice * dice_loss(pred, gt) + weights.bce * bce_loss(pred, gt);
}

std::vector<BevQuery> select_queries(const BevGrid& bev, const ForegroundMask& mask,
                                     double threshold) {
  if (mask.probabilities.rows() != bev.spec.grid_h ||
      mask.probabilities.cols() != bev.spec.grid_w) {
    throw Error(ErrorCode::kShapeMismatch, "select_queries: mask and BEV grid shapes differ");
  }
  std::vector<BevQuery> out;
  for (int iy = 0; iy < bev.spec.grid_h; ++iy) {
    for (int ix = 0; ix < bev.spec.grid_w; ++ix) {
      if (mask.probabilities(iy, ix) > threshold) {
        const auto f = bev.at(ix, iy);
        out.push_back({ix, iy, std::vector<double>(f.begin(), f.end())});
      }
    }
  }
  return out;
}

}  // namespace bevkit
