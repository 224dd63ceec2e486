#include "bevkit/depth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bevkit/error.hpp"

namespace bevkit {

void DepthBins::validate() const {
  if (!(delta > 0.0) || !std::isfinite(delta) || !std::isfinite(d0)) {
    throw Error(ErrorCode::kInvalidArgument, "depth bins: delta must be positive and finite");
  }
  if (count < 2) {
    throw Error(ErrorCode::kInvalidArgument, "depth bins: count must be >= 2");
  }
}

DepthDistribution DepthDistribution::uniform(int count) {
  return {std::vector<double>(count, 1.0 / count), false};
}

DepthDistribution DepthDistribution::zeros(int count) {
  return {std::vector<double>(count, 0.0), true};
}

double DepthDistribution::sum() const {
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

bool DepthDistribution::is_valid(double tol) const {
  for (double w : weights) {
    if (!(w >= 0.0)) return false;
  }
  const double s = sum();
  return std::abs(s - 1.0) <= tol || s == 0.0;
}

DepthDistMap::DepthDistMap(DepthBins bins, int height, int width)
    : bins_(bins), height_(height), width_(width),
      weights_(static_cast<std::size_t>(height) * width * bins.count, 0.0) {
  bins_.validate();
}

std::span<double> DepthDistMap::at(int row, int col) {
  const auto n = static_cast<std::size_t>(bins_.count);
  return {weights_.data() + (static_cast<std::size_t>(row) * width_ + col) * n, n};
}

std::span<const double> DepthDistMap::at(int row, int col) const {
  const auto n = static_cast<std::size_t>(bins_.count);
  return {weights_.data() + (static_cast<std::size_t>(row) * width_ + col) * n, n};
}

void DepthDistMap::set(int row, int col, const DepthDistribution& dist) {
  if (static_cast<int>(dist.weights.size()) != bins_.count) {
    throw Error(ErrorCode::kShapeMismatch, "depth map: distribution length != bin count");
  }
  std::copy(dist.weights.begin(), dist.weights.end(), at(row, col).begin());
}

namespace {

// Lower enclosing bin and the weight on it; nullopt-like (-1) when out of range.
struct TwoHotIndex {
  int lower = -1;
  double lower_weight = 0.0;
};

TwoHotIndex two_hot_index(double d, const DepthBins& bins) {
  if (!std::isfinite(d) || !bins.in_range(d)) return {};
  const double t = (d - bins.d0) / bins.delta;
  int i = static_cast<int>(std::floor(t));
  i = std::clamp(i, 0, bins.count - 2);
  double w = 1.0 - (d - bins.d0 - i * bins.delta) / bins.delta;
  w = std::clamp(w, 0.0, 1.0);
  return {i, w};
}

}  // namespace

DepthDistribution two_hot(double d, const DepthBins& bins) {
  bins.validate();
  const auto idx = two_hot_index(d, bins);
  if (idx.lower < 0) return DepthDistribution::zeros(bins.count);
  DepthDistribution out{std::vector<double>(bins.count, 0.0), false};
  out.weights[idx.lower] = idx.lower_weight;
  out.weights[idx.lower + 1] = 1.0 - idx.lower_weight;
  return out;
}

double consistency(std::span<const double> dist, double d, const DepthBins& bins) {
  if (static_cast<int>(dist.size()) != bins.count) {
    throw Error(ErrorCode::kShapeMismatch, "consistency: distribution length != bin count");
  }
  const auto idx = two_hot_index(d, bins);
  if (idx.lower < 0) return 0.0;
  return dist[idx.lower] * idx.lower_weight + dist[idx.lower + 1] * (1.0 - idx.lower_weight);
}

DepthDistribution sample_distribution(const DepthDistMap& map, double u, double v) {
  if (map.height() < 1 || map.width() < 1) {
    throw Error(ErrorCode::kShapeMismatch, "sample_distribution: empty map");
  }
  const auto axis = [](double coord, int size, int& i0, int& i1, double& t) {
    const double x = std::clamp(coord - 0.5, 0.0, static_cast<double>(size - 1));
    i0 = static_cast<int>(std::floor(x));
    i1 = std::min(i0 + 1, size - 1);
    t = x - i0;
  };
  int c0, c1, r0, r1;
  double tu, tv;
  axis(u, map.width(), c0, c1, tu);
  axis(v, map.height(), r0, r1, tv);

  const auto a = map.at(r0, c0);
  const auto b = map.at(r0, c1);
  const auto c = map.at(r1, c0);
  const auto d = map.at(r1, c1);
  const double wa = (1 - tu) * (1 - tv), wb = tu * (1 - tv), wc = (1 - tu) * tv, wd = tu * tv;

  DepthDistribution out{std::vector<double>(map.bins().count), false};
  for (int k = 0; k < map.bins().count; ++k) {
    out.weights[k] = wa * a[k] + wb * b[k] + wc * c[k] + wd * d[k];
  }
  return out;
}

DepthDistribution oracle_distribution(double d, const DepthBins& bins, double sigma) {
  if (!(sigma >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "oracle_distribution: sigma must be >= 0");
  }
  if (sigma == 0.0) return two_hot(d, bins);
  bins.validate();
  if (!std::isfinite(d)) return DepthDistribution::zeros(bins.count);

  DepthDistribution out{std::vector<double>(bins.count), false};
  // Log-sum-exp keeps far-from-range depths from underflowing to all zeros.
  std::vector<double> logits(bins.count);
  for (int k = 0; k < bins.count; ++k) {
    const double z = (bins.center(k) - d) / sigma;
    logits[k] = -0.5 * z * z;
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (int k = 0; k < bins.count; ++k) {
    out.weights[k] = std::exp(logits[k] - peak);
    total += out.weights[k];
  }
  for (double& w : out.weights) w /= total;
  return out;
}

}  // namespace bevkit
