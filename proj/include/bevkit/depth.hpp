#pragma once

#include <span>
#include <vector>

namespace bevkit {

// Discrete depths d0 + k * delta for k in [0, count).
struct DepthBins {
  double d0 = 1.0;
  double delta = 0.5;
  int count = 118;

  // Throws Error(kInvalidArgument) unless delta > 0 and count >= 2.
  void validate() const;

  double center(int k) const { return d0 + k * delta; }
  double max_depth() const { return d0 + (count - 1) * delta; }
  bool in_range(double d) const { return d >= d0 && d <= max_depth(); }
};

// Categorical weights over the bins. A valid distribution sums to one; the
// all-zero vector is also admitted and stands for "no depth evidence".
struct DepthDistribution {
  std::vector<double> weights;
  bool out_of_range = false;

  static DepthDistribution uniform(int count);
  static DepthDistribution zeros(int count);

  double sum() const;
  bool is_valid(double tol = 1e-6) const;
};

// Per-feature-cell depth distributions for one camera, bin-fastest storage.
class DepthDistMap {
 public:
  DepthDistMap() = default;
  DepthDistMap(DepthBins bins, int height, int width);

  const DepthBins& bins() const { return bins_; }
  int height() const { return height_; }
  int width() const { return width_; }

  std::span<double> at(int row, int col);
  std::span<const double> at(int row, int col) const;
  void set(int row, int col, const DepthDistribution& dist);

 private:
  DepthBins bins_;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> weights_;
};

// Linear split of d between its two enclosing bins. Out-of-range depths give
// the all-zero vector with out_of_range set.
DepthDistribution two_hot(double d, const DepthBins& bins);

// Depth consistency: dot product of a predicted distribution with the
// two-hot encoding of d.
double consistency(std::span<const double> dist, double d, const DepthBins& bins);
inline double consistency(const DepthDistribution& dist, double d, const DepthBins& bins) {
  return consistency(dist.weights, d, bins);
}

// Per-bin bilinear interpolation at feature-map coordinates; cell (i, j) has
// its center at (i + 0.5, j + 0.5). Coordinates clamp to the edge cells.
DepthDistribution sample_distribution(const DepthDistMap& map, double u, double v);

// Synthetic depth-net output. sigma == 0 gives two_hot(d); otherwise a
// Gaussian over bin centers, renormalized. Non-finite d gives all zeros.
DepthDistribution oracle_distribution(double d, const DepthBins& bins, double sigma);

}  // namespace bevkit
