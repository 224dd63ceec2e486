#pragma once

#include <vector>

#include <Eigen/Core>

#include "bevkit/array.hpp"
#include "bevkit/fvtm.hpp"

namespace bevkit {

// 3x3xC cross-correlation kernel, stored [ky][kx][c], plus a scalar bias.
struct MaskHeadWeights {
  int channels = 1;
  std::vector<double> kernel;
  double bias = 0.0;

  explicit MaskHeadWeights(int c = 1) : channels(c), kernel(9 * static_cast<std::size_t>(c), 0.0) {}

  double& at(int ky, int kx, int c) { return kernel[(ky * 3 + kx) * channels + c]; }
  double at(int ky, int kx, int c) const { return kernel[(ky * 3 + kx) * channels + c]; }
  void validate() const;
};

// Rows follow BEV y, columns BEV x.
struct ForegroundMask {
  Array2D<double> logits;
  Array2D<double> probabilities;

  static ForegroundMask from_logits(Array2D<double> logits);
};

struct Box3D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();  // length (along yaw), width, height
  double yaw = 0.0;

  void validate() const;
  // Footprint corners, counter-clockwise.
  std::vector<Eigen::Vector2d> footprint() const;
};

struct BevQuery {
  int x = 0;
  int y = 0;
  std::vector<double> feature;
};

inline constexpr double kDefaultForegroundThreshold = 0.4;

double sigmoid(double x);

// Same-size 3x3 convolution with zero padding, bias, then sigmoid.
ForegroundMask mask_head(const BevGrid& bev, const MaskHeadWeights& weights);

// 1 where the cell center lies inside any box footprint (boundary inclusive).
Array2D<std::uint8_t> rasterize_gt_mask(const std::vector<Box3D>& boxes, const BevSpec& spec);

// Mask with logits +magnitude on foreground, -magnitude elsewhere.
ForegroundMask oracle_mask(const Array2D<std::uint8_t>& gt, double magnitude = 8.0);

inline constexpr double kDiceSmooth = 1.0;
inline constexpr double kProbabilityClamp = 1e-7;

double dice_loss(const Array2D<double>& pred, const Array2D<std::uint8_t>& gt);
double bce_loss(const Array2D<double>& pred, const Array2D<std::uint8_t>& gt);

struct FrpnLossWeights {
  double dice = 1.0;
  double bce = 1.0;
};

double frpn_loss(const Array2D<double>& pred, const Array2D<std::uint8_t>& gt,
                 const FrpnLossWeights& weights = {});

// Cells with probability > threshold in row-major order, features taken from
// the grid (zero for blank cells).
std::vector<BevQuery> select_queries(const BevGrid& bev, const ForegroundMask& mask,
                                     double threshold = kDefaultForegroundThreshold);

}  // namespace bevkit
