#pragma once

#include <Eigen/Core>

#include <vector>

namespace orl {

/// Multi-channel feature maps: one row-major matrix per channel.
using FeatureMaps = std::vector<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// Kernel bank for a valid-padding, stride-1 convolution.
/// weights[out][in] is a square kernel; bias has one entry per output channel.
struct ConvLayer {
  std::vector<std::vector<Eigen::MatrixXd>> weights;
  Eigen::VectorXd bias;

  int in_channels() const { return weights.empty() ? 0 : static_cast<int>(weights.front().size()); }
  int out_channels() const { return static_cast<int>(weights.size()); }
  int kernel_size() const { return weights.empty() ? 0 : static_cast<int>(weights.front().front().rows()); }
};

// Direct-loop cross-correlation; output side shrinks by kernel_size - 1.
FeatureMaps conv2d_valid(const FeatureMaps& input, const ConvLayer& layer);

void relu_inplace(FeatureMaps& maps);

}  // namespace orl
