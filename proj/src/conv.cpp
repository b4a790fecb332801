#include "orl/conv.hpp"

#include "orl/errors.hpp"

namespace orl {

FeatureMaps conv2d_valid(const FeatureMaps& input, const ConvLayer& layer) {
  if (static_cast<int>(input.size()) != layer.in_channels()) {
    throw InvalidArgument("conv2d_valid: channel count mismatch");
  }
  const int k = layer.kernel_size();
  const Eigen::Index rows = input.front().rows() - k + 1;
  const Eigen::Index cols = input.front().cols() - k + 1;
  if (rows <= 0 || cols <= 0) throw InvalidArgument("conv2d_valid: input smaller than kernel");

  FeatureMaps out(layer.out_channels());
  for (int o = 0; o < layer.out_channels(); ++o) {
    auto& map = out[o];
    map.setConstant(rows, cols, layer.bias[o]);
    for (int c = 0; c < layer.in_channels(); ++c) {
      const auto& kernel = layer.weights[o][c];
      const auto& src = input[c];
      for (Eigen::Index y = 0; y < rows; ++y) {
        for (Eigen::Index x = 0; x < cols; ++x) {
          double acc = 0.0;
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) acc += kernel(ky, kx) * src(y + ky, x + kx);
          }
          map(y, x) += acc;
        }
      }
    }
  }
  return out;
}

void relu_inplace(FeatureMaps& maps) {
  for (auto& m : maps) m = m.cwiseMax(0.0);
}

}  // namespace orl
