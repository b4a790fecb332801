#pragma once

#include "orl/image.hpp"

#include <Eigen/Core>

namespace orl {

/// Square latent grid plus the diffusion timestep it belongs to.
/// Values live in [-1, 1] for encoded images; noisy latents are unbounded.
struct Latent {
  Image values;
  int t = 0;

  int side() const { return static_cast<int>(values.rows()); }
  Eigen::Index size() const { return values.size(); }

  Eigen::Map<const Eigen::VectorXd> flat() const { return {values.data(), values.size()}; }
  Eigen::Map<Eigen::VectorXd> flat() { return {values.data(), values.size()}; }

  static Latent from_flat(const Eigen::Ref<const Eigen::VectorXd>& flat, int side, int t);
};

/// Fixed encoder: block-mean down to latent_side, then [0,1] -> [-1,1].
Latent encode(const Image& img, int latent_side);

/// Fixed decoder: [-1,1] -> [0,1], clamp, then bilinear up to image_side.
Image decode(const Latent& z, int image_side);

}  // namespace orl
