#include "orl/latent_codec.hpp"

#include <string>

namespace orl {

Latent Latent::from_flat(const Eigen::Ref<const Eigen::VectorXd>& flat, int side, int t) {
  if (side <= 0 || flat.size() != static_cast<Eigen::Index>(side) * side) {
    throw InvalidArgument("latent of side " + std::to_string(side) + " needs " + std::to_string(side * side) +
                          " values, got " + std::to_string(flat.size()));
  }
  Latent z;
  z.values = Eigen::Map<const Image>(flat.data(), side, side);
  z.t = t;
  return z;
}

Latent encode(const Image& img, int latent_side) {
  if (img.rows() != img.cols()) throw InvalidArgument("encode: image must be square");
  if (latent_side <= 0 || img.rows() % latent_side != 0) {
    throw InvalidArgument("encode: latent side " + std::to_string(latent_side) + " does not divide image side " +
                          std::to_string(img.rows()));
  }
  Latent z;
  z.values = block_mean(img, img.rows() / latent_side).array() * 2.0 - 1.0;
  z.t = 0;
  return z;
}

Image decode(const Latent& z, int image_side) {
  if (z.side() <= 0 || z.values.rows() != z.values.cols()) throw InvalidArgument("decode: latent must be square");
  if (image_side <= 0 || image_side % z.side() != 0) {
    throw InvalidArgument("decode: image side " + std::to_string(image_side) + " is not a multiple of latent side " +
                          std::to_string(z.side()));
  }
  const Image unit = ((z.values.array() + 1.0) / 2.0).cwiseMax(0.0).cwiseMin(1.0);
  return bilinear_resize(unit, image_side, image_side);
}

}  // namespace orl
