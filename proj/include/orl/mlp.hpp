#pragma once

#include "orl/tensor.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace orl {

enum class Activation { tanh, relu };
enum class OutputActivation { none, tanh };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

/// Intermediate values of a batched forward pass, consumed by backward().
struct MlpTape {
  std::vector<Eigen::MatrixXd> layer_inputs;  // post-activation feeding each layer
  std::vector<Eigen::MatrixXd> pre_activations;
  Eigen::MatrixXd output;
};

struct MlpGradients {
  NetParams params;       // same layout as the network's parameters
  Eigen::MatrixXd input;  // d(loss)/d(input), one column per sample
};

/// Fully connected feed-forward network. Parameters are stored as
/// `layer{i}.weight` with shape [out, in] and `layer{i}.bias` with shape [out].
/// Batched calls take one sample per column.
class Mlp {
 public:
  Mlp() = default;

  // Scaled-uniform init in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  Mlp(std::vector<int> layer_sizes, Activation activation, OutputActivation output_activation,
      std::uint64_t seed);

  // Wraps existing parameters; throws InvalidArgument if their layout is wrong.
  Mlp(std::vector<int> layer_sizes, Activation activation, OutputActivation output_activation,
      NetParams params);

  static Mlp zeros(std::vector<int> layer_sizes, Activation activation,
                   OutputActivation output_activation);

  // Recovers layer sizes from the weight shapes of `params`.
  static Mlp from_params(NetParams params, Activation activation, OutputActivation output_activation);

  int input_size() const { return layer_sizes_.front(); }
  int output_size() const { return layer_sizes_.back(); }
  int layer_count() const { return static_cast<int>(layer_sizes_.size()) - 1; }
  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  Activation activation() const { return activation_; }
  OutputActivation output_activation() const { return output_activation_; }

  NetParams& params() { return params_; }
  const NetParams& params() const { return params_; }

  Eigen::MatrixXd forward(const Eigen::Ref<const Eigen::MatrixXd>& inputs, MlpTape* tape = nullptr) const;

  // Gradients of sum(output .* output_grads), summed over the batch.
  MlpGradients backward(const MlpTape& tape, const Eigen::Ref<const Eigen::MatrixXd>& output_grads) const;

 private:
  static NetParams layout(const std::vector<int>& layer_sizes);
  void check_layout() const;

  std::vector<int> layer_sizes_;
  Activation activation_ = Activation::tanh;
  OutputActivation output_activation_ = OutputActivation::none;
  NetParams params_;
};

Eigen::VectorXd mlp_forward(const Mlp& net, const Eigen::Ref<const Eigen::VectorXd>& input);

MlpGradients mlp_backward(const Mlp& net, const Eigen::Ref<const Eigen::VectorXd>& input,
                          const Eigen::Ref<const Eigen::VectorXd>& output_grad);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_entry;  // "<param>[index]" or "input[index]"
  bool within_tolerance = true;
};

/// Compares mlp_backward against central differences of sum(forward(input))
/// for every parameter and input element. The error of one element is
/// |analytic - numeric| / max(|analytic|, |numeric|, scale_floor); the floor
/// keeps rounding noise on near-zero gradients from dominating.
GradCheckReport grad_check(const Mlp& net, const Eigen::Ref<const Eigen::VectorXd>& input, double tolerance,
                           double step = 1e-5, double scale_floor = 1e-3);

}  // namespace orl
