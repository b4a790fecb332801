#include "orl/mlp.hpp"

#include "orl/random.hpp"

#include <cmath>

namespace orl {

namespace {

std::string weight_name(int layer) { return "layer" + std::to_string(layer) + ".weight"; }
std::string bias_name(int layer) { return "layer" + std::to_string(layer) + ".bias"; }

void validate_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw InvalidArgument("an MLP needs at least an input and an output layer");
  for (int s : sizes) {
    if (s <= 0) throw InvalidArgument("MLP layer sizes must be positive");
  }
}

Eigen::VectorXd activate(const Mlp& net, int layer, Eigen::VectorXd z) {
  const bool last = layer + 1 == net.layer_count();
  if (last) return net.output_activation() == OutputActivation::tanh ? Eigen::VectorXd(z.array().tanh()) : z;
  return net.activation() == Activation::tanh ? Eigen::VectorXd(z.array().tanh())
                                              : Eigen::VectorXd(z.array().max(0.0));
}

// Change of the output sum when pre-activations are moved away from the
// taped pass. Only layers above the change are recomputed, and differences
// are propagated directly so rounding scales with the change rather than
// with the outputs.
struct SumProbe {
  const Mlp& net;
  const MlpTape& tape;
  int last;
  Eigen::RowVectorXd out_sums;  // used when the output layer is linear

  SumProbe(const Mlp& n, const MlpTape& t) : net(n), tape(t), last(n.layer_count() - 1) {
    out_sums = net.params()[2 * last].second.matrix().colwise().sum();
  }

  const Eigen::MatrixXd& activations(int layer) const {
    return layer == last ? tape.output : tape.layer_inputs[layer + 1];
  }

  bool identity(int layer) const { return layer == last && net.output_activation() == OutputActivation::none; }

  // Pre-activation `row` of `layer` moved by dz.
  double row_shift(int layer, Eigen::Index row, double dz) const {
    if (identity(layer)) return dz;
    const double z = tape.pre_activations[layer](row, 0) + dz;
    const double shift = activate(net, layer, Eigen::VectorXd::Constant(1, z))[0] - activations(layer)(row, 0);
    if (layer == last) return shift;
    return from(layer + 1, net.params()[2 * (layer + 1)].second.matrix().col(row) * shift);
  }

  // Pre-activations of `layer` moved by dz.
  double from(int layer, const Eigen::VectorXd& dz) const {
    Eigen::VectorXd delta_z = dz;
    for (int l = layer;; ++l) {
      if (identity(l)) return delta_z.sum();
      const Eigen::VectorXd delta_a =
          activate(net, l, tape.pre_activations[l].col(0) + delta_z) - activations(l).col(0);
      if (l == last) return delta_a.sum();
      if (l + 1 == last && net.output_activation() == OutputActivation::none) return out_sums.dot(delta_a);
      delta_z = net.params()[2 * (l + 1)].second.matrix() * delta_a;
    }
  }
};

}  // namespace

std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw InvalidArgument("unknown activation '" + name + "'");
}

NetParams Mlp::layout(const std::vector<int>& layer_sizes) {
  NetParams params;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const auto in = static_cast<std::size_t>(layer_sizes[l]);
    const auto out = static_cast<std::size_t>(layer_sizes[l + 1]);
    params.add(weight_name(static_cast<int>(l)), RealArray({out, in}));
    params.add(bias_name(static_cast<int>(l)), RealArray({out}));
  }
  return params;
}

Mlp::Mlp(std::vector<int> layer_sizes, Activation activation, OutputActivation output_activation,
         std::uint64_t seed)
    : layer_sizes_(std::move(layer_sizes)), activation_(activation), output_activation_(output_activation) {
  validate_sizes(layer_sizes_);
  params_ = layout(layer_sizes_);
  Rng rng(seed);
  for (int l = 0; l < layer_count(); ++l) {
    const double fan_in = layer_sizes_[l];
    const double fan_out = layer_sizes_[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    auto& w = params_.at(weight_name(l)).data();
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.uniform(-limit, limit);
  }
}

Mlp::Mlp(std::vector<int> layer_sizes, Activation activation, OutputActivation output_activation,
         NetParams params)
    : layer_sizes_(std::move(layer_sizes)),
      activation_(activation),
      output_activation_(output_activation),
      params_(std::move(params)) {
  validate_sizes(layer_sizes_);
  check_layout();
}

Mlp Mlp::zeros(std::vector<int> layer_sizes, Activation activation, OutputActivation output_activation) {
  validate_sizes(layer_sizes);
  NetParams params = layout(layer_sizes);
  return Mlp(std::move(layer_sizes), activation, output_activation, std::move(params));
}

Mlp Mlp::from_params(NetParams params, Activation activation, OutputActivation output_activation) {
  std::vector<int> sizes;
  for (int l = 0;; ++l) {
    if (!params.contains(weight_name(l))) break;
    const Shape& shape = params.at(weight_name(l)).shape();
    if (shape.size() != 2) throw InvalidArgument(weight_name(l) + " must be rank 2");
    if (l == 0) sizes.push_back(static_cast<int>(shape[1]));
    sizes.push_back(static_cast<int>(shape[0]));
  }
  return Mlp(std::move(sizes), activation, output_activation, std::move(params));
}

void Mlp::check_layout() const {
  const NetParams expected = layout(layer_sizes_);
  if (!params_.same_layout(expected)) {
    throw InvalidArgument("MLP parameters do not match layer sizes");
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::Ref<const Eigen::MatrixXd>& inputs, MlpTape* tape) const {
  if (inputs.rows() != input_size()) {
    throw InvalidArgument("MLP input has " + std::to_string(inputs.rows()) + " rows, expected " +
                          std::to_string(input_size()));
  }
  if (tape) {
    tape->layer_inputs.clear();
    tape->pre_activations.clear();
  }
  Eigen::MatrixXd a = inputs;
  for (int l = 0; l < layer_count(); ++l) {
    const auto w = params_[2 * l].second.matrix();
    const auto& b = params_[2 * l + 1].second.data();
    Eigen::MatrixXd z = w * a;
    z.colwise() += b;
    if (tape) {
      tape->layer_inputs.push_back(std::move(a));
      tape->pre_activations.push_back(z);
    }
    const bool last = l + 1 == layer_count();
    if (!last) {
      a = activation_ == Activation::tanh ? Eigen::MatrixXd(z.array().tanh())
                                          : Eigen::MatrixXd(z.array().max(0.0));
    } else {
      a = output_activation_ == OutputActivation::tanh ? Eigen::MatrixXd(z.array().tanh()) : std::move(z);
    }
  }
  if (tape) tape->output = a;
  return a;
}

MlpGradients Mlp::backward(const MlpTape& tape, const Eigen::Ref<const Eigen::MatrixXd>& output_grads) const {
  if (tape.pre_activations.size() != static_cast<std::size_t>(layer_count())) {
    throw InvalidArgument("MLP tape does not belong to this network");
  }
  if (output_grads.rows() != output_size() || output_grads.cols() != tape.output.cols()) {
    throw InvalidArgument("MLP output gradient shape mismatch");
  }
  MlpGradients grads{params_.zeros_like(), {}};

  Eigen::MatrixXd delta = output_grads;
  if (output_activation_ == OutputActivation::tanh) {
    delta.array() *= 1.0 - tape.output.array().square();
  }
  for (int l = layer_count() - 1; l >= 0; --l) {
    const Eigen::MatrixXd& a_prev = tape.layer_inputs[l];
    grads.params[2 * l].second.matrix().noalias() = delta * a_prev.transpose();
    grads.params[2 * l + 1].second.data() = delta.rowwise().sum();
    Eigen::MatrixXd upstream = params_[2 * l].second.matrix().transpose() * delta;
    if (l > 0) {
      if (activation_ == Activation::tanh) {
        upstream.array() *= 1.0 - a_prev.array().square();
      } else {
        upstream.array() *= (tape.pre_activations[l - 1].array() > 0.0).cast<double>();
      }
    }
    delta = std::move(upstream);
  }
  grads.input = std::move(delta);
  return grads;
}

Eigen::VectorXd mlp_forward(const Mlp& net, const Eigen::Ref<const Eigen::VectorXd>& input) {
  return net.forward(input);
}

MlpGradients mlp_backward(const Mlp& net, const Eigen::Ref<const Eigen::VectorXd>& input,
                          const Eigen::Ref<const Eigen::VectorXd>& output_grad) {
  MlpTape tape;
  net.forward(input, &tape);
  const SumProbe probe(net, tape);
  return net.backward(tape, output_grad);
}

GradCheckReport grad_check(const Mlp& net, const Eigen::Ref<const Eigen::VectorXd>& input, double tolerance,
                           double step, double scale_floor) {
  if (!(tolerance > 0.0)) throw InvalidArgument("grad_check tolerance must be positive");
  if (!(step > 0.0)) throw InvalidArgument("grad_check step must be positive");

  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(net.output_size());
  const MlpGradients analytic = mlp_backward(net, input, ones);

  GradCheckReport report;
  auto record = [&](double a, double n, const std::string& name, Eigen::Index i) {
    const double denom = std::max({std::abs(a), std::abs(n), scale_floor});
    const double err = std::abs(a - n) / denom;
    if (report.worst_entry.empty() || err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_entry = name + "[" + std::to_string(i) + "]";
    }
  };

  MlpTape tape;
  net.forward(input, &tape);
  const SumProbe probe(net, tape);
  for (std::size_t e = 0; e < net.params().size(); ++e) {
    const auto& [name, value] = net.params()[e];
    const int layer = static_cast<int>(e / 2);
    const bool is_weight = e % 2 == 0;
    const Eigen::Index fan_in = net.layer_sizes()[layer];
    const auto& grad = analytic.params[e].second.data();
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      // Weights are row-major [out, in]; W[r, c] moves pre-activation r by step * a[c].
      const Eigen::Index row = is_weight ? i / fan_in : i;
      const double dz = is_weight ? step * tape.layer_inputs[layer](i % fan_in, 0) : step;
      const double plus = probe.row_shift(layer, row, dz);
      const double minus = probe.row_shift(layer, row, -dz);
      record(grad[i], (plus - minus) / (2.0 * step), name, i);
    }
  }
  const auto first_weights = net.params()[0].second.matrix();
  for (Eigen::Index i = 0; i < input.size(); ++i) {
    const Eigen::VectorXd dz = first_weights.col(i) * step;
    const double plus = probe.from(0, dz);
    const double minus = probe.from(0, -dz);
    record(analytic.input(i, 0), (plus - minus) / (2.0 * step), "input", i);
  }
  report.within_tolerance = report.max_rel_error < tolerance;
  return report;
}

}  // namespace orl
