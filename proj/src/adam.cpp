#include "orl/adam.hpp"

#include <cmath>

namespace orl {

AdamState AdamState::for_params(const NetParams& params, double learning_rate) {
  AdamState state;
  state.first_moment = params.zeros_like();
  state.second_moment = params.zeros_like();
  state.learning_rate = learning_rate;
  return state;
}

void adam_step(NetParams& params, const NetParams& grads, AdamState& state) {
  require_same_layout(params, grads, "adam_step gradients");
  require_same_layout(params, state.first_moment, "adam_step first moment");
  require_same_layout(params, state.second_moment, "adam_step second moment");

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);

  for (std::size_t e = 0; e < params.size(); ++e) {
    const auto& g = grads[e].second.data().array();
    auto m = state.first_moment[e].second.data().array();
    auto v = state.second_moment[e].second.data().array();
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.square();
    params[e].second.data().array() -=
        state.learning_rate * (m / correction1) / ((v / correction2).sqrt() + state.epsilon);
  }
}

}  // namespace orl
