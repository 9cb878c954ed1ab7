// SPDX-License-Identifier: Apache-2.0
#include "chemix/optimizer.hpp"

#include <cmath>

namespace chemix {

AdamState::AdamState(const ParamMap& params, Scalar learning_rate, Scalar beta1, Scalar beta2,
                     Scalar epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  for (const auto& [name, tensor] : params) {
    m_.emplace(name, Tensor(tensor.shape()));
    v_.emplace(name, Tensor(tensor.shape()));
  }
}

void AdamState::step_one(const std::string& name, Tensor& p, const Tensor* g, Scalar bc1,
                         Scalar bc2) {
  auto& m = m_.at(name).array();
  auto& v = v_.at(name).array();
  if (g != nullptr) {
    if (!g->same_shape(p))
      throw ShapeMismatch("gradient shape " + shape_to_string(g->shape()) + " vs parameter " +
                          name + " " + shape_to_string(p.shape()));
    if (!g->all_finite()) throw NonFiniteGradient("non-finite gradient for parameter " + name);
    m = beta1_ * m + (1.0 - beta1_) * g->array();
    v = beta2_ * v + (1.0 - beta2_) * g->array().square();
  } else {  // loss does not touch this parameter: gradient is exactly zero
    m *= beta1_;
    v *= beta2_;
  }
  p.array() -= lr_ * (m / bc1) / ((v / bc2).sqrt() + eps_);
}

void AdamState::step(ParamMap& params, const ParamMap& grads) {
  ++step_count_;
  const Scalar bc1 = 1.0 - std::pow(beta1_, static_cast<Scalar>(step_count_));
  const Scalar bc2 = 1.0 - std::pow(beta2_, static_cast<Scalar>(step_count_));
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) throw NonFiniteGradient("missing gradient for parameter " + name);
    step_one(name, p, &git->second, bc1, bc2);
  }
  pin_rows(params);
}

void AdamState::step(ParamMap& params, const ComputeGraph& graph) {
  ++step_count_;
  const Scalar bc1 = 1.0 - std::pow(beta1_, static_cast<Scalar>(step_count_));
  const Scalar bc2 = 1.0 - std::pow(beta2_, static_cast<Scalar>(step_count_));
  for (auto& [name, p] : params) step_one(name, p, graph.parameter_gradient(name), bc1, bc2);
  pin_rows(params);
}

void AdamState::pin_rows(ParamMap& params) {
  for (const auto& name : pinned_) {
    auto it = params.find(name);
    if (it != params.end()) it->second.matrix().row(0).setZero();
  }
}

}  // namespace chemix
