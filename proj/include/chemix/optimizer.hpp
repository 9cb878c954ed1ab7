// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <set>
#include <string>

#include "chemix/graph.hpp"

namespace chemix {

struct NonFiniteGradient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Adam with bias correction (Kingma & Ba). Moments mirror parameter shapes;
/// parameters flagged via pin_row_zero keep row 0 at exactly zero after every
/// step (embedding pad rows).
class AdamState {
 public:
  explicit AdamState(const ParamMap& params, Scalar learning_rate = 1e-3, Scalar beta1 = 0.9,
                     Scalar beta2 = 0.999, Scalar epsilon = 1e-8);

  void pin_row_zero(const std::string& param_name) { pinned_.insert(param_name); }

  /// One update over every parameter; `grads` must cover the same names.
  void step(ParamMap& params, const ParamMap& grads);

  /// Same update reading gradients straight from a freshly backpropagated
  /// graph (no copies); parameters the loss ignores decay their moments.
  void step(ParamMap& params, const ComputeGraph& graph);

  long step_count() const { return step_count_; }
  Scalar learning_rate() const { return lr_; }
  const Tensor& first_moment(const std::string& name) const { return m_.at(name); }
  const Tensor& second_moment(const std::string& name) const { return v_.at(name); }

 private:
  void step_one(const std::string& name, Tensor& p, const Tensor* g, Scalar bc1, Scalar bc2);
  void pin_rows(ParamMap& params);

  Scalar lr_, beta1_, beta2_, eps_;
  long step_count_ = 0;
  ParamMap m_, v_;
  std::set<std::string> pinned_;
};

}  // namespace chemix
