// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <stdexcept>

#include "chemix/tensor.hpp"

namespace chemix {

struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ZeroTarget : MetricError {
  using MetricError::MetricError;
};
struct SingleClass : MetricError {
  using MetricError::MetricError;
};
struct DomainError : MetricError {
  using MetricError::MetricError;
};

enum class LossKind { Mse, Bce };
enum class MetricKind { Mape, Auc };

/// Eager loss evaluation (reporting/tests; training uses the graph nodes).
/// bce validates predictions lie in (0,1) up to the clamping tolerance.
Scalar compute_loss(const Tensor& pred, const Tensor& target, LossKind kind);

/// mean(|t - p| / |t|) * 100; |t| in the denominator because targets may be
/// negative throughout (HOMO energies). Any exactly-zero target throws.
Scalar mape(std::span<const Scalar> pred, std::span<const Scalar> target);

/// Probability a uniformly random positive outranks a uniformly random
/// negative, ties counted 1/2; computed from average ranks in O(n log n).
/// Labels must be 0/1 and contain both classes.
Scalar auc(std::span<const Scalar> scores, std::span<const Scalar> labels);

}  // namespace chemix
