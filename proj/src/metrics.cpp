// SPDX-License-Identifier: Apache-2.0
#include "chemix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "chemix/layers.hpp"

namespace chemix {

Scalar compute_loss(const Tensor& pred, const Tensor& target, LossKind kind) {
  if (!pred.same_shape(target))
    throw ShapeMismatch("loss operands " + shape_to_string(pred.shape()) + " vs " +
                        shape_to_string(target.shape()));
  if (kind == LossKind::Mse) return (pred.array() - target.array()).square().mean();

  Scalar sum = 0;
  for (Index i = 0; i < pred.size(); ++i) {
    Scalar p = pred[i];
    const Scalar t = target[i];
    if (t != 0.0 && t != 1.0) throw DomainError("bce target must be 0 or 1, got " + std::to_string(t));
    if (p < -kBceClamp || p > 1.0 + kBceClamp)
      throw DomainError("bce prediction outside (0,1): " + std::to_string(p));
    p = std::clamp(p, kBceClamp, 1.0 - kBceClamp);
    sum += t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return -sum / static_cast<Scalar>(pred.size());
}

Scalar mape(std::span<const Scalar> pred, std::span<const Scalar> target) {
  if (pred.size() != target.size() || pred.empty())
    throw ShapeMismatch("mape needs equal-length non-empty vectors");
  Scalar sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (target[i] == 0.0) throw ZeroTarget("mape target is zero at index " + std::to_string(i));
    sum += std::abs(target[i] - pred[i]) / std::abs(target[i]);
  }
  return sum / static_cast<Scalar>(pred.size()) * 100.0;
}

Scalar auc(std::span<const Scalar> scores, std::span<const Scalar> labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw ShapeMismatch("auc needs equal-length non-empty vectors");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0)
      throw DomainError("auc label must be 0 or 1, got " + std::to_string(labels[i]));
    if (labels[i] == 1.0) ++n_pos;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw SingleClass("auc needs both classes present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // average ranks over tie groups; rank sum of positives gives the
  // Mann-Whitney statistic, which equals pairwise counting with half-ties
  Scalar rank_sum_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const Scalar avg_rank = (static_cast<Scalar>(i + 1) + static_cast<Scalar>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1.0) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const Scalar p = static_cast<Scalar>(n_pos);
  return (rank_sum_pos - p * (p + 1) / 2.0) / (p * static_cast<Scalar>(n_neg));
}

}  // namespace chemix
