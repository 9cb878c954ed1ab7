// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "chemix/graph.hpp"
#include "chemix/rng.hpp"

namespace chemix {

enum class Activation { Linear, Relu, Sigmoid, Tanh };

enum class CellKind { GRU, LSTM };

struct DenseSpec {
  Index in = 0;
  Index out = 0;
  Activation act = Activation::Linear;
};

struct Conv1DSpec {
  Index kernel = 3;
  Index in_channels = 0;
  Index filters = 32;
  bool relu_act = true;  // "same" padding is implied; output length == input length
};

struct RecurrentSpec {
  CellKind kind = CellKind::GRU;
  Index in = 0;
  Index hidden = 64;
};

struct EmbeddingSpec {
  Index vocab_size = 0;  // table has vocab_size + 1 rows; row 0 is the frozen pad row
  Index dim = 32;
};

// Parameter initialization. Weights draw uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
// in flat index order from the given generator; biases are zero except the
// LSTM forget gate, which starts at 1. Embedding row 0 stays zero.
void init_dense(ParamMap& params, const std::string& prefix, const DenseSpec& spec,
                SplitMix64& rng);
void init_conv1d(ParamMap& params, const std::string& prefix, const Conv1DSpec& spec,
                 SplitMix64& rng);
void init_recurrent(ParamMap& params, const std::string& prefix, const RecurrentSpec& spec,
                    SplitMix64& rng);
void init_embedding(ParamMap& params, const std::string& prefix, const EmbeddingSpec& spec,
                    SplitMix64& rng);

NodeRef apply_activation(NodeRef x, Activation act);

// Graph builders. Each declares its parameter leaves under `prefix` with the
// same names init_* creates, and returns the layer output node.
//   dense:     (B, in) -> (B, out)
//   conv1d:    (B, L, Cin) -> (B, L, filters), length preserved
//   embed:     (B, L) integer indices -> (B, L, dim), index 0 -> zero vector
//   recurrent: (B, L, in) -> (B, hidden), or (B, L, hidden) when return_sequence
NodeRef dense(ComputeGraph& g, NodeRef x, const std::string& prefix, const DenseSpec& spec);
NodeRef conv1d(ComputeGraph& g, NodeRef x, const std::string& prefix, const Conv1DSpec& spec);
NodeRef embed(ComputeGraph& g, NodeRef indices, const std::string& prefix,
              const EmbeddingSpec& spec);
NodeRef recurrent(ComputeGraph& g, NodeRef x, const std::string& prefix,
                  const RecurrentSpec& spec, bool return_sequence = false);

// Losses as scalar graph nodes over same-shaped pred/target.
NodeRef mse_loss(NodeRef pred, NodeRef target);
// Binary cross-entropy; predictions clamped to [1e-7, 1-1e-7] before the logs.
NodeRef bce_loss(NodeRef pred, NodeRef target);

inline constexpr Scalar kBceClamp = 1e-7;

}  // namespace chemix
