// SPDX-License-Identifier: Apache-2.0
#include "chemix/layers.hpp"

#include <cmath>

namespace chemix {

namespace {

Tensor uniform_fan_in(Shape shape, Index fan_in, SplitMix64& rng) {
  Tensor t(std::move(shape));
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(fan_in));
  for (Index i = 0; i < t.size(); ++i) t[i] = rng.next_double(-bound, bound);
  return t;
}

}  // namespace

void init_dense(ParamMap& params, const std::string& prefix, const DenseSpec& spec,
                SplitMix64& rng) {
  params[prefix + ".w"] = uniform_fan_in({spec.in, spec.out}, spec.in, rng);
  params[prefix + ".b"] = Tensor({spec.out});
}

void init_conv1d(ParamMap& params, const std::string& prefix, const Conv1DSpec& spec,
                 SplitMix64& rng) {
  params[prefix + ".k"] =
      uniform_fan_in({spec.kernel, spec.in_channels, spec.filters}, spec.kernel * spec.in_channels, rng);
  params[prefix + ".b"] = Tensor({spec.filters});
}

void init_recurrent(ParamMap& params, const std::string& prefix, const RecurrentSpec& spec,
                    SplitMix64& rng) {
  const Index gates = spec.kind == CellKind::GRU ? 3 : 4;
  const Index h = spec.hidden;
  params[prefix + ".wx"] = uniform_fan_in({spec.in, gates * h}, spec.in, rng);
  params[prefix + ".wh"] = uniform_fan_in({h, gates * h}, h, rng);
  Tensor bias({gates * h});
  if (spec.kind == CellKind::LSTM) {
    // gate order [i, f, g, o]; forget bias starts at 1 for trainability
    for (Index i = h; i < 2 * h; ++i) bias[i] = 1.0;
  }
  params[prefix + ".b"] = std::move(bias);
}

void init_embedding(ParamMap& params, const std::string& prefix, const EmbeddingSpec& spec,
                    SplitMix64& rng) {
  Tensor table({spec.vocab_size + 1, spec.dim});
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(spec.dim));
  auto m = table.matrix();
  for (Index r = 1; r <= spec.vocab_size; ++r)
    for (Index c = 0; c < spec.dim; ++c) m(r, c) = rng.next_double(-bound, bound);
  params[prefix + ".table"] = std::move(table);
}

NodeRef apply_activation(NodeRef x, Activation act) {
  switch (act) {
    case Activation::Linear: return x;
    case Activation::Relu: return relu(x);
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Tanh: return tanh(x);
  }
  return x;
}

NodeRef dense(ComputeGraph& g, NodeRef x, const std::string& prefix, const DenseSpec& spec) {
  NodeRef w = g.parameter(prefix + ".w", {spec.in, spec.out});
  NodeRef b = g.parameter(prefix + ".b", {spec.out});
  return apply_activation(add_bias(matmul(x, w), b), spec.act);
}

NodeRef conv1d(ComputeGraph& g, NodeRef x, const std::string& prefix, const Conv1DSpec& spec) {
  NodeRef k = g.parameter(prefix + ".k", {spec.kernel, spec.in_channels, spec.filters});
  NodeRef b = g.parameter(prefix + ".b", {spec.filters});
  NodeRef y = add_bias(conv1d_same(x, k), b);
  return spec.relu_act ? relu(y) : y;
}

NodeRef embed(ComputeGraph& g, NodeRef indices, const std::string& prefix,
              const EmbeddingSpec& spec) {
  NodeRef table = g.parameter(prefix + ".table", {spec.vocab_size + 1, spec.dim});
  return embedding(indices, table);
}

namespace {

struct StepOutput {
  NodeRef hidden;
  NodeRef cell;  // LSTM only
};

// One GRU step. Gate order [z, r, c]; candidate uses the reset-scaled
// recurrent term: c = tanh(xWc + r o (h Uc) + bc); h' = z o h + (1-z) o c.
StepOutput gru_step(NodeRef xw_t, NodeRef h, NodeRef wh, Index hsize) {
  NodeRef hu = matmul(h, wh);
  NodeRef z = sigmoid(slice_last(xw_t, 0, hsize) + slice_last(hu, 0, hsize));
  NodeRef r = sigmoid(slice_last(xw_t, hsize, 2 * hsize) + slice_last(hu, hsize, 2 * hsize));
  NodeRef cand =
      tanh(slice_last(xw_t, 2 * hsize, 3 * hsize) + r * slice_last(hu, 2 * hsize, 3 * hsize));
  NodeRef h_next = z * h + affine(z, -1.0, 1.0) * cand;
  return {h_next, NodeRef{}};
}

// One LSTM step. Gate order [i, f, g, o]:
//   c' = f o c + i o g,  h' = o o tanh(c')
StepOutput lstm_step(NodeRef xw_t, NodeRef h, NodeRef cell, NodeRef wh, Index hsize) {
  NodeRef s = xw_t + matmul(h, wh);
  NodeRef i = sigmoid(slice_last(s, 0, hsize));
  NodeRef f = sigmoid(slice_last(s, hsize, 2 * hsize));
  NodeRef gcand = tanh(slice_last(s, 2 * hsize, 3 * hsize));
  NodeRef o = sigmoid(slice_last(s, 3 * hsize, 4 * hsize));
  NodeRef c_next = f * cell + i * gcand;
  NodeRef h_next = o * tanh(c_next);
  return {h_next, c_next};
}

}  // namespace

NodeRef recurrent(ComputeGraph& g, NodeRef x, const std::string& prefix,
                  const RecurrentSpec& spec, bool return_sequence) {
  const Node& nx = g.node(x.id);
  if (nx.shape.size() != 3)
    throw ShapeMismatch("recurrent: needs (batch, len, features) input, got " +
                        shape_to_string(nx.shape));
  const Index batch = nx.shape[0], len = nx.shape[1], feat = nx.shape[2];
  if (feat != spec.in)
    throw ShapeMismatch("recurrent: input features " + std::to_string(feat) +
                        " != spec.in " + std::to_string(spec.in));
  const Index gates = spec.kind == CellKind::GRU ? 3 : 4;
  const Index h = spec.hidden;

  NodeRef wx = g.parameter(prefix + ".wx", {spec.in, gates * h});
  NodeRef wh = g.parameter(prefix + ".wh", {h, gates * h});
  NodeRef b = g.parameter(prefix + ".b", {gates * h});

  // Input projection for all steps in one product: (B*L, in) x (in, gates*h).
  NodeRef xw_all =
      reshape(add_bias(matmul(reshape(x, {batch * len, spec.in}), wx), b), {batch, len, gates * h});

  NodeRef state = g.constant(Tensor({batch, h}), prefix + ".h0");
  NodeRef cell = spec.kind == CellKind::LSTM ? g.constant(Tensor({batch, h}), prefix + ".c0")
                                             : NodeRef{};
  NodeRef seq{};
  for (Index t = 0; t < len; ++t) {
    NodeRef xw_t = time_slice(xw_all, t);
    StepOutput out = spec.kind == CellKind::GRU ? gru_step(xw_t, state, wh, h)
                                                : lstm_step(xw_t, state, cell, wh, h);
    state = out.hidden;
    cell = out.cell;
    if (return_sequence) seq = t == 0 ? state : concat_last(seq, state);
  }
  if (return_sequence) return reshape(seq, {batch, len, h});
  return state;
}

NodeRef mse_loss(NodeRef pred, NodeRef target) {
  NodeRef diff = pred - target;
  return reduce_mean(diff * diff);
}

NodeRef bce_loss(NodeRef pred, NodeRef target) {
  NodeRef p = clamp(pred, kBceClamp, 1.0 - kBceClamp);
  NodeRef pos = target * log(p);
  NodeRef neg = affine(target, -1.0, 1.0) * log(affine(p, -1.0, 1.0));
  return affine(reduce_mean(pos + neg), -1.0, 0.0);
}

}  // namespace chemix
