// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "chemix/tensor.hpp"

namespace chemix {

struct GraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeMismatch : GraphError {
  using GraphError::GraphError;
};
struct UnboundInput : GraphError {
  using GraphError::GraphError;
};
struct NonFiniteValue : GraphError {
  using GraphError::GraphError;
};
struct NotScalarLoss : GraphError {
  using GraphError::GraphError;
};
struct ForwardNotRun : GraphError {
  using GraphError::GraphError;
};
struct IndexOutOfRange : GraphError {
  using GraphError::GraphError;
};

enum class OpKind {
  Input,
  Parameter,
  Constant,
  MatMul,
  Add,
  Sub,
  Mul,
  AddBias,
  Affine,
  Sigmoid,
  Tanh,
  Relu,
  Exp,
  Log,
  Clamp,
  ConcatLast,
  SliceLast,
  TimeSlice,
  Reshape,
  ReduceMean,
  ReduceSum,
  Conv1DSame,
  Embedding,
};

const char* op_name(OpKind k);

class ComputeGraph;

/// Lightweight handle to a node; builder free functions below combine these
/// the way Eigen expressions combine matrices.
struct NodeRef {
  ComputeGraph* graph = nullptr;
  int id = -1;
};

struct Node {
  OpKind kind;
  std::string name;
  std::vector<int> inputs;
  Shape shape;
  // op attributes (meaning depends on kind)
  Scalar alpha = 0;  // Affine scale / Clamp lo
  Scalar beta = 0;   // Affine shift / Clamp hi
  Index i0 = 0;      // SliceLast lo / TimeSlice t
  Index i1 = 0;      // SliceLast hi
  Tensor constant;   // Constant payload
};

using ParamMap = std::map<std::string, Tensor>;

/// Acyclic graph of primitive tensor operations with reverse-mode autodiff.
/// Nodes are appended in topological order; an instance owns its memoized
/// forward values and gradients, so it is single-writer. Copying is disabled;
/// use one graph per concurrent evaluation context.
class ComputeGraph {
 public:
  ComputeGraph() = default;
  ComputeGraph(const ComputeGraph&) = delete;
  ComputeGraph& operator=(const ComputeGraph&) = delete;
  ComputeGraph(ComputeGraph&&) = default;
  ComputeGraph& operator=(ComputeGraph&&) = default;

  NodeRef input(const std::string& name, Shape shape);
  NodeRef parameter(const std::string& name, Shape shape);
  NodeRef constant(Tensor value, const std::string& name = "");

  int node_count() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::vector<std::string> parameter_names() const;
  std::vector<std::string> input_names() const;

  /// Evaluates every node once in topological order. Parameter leaves read
  /// from `params`, input leaves from `inputs`; both must outlive subsequent
  /// value()/backward() calls.
  void forward(const ParamMap& params, const std::map<std::string, const Tensor*>& inputs);

  const Tensor& value(NodeRef n) const { return value(n.id); }
  const Tensor& value(int id) const;

  /// Reverse-mode sweep from a scalar loss node; forward() must have run.
  void backward(NodeRef loss);

  /// Gradient of the last backward()'s loss w.r.t. every parameter leaf
  /// (zeros for parameters the loss does not depend on).
  ParamMap parameter_gradients() const;

  /// Borrowed view of one parameter's gradient; nullptr when the loss does
  /// not depend on it. Valid until the next backward()/invalidate().
  const Tensor* parameter_gradient(const std::string& name) const;

  const Tensor& gradient(NodeRef n) const;

  bool forward_done() const { return forward_done_; }

  /// Drops leaf bindings and memoized values; value() throws until the next
  /// forward(). Call when previously bound tensors are about to go away.
  void invalidate() {
    forward_done_ = false;
    bound_.assign(nodes_.size(), nullptr);
    grads_.clear();
    grad_touched_.clear();
  }

  /// Kink guard for the finite-difference driver. Record mode snapshots the
  /// side of the kink every Relu/Clamp input sits on; compare mode flags the
  /// evaluation when any input has moved to a different side (i.e. the
  /// perturbation crossed a non-differentiable point).
  void arm_kink_guard_record() {
    guard_mode_ = KinkGuard::Record;
    kink_near_ = false;
  }
  void arm_kink_guard_compare() { guard_mode_ = KinkGuard::Compare; }
  void disarm_kink_guard() { guard_mode_ = KinkGuard::Off; }
  bool kink_near() const { return kink_near_; }

  friend NodeRef make_node(ComputeGraph& g, Node n);

 private:
  enum class KinkGuard { Off, Record, Compare };

  int add_node(Node n);
  void eval_node(int id);
  void backprop_node(int id);
  Tensor& ensure(std::vector<Tensor>& buf, int id, const Shape& shape);
  Tensor& touch_grad(int id);
  void guard_regions(int id, const ArrayX& x, Scalar lo, Scalar hi);

  std::vector<Node> nodes_;
  std::map<std::string, int> leaves_;

  // evaluation state
  std::vector<const Tensor*> bound_;  // leaf bindings (params/inputs)
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::vector<char> grad_touched_;
  std::vector<Tensor> scratch_;  // per-node workspace (im2col buffers)
  bool forward_done_ = false;

  KinkGuard guard_mode_ = KinkGuard::Off;
  bool kink_near_ = false;
  std::map<int, std::vector<signed char>> guard_sides_;
};

// Builder free functions. All shape checking happens here, at build time.
NodeRef matmul(NodeRef a, NodeRef b);
NodeRef operator+(NodeRef a, NodeRef b);
NodeRef operator-(NodeRef a, NodeRef b);
NodeRef operator*(NodeRef a, NodeRef b);
NodeRef add_bias(NodeRef x, NodeRef bias);
NodeRef affine(NodeRef x, Scalar scale, Scalar shift);
NodeRef sigmoid(NodeRef x);
NodeRef tanh(NodeRef x);
NodeRef relu(NodeRef x);
NodeRef exp(NodeRef x);
NodeRef log(NodeRef x);
NodeRef clamp(NodeRef x, Scalar lo, Scalar hi);
NodeRef concat_last(NodeRef a, NodeRef b);
NodeRef slice_last(NodeRef x, Index lo, Index hi);
NodeRef time_slice(NodeRef x, Index t);
NodeRef reshape(NodeRef x, Shape shape);
NodeRef reduce_mean(NodeRef x);
NodeRef reduce_sum(NodeRef x);
NodeRef conv1d_same(NodeRef x, NodeRef kernels);
NodeRef embedding(NodeRef indices, NodeRef table);

struct FiniteDiffReport {
  Scalar max_rel_error = 0;
  Index checked = 0;
  Index excluded = 0;  // coordinates near a Relu/Clamp kink, not comparable
  std::string worst_param;
  Index worst_coord = -1;
};

/// Central-difference check of backward() against (f(+eps)-f(-eps))/(2 eps)
/// over every coordinate of every parameter. Relative error denominator is
/// max(|analytic|, |numeric|, 1e-8). Coordinates whose perturbed forwards
/// come near a Relu/Clamp kink are excluded rather than compared.
FiniteDiffReport finite_difference_check(ComputeGraph& g, NodeRef loss, ParamMap params,
                                         const std::map<std::string, const Tensor*>& inputs,
                                         Scalar eps);

}  // namespace chemix
