// SPDX-License-Identifier: Apache-2.0
#include "chemix/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace chemix {

std::string shape_to_string(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ')';
  return os.str();
}

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::Input: return "input";
    case OpKind::Parameter: return "parameter";
    case OpKind::Constant: return "constant";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::AddBias: return "add_bias";
    case OpKind::Affine: return "affine";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Tanh: return "tanh";
    case OpKind::Relu: return "relu";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Clamp: return "clamp";
    case OpKind::ConcatLast: return "concat_last";
    case OpKind::SliceLast: return "slice_last";
    case OpKind::TimeSlice: return "time_slice";
    case OpKind::Reshape: return "reshape";
    case OpKind::ReduceMean: return "reduce_mean";
    case OpKind::ReduceSum: return "reduce_sum";
    case OpKind::Conv1DSame: return "conv1d_same";
    case OpKind::Embedding: return "embedding";
  }
  return "?";
}

namespace {

[[noreturn]] void shape_error(const std::string& ctx, const std::string& detail) {
  throw ShapeMismatch(ctx + ": " + detail);
}

void require_same_shape(const char* ctx, const Node& a, const Node& b) {
  if (a.shape != b.shape)
    shape_error(ctx, "operands " + a.name + shape_to_string(a.shape) + " vs " + b.name +
                         shape_to_string(b.shape));
}

bool same_graph(NodeRef a, NodeRef b) { return a.graph == b.graph && a.graph != nullptr; }

}  // namespace

NodeRef make_node(ComputeGraph& g, Node n) {
  const int id = g.add_node(std::move(n));
  return NodeRef{&g, id};
}

int ComputeGraph::add_node(Node n) {
  const int id = static_cast<int>(nodes_.size());
  if (n.name.empty()) n.name = std::string(op_name(n.kind)) + ":" + std::to_string(id);
  nodes_.push_back(std::move(n));
  forward_done_ = false;
  return id;
}

NodeRef ComputeGraph::input(const std::string& name, Shape shape) {
  if (leaves_.count(name)) throw GraphError("duplicate leaf name: " + name);
  Node n;
  n.kind = OpKind::Input;
  n.name = name;
  n.shape = std::move(shape);
  const int id = add_node(std::move(n));
  leaves_[name] = id;
  return NodeRef{this, id};
}

NodeRef ComputeGraph::parameter(const std::string& name, Shape shape) {
  if (leaves_.count(name)) throw GraphError("duplicate leaf name: " + name);
  Node n;
  n.kind = OpKind::Parameter;
  n.name = name;
  n.shape = std::move(shape);
  const int id = add_node(std::move(n));
  leaves_[name] = id;
  return NodeRef{this, id};
}

NodeRef ComputeGraph::constant(Tensor value, const std::string& name) {
  Node n;
  n.kind = OpKind::Constant;
  n.name = name;
  n.shape = value.shape();
  n.constant = std::move(value);
  return NodeRef{this, add_node(std::move(n))};
}

std::vector<std::string> ComputeGraph::parameter_names() const {
  std::vector<std::string> out;
  for (const auto& n : nodes_)
    if (n.kind == OpKind::Parameter) out.push_back(n.name);
  return out;
}

std::vector<std::string> ComputeGraph::input_names() const {
  std::vector<std::string> out;
  for (const auto& n : nodes_)
    if (n.kind == OpKind::Input) out.push_back(n.name);
  return out;
}

// ---------------------------------------------------------------------------
// builders

namespace {

Node binary(OpKind kind, NodeRef a, NodeRef b) {
  Node n;
  n.kind = kind;
  n.inputs = {a.id, b.id};
  return n;
}

Node unary(OpKind kind, NodeRef x) {
  Node n;
  n.kind = kind;
  n.inputs = {x.id};
  return n;
}

}  // namespace

NodeRef matmul(NodeRef a, NodeRef b) {
  ComputeGraph& g = *a.graph;
  const Node& na = g.node(a.id);
  const Node& nb = g.node(b.id);
  if (!same_graph(a, b)) throw GraphError("matmul: operands from different graphs");
  if (na.shape.size() != 2 || nb.shape.size() != 2)
    shape_error("matmul", "needs rank-2 operands, got " + shape_to_string(na.shape) + " and " +
                              shape_to_string(nb.shape));
  if (na.shape[1] != nb.shape[0])
    shape_error("matmul", "inner dims " + shape_to_string(na.shape) + " x " +
                              shape_to_string(nb.shape));
  Node n = binary(OpKind::MatMul, a, b);
  n.shape = {na.shape[0], nb.shape[1]};
  return make_node(g, std::move(n));
}

NodeRef operator+(NodeRef a, NodeRef b) {
  ComputeGraph& g = *a.graph;
  require_same_shape("add", g.node(a.id), g.node(b.id));
  Node n = binary(OpKind::Add, a, b);
  n.shape = g.node(a.id).shape;
  return make_node(g, std::move(n));
}

NodeRef operator-(NodeRef a, NodeRef b) {
  ComputeGraph& g = *a.graph;
  require_same_shape("sub", g.node(a.id), g.node(b.id));
  Node n = binary(OpKind::Sub, a, b);
  n.shape = g.node(a.id).shape;
  return make_node(g, std::move(n));
}

NodeRef operator*(NodeRef a, NodeRef b) {
  ComputeGraph& g = *a.graph;
  require_same_shape("mul", g.node(a.id), g.node(b.id));
  Node n = binary(OpKind::Mul, a, b);
  n.shape = g.node(a.id).shape;
  return make_node(g, std::move(n));
}

NodeRef add_bias(NodeRef x, NodeRef bias) {
  ComputeGraph& g = *x.graph;
  const Node& nx = g.node(x.id);
  const Node& nb = g.node(bias.id);
  if (nb.shape.size() != 1 || nx.shape.size() < 2 || nx.shape.back() != nb.shape[0])
    shape_error("add_bias", "x " + shape_to_string(nx.shape) + " vs bias " +
                                shape_to_string(nb.shape));
  Node n = binary(OpKind::AddBias, x, bias);
  n.shape = nx.shape;
  return make_node(g, std::move(n));
}

NodeRef affine(NodeRef x, Scalar scale, Scalar shift) {
  ComputeGraph& g = *x.graph;
  Node n = unary(OpKind::Affine, x);
  n.alpha = scale;
  n.beta = shift;
  n.shape = g.node(x.id).shape;
  return make_node(g, std::move(n));
}

namespace {
NodeRef elementwise(OpKind kind, NodeRef x) {
  ComputeGraph& g = *x.graph;
  Node n = unary(kind, x);
  n.shape = g.node(x.id).shape;
  return make_node(g, std::move(n));
}
}  // namespace

NodeRef sigmoid(NodeRef x) { return elementwise(OpKind::Sigmoid, x); }
NodeRef tanh(NodeRef x) { return elementwise(OpKind::Tanh, x); }
NodeRef relu(NodeRef x) { return elementwise(OpKind::Relu, x); }
NodeRef exp(NodeRef x) { return elementwise(OpKind::Exp, x); }
NodeRef log(NodeRef x) { return elementwise(OpKind::Log, x); }

NodeRef clamp(NodeRef x, Scalar lo, Scalar hi) {
  ComputeGraph& g = *x.graph;
  if (!(lo < hi)) throw GraphError("clamp: lo must be < hi");
  Node n = unary(OpKind::Clamp, x);
  n.alpha = lo;
  n.beta = hi;
  n.shape = g.node(x.id).shape;
  return make_node(g, std::move(n));
}

NodeRef concat_last(NodeRef a, NodeRef b) {
  ComputeGraph& g = *a.graph;
  const Node& na = g.node(a.id);
  const Node& nb = g.node(b.id);
  if (na.shape.size() != nb.shape.size())
    shape_error("concat_last", "rank mismatch " + shape_to_string(na.shape) + " vs " +
                                   shape_to_string(nb.shape));
  for (std::size_t i = 0; i + 1 < na.shape.size(); ++i)
    if (na.shape[i] != nb.shape[i])
      shape_error("concat_last", "leading dims " + shape_to_string(na.shape) + " vs " +
                                     shape_to_string(nb.shape));
  Node n = binary(OpKind::ConcatLast, a, b);
  n.shape = na.shape;
  n.shape.back() = na.shape.back() + nb.shape.back();
  return make_node(g, std::move(n));
}

NodeRef slice_last(NodeRef x, Index lo, Index hi) {
  ComputeGraph& g = *x.graph;
  const Node& nx = g.node(x.id);
  const Index c = nx.shape.back();
  if (lo < 0 || hi <= lo || hi > c)
    shape_error("slice_last", "range [" + std::to_string(lo) + "," + std::to_string(hi) +
                                  ") of " + shape_to_string(nx.shape));
  Node n = unary(OpKind::SliceLast, x);
  n.i0 = lo;
  n.i1 = hi;
  n.shape = nx.shape;
  n.shape.back() = hi - lo;
  return make_node(g, std::move(n));
}

NodeRef time_slice(NodeRef x, Index t) {
  ComputeGraph& g = *x.graph;
  const Node& nx = g.node(x.id);
  if (nx.shape.size() != 3)
    shape_error("time_slice", "needs rank-3 input, got " + shape_to_string(nx.shape));
  if (t < 0 || t >= nx.shape[1])
    shape_error("time_slice", "step " + std::to_string(t) + " of " + shape_to_string(nx.shape));
  Node n = unary(OpKind::TimeSlice, x);
  n.i0 = t;
  n.shape = {nx.shape[0], nx.shape[2]};
  return make_node(g, std::move(n));
}

NodeRef reshape(NodeRef x, Shape shape) {
  ComputeGraph& g = *x.graph;
  const Node& nx = g.node(x.id);
  if (shape_size(shape) != shape_size(nx.shape))
    shape_error("reshape", shape_to_string(nx.shape) + " -> " + shape_to_string(shape));
  Node n = unary(OpKind::Reshape, x);
  n.shape = std::move(shape);
  return make_node(g, std::move(n));
}

NodeRef reduce_mean(NodeRef x) {
  Node n = unary(OpKind::ReduceMean, x);
  n.shape = {1};
  return make_node(*x.graph, std::move(n));
}

NodeRef reduce_sum(NodeRef x) {
  Node n = unary(OpKind::ReduceSum, x);
  n.shape = {1};
  return make_node(*x.graph, std::move(n));
}

NodeRef conv1d_same(NodeRef x, NodeRef kernels) {
  ComputeGraph& g = *x.graph;
  const Node& nx = g.node(x.id);
  const Node& nk = g.node(kernels.id);
  if (nx.shape.size() != 3 || nk.shape.size() != 3)
    shape_error("conv1d_same", "x " + shape_to_string(nx.shape) + ", kernels " +
                                   shape_to_string(nk.shape));
  if (nx.shape[2] != nk.shape[1])
    shape_error("conv1d_same", "channels " + shape_to_string(nx.shape) + " vs " +
                                   shape_to_string(nk.shape));
  Node n = binary(OpKind::Conv1DSame, x, kernels);
  n.shape = {nx.shape[0], nx.shape[1], nk.shape[2]};
  return make_node(g, std::move(n));
}

NodeRef embedding(NodeRef indices, NodeRef table) {
  ComputeGraph& g = *indices.graph;
  const Node& ni = g.node(indices.id);
  const Node& nt = g.node(table.id);
  if (ni.shape.size() != 2 || nt.shape.size() != 2)
    shape_error("embedding", "indices " + shape_to_string(ni.shape) + ", table " +
                                 shape_to_string(nt.shape));
  Node n = binary(OpKind::Embedding, indices, table);
  n.shape = {ni.shape[0], ni.shape[1], nt.shape[1]};
  return make_node(g, std::move(n));
}

// ---------------------------------------------------------------------------
// evaluation

Tensor& ComputeGraph::ensure(std::vector<Tensor>& buf, int id, const Shape& shape) {
  Tensor& t = buf[static_cast<std::size_t>(id)];
  if (t.shape() != shape) t = Tensor(shape);
  return t;
}

void ComputeGraph::forward(const ParamMap& params,
                           const std::map<std::string, const Tensor*>& inputs) {
  const std::size_t n = nodes_.size();
  bound_.assign(n, nullptr);
  values_.resize(n);
  scratch_.resize(n);

  for (std::size_t id = 0; id < n; ++id) {
    const Node& node = nodes_[id];
    switch (node.kind) {
      case OpKind::Input: {
        auto it = inputs.find(node.name);
        if (it == inputs.end() || it->second == nullptr)
          throw UnboundInput("input not bound: " + node.name);
        if (it->second->shape() != node.shape)
          shape_error("bind " + node.name, "declared " + shape_to_string(node.shape) +
                                               ", bound " + shape_to_string(it->second->shape()));
        bound_[id] = it->second;
        break;
      }
      case OpKind::Parameter: {
        auto it = params.find(node.name);
        if (it == params.end()) throw UnboundInput("parameter not bound: " + node.name);
        if (it->second.shape() != node.shape)
          shape_error("bind " + node.name, "declared " + shape_to_string(node.shape) +
                                               ", bound " + shape_to_string(it->second.shape()));
        bound_[id] = &it->second;
        break;
      }
      case OpKind::Constant:
        bound_[id] = &node.constant;
        break;
      default:
        eval_node(static_cast<int>(id));
        if (!values_[id].all_finite())
          throw NonFiniteValue(std::string("non-finite value in node ") + node.name);
        break;
    }
  }
  forward_done_ = true;
}

const Tensor& ComputeGraph::value(int id) const {
  if (!forward_done_) throw ForwardNotRun("value() before forward()");
  const std::size_t i = static_cast<std::size_t>(id);
  if (bound_[i] != nullptr) return *bound_[i];
  return values_[i];
}

void ComputeGraph::eval_node(int id) {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  auto in = [&](std::size_t k) -> const Tensor& {
    const int src = n.inputs[k];
    const std::size_t s = static_cast<std::size_t>(src);
    return bound_[s] != nullptr ? *bound_[s] : values_[s];
  };
  Tensor& out = ensure(values_, id, n.shape);

  switch (n.kind) {
    case OpKind::MatMul:
      out.matrix().noalias() = in(0).matrix() * in(1).matrix();
      break;
    case OpKind::Add:
      out.array() = in(0).array() + in(1).array();
      break;
    case OpKind::Sub:
      out.array() = in(0).array() - in(1).array();
      break;
    case OpKind::Mul:
      out.array() = in(0).array() * in(1).array();
      break;
    case OpKind::AddBias: {
      auto x = in(0).by_last();
      auto b = ConstVecMap(in(1).data(), in(1).size());
      out.by_last() = x.rowwise() + b.transpose();
      break;
    }
    case OpKind::Affine:
      out.array() = n.alpha * in(0).array() + n.beta;
      break;
    case OpKind::Sigmoid:
      out.array() = 1.0 / (1.0 + (-in(0).array()).exp());
      break;
    case OpKind::Tanh:
      out.array() = in(0).array().tanh();
      break;
    case OpKind::Relu:
      if (guard_mode_ != KinkGuard::Off) guard_regions(id, in(0).array(), 0.0, 0.0);
      out.array() = in(0).array().max(0.0);
      break;
    case OpKind::Exp:
      out.array() = in(0).array().exp();
      break;
    case OpKind::Log:
      out.array() = in(0).array().log();
      break;
    case OpKind::Clamp: {
      const auto& x = in(0).array();
      if (guard_mode_ != KinkGuard::Off) guard_regions(id, x, n.alpha, n.beta);
      out.array() = x.min(n.beta).max(n.alpha);
      break;
    }
    case OpKind::ConcatLast: {
      const Index ca = in(0).shape().back();
      const Index cb = in(1).shape().back();
      auto dst = out.by_last();
      dst.leftCols(ca) = in(0).by_last();
      dst.rightCols(cb) = in(1).by_last();
      break;
    }
    case OpKind::SliceLast:
      out.by_last() = in(0).by_last().middleCols(n.i0, n.i1 - n.i0);
      break;
    case OpKind::TimeSlice: {
      const Index batch = in(0).shape()[0];
      const Index len = in(0).shape()[1];
      auto src = in(0).by_last();  // (B*L, C)
      auto dst = out.matrix();     // (B, C)
      for (Index b = 0; b < batch; ++b) dst.row(b) = src.row(b * len + n.i0);
      break;
    }
    case OpKind::Reshape:
      out.array() = in(0).array();
      break;
    case OpKind::ReduceMean:
    case OpKind::ReduceSum: {
      // compensated summation: reductions feed finite-difference checks,
      // where plain accumulation noise is visible
      const auto& x = in(0).array();
      Scalar sum = 0, comp = 0;
      for (Index i = 0; i < x.size(); ++i) {
        const Scalar y = x[i] - comp;
        const Scalar t = sum + y;
        comp = (t - sum) - y;
        sum = t;
      }
      out[0] = n.kind == OpKind::ReduceMean ? sum / static_cast<Scalar>(x.size()) : sum;
      break;
    }
    case OpKind::Conv1DSame: {
      const Tensor& x = in(0);
      const Tensor& w = in(1);
      const Index batch = x.shape()[0], len = x.shape()[1], cin = x.shape()[2];
      const Index ksize = w.shape()[0];
      const Index pad_left = (ksize - 1) / 2;  // extra pad on the right for even kernels
      Tensor& cols = scratch_[static_cast<std::size_t>(id)];
      const Shape cols_shape{batch * len, ksize * cin};
      if (cols.shape() != cols_shape) cols = Tensor(cols_shape);
      cols.array().setZero();
      auto cm = cols.matrix();
      auto xm = x.by_last();  // (B*L, Cin)
      for (Index k = 0; k < ksize; ++k) {
        const Index off = k - pad_left;
        const Index lo = std::max<Index>(0, -off);
        const Index hi = std::min<Index>(len, len - off);  // exclusive
        if (hi <= lo) continue;
        for (Index b = 0; b < batch; ++b)
          cm.block(b * len + lo, k * cin, hi - lo, cin) = xm.block(b * len + lo + off, 0, hi - lo, cin);
      }
      out.by_last().noalias() = cm * w.by_last();  // (B*L, K*Cin) x (K*Cin, F)
      break;
    }
    case OpKind::Embedding: {
      const Tensor& idx = in(0);
      const Tensor& table = in(1);
      const Index rows = idx.size();
      const Index vocab_rows = table.shape()[0];
      auto dst = out.by_last();
      auto tab = table.matrix();
      for (Index r = 0; r < rows; ++r) {
        const Scalar v = idx[r];
        const Index i = static_cast<Index>(std::llround(v));
        if (static_cast<Scalar>(i) != v || i < 0 || i >= vocab_rows)
          throw IndexOutOfRange("embedding index " + std::to_string(v) + " outside [0," +
                                std::to_string(vocab_rows - 1) + "] in node " + n.name);
        dst.row(r) = tab.row(i);
      }
      break;
    }
    default:
      throw GraphError("leaf evaluated as op");
  }
}

void ComputeGraph::guard_regions(int id, const ArrayX& x, Scalar lo, Scalar hi) {
  // side of the kink(s) each element sits on: -1 below, 0 on/inside, +1 above
  std::vector<signed char>& sides = guard_sides_[id];
  const std::size_t n = static_cast<std::size_t>(x.size());
  if (guard_mode_ == KinkGuard::Record) {
    sides.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Scalar v = x[static_cast<Index>(i)];
      sides[i] = v < lo ? -1 : (v > hi ? 1 : 0);
    }
    return;
  }
  if (sides.size() != n) {
    kink_near_ = true;
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar v = x[static_cast<Index>(i)];
    const signed char side = v < lo ? -1 : (v > hi ? 1 : 0);
    if (side != sides[i]) {
      kink_near_ = true;
      return;
    }
  }
}

Tensor& ComputeGraph::touch_grad(int id) {
  const std::size_t i = static_cast<std::size_t>(id);
  const Shape& shape = nodes_[i].shape;
  Tensor& g = grads_[i];
  if (!grad_touched_[i]) {
    if (g.shape() != shape) g = Tensor(shape);
    else g.array().setZero();
    grad_touched_[i] = 1;
  }
  return g;
}

void ComputeGraph::backward(NodeRef loss) {
  if (!forward_done_) throw ForwardNotRun("backward() before forward()");
  if (loss.graph != this) throw GraphError("loss node from another graph");
  const Node& ln = node(loss.id);
  if (shape_size(ln.shape) != 1)
    throw NotScalarLoss("loss node " + ln.name + " has shape " + shape_to_string(ln.shape));

  grads_.resize(nodes_.size());
  grad_touched_.assign(nodes_.size(), 0);
  touch_grad(loss.id)[0] = 1.0;

  for (int id = loss.id; id >= 0; --id) {
    if (!grad_touched_[static_cast<std::size_t>(id)]) continue;
    backprop_node(id);
  }
}

void ComputeGraph::backprop_node(int id) {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.kind == OpKind::Input || n.kind == OpKind::Parameter || n.kind == OpKind::Constant)
    return;
  const Tensor& gy = grads_[static_cast<std::size_t>(id)];
  auto in = [&](std::size_t k) -> const Tensor& {
    const int src = n.inputs[k];
    const std::size_t s = static_cast<std::size_t>(src);
    return bound_[s] != nullptr ? *bound_[s] : values_[s];
  };
  auto gin = [&](std::size_t k) -> Tensor& { return touch_grad(n.inputs[k]); };

  switch (n.kind) {
    case OpKind::MatMul:
      gin(0).matrix().noalias() += gy.matrix() * in(1).matrix().transpose();
      gin(1).matrix().noalias() += in(0).matrix().transpose() * gy.matrix();
      break;
    case OpKind::Add:
      gin(0).array() += gy.array();
      gin(1).array() += gy.array();
      break;
    case OpKind::Sub:
      gin(0).array() += gy.array();
      gin(1).array() -= gy.array();
      break;
    case OpKind::Mul:
      gin(0).array() += gy.array() * in(1).array();
      gin(1).array() += gy.array() * in(0).array();
      break;
    case OpKind::AddBias: {
      gin(0).array() += gy.array();
      auto gb = VecMap(gin(1).data(), gin(1).size());
      gb.noalias() += gy.by_last().colwise().sum().transpose();
      break;
    }
    case OpKind::Affine:
      gin(0).array() += n.alpha * gy.array();
      break;
    case OpKind::Sigmoid: {
      const auto& y = values_[static_cast<std::size_t>(id)].array();
      gin(0).array() += gy.array() * y * (1.0 - y);
      break;
    }
    case OpKind::Tanh: {
      const auto& y = values_[static_cast<std::size_t>(id)].array();
      gin(0).array() += gy.array() * (1.0 - y * y);
      break;
    }
    case OpKind::Relu:
      gin(0).array() += gy.array() * (in(0).array() > 0.0).cast<Scalar>();
      break;
    case OpKind::Exp:
      gin(0).array() += gy.array() * values_[static_cast<std::size_t>(id)].array();
      break;
    case OpKind::Log:
      gin(0).array() += gy.array() / in(0).array();
      break;
    case OpKind::Clamp: {
      const auto& x = in(0).array();
      gin(0).array() +=
          gy.array() * ((x > n.alpha) && (x < n.beta)).cast<Scalar>();
      break;
    }
    case OpKind::ConcatLast: {
      const Index ca = in(0).shape().back();
      const Index cb = in(1).shape().back();
      auto gym = gy.by_last();
      gin(0).by_last() += gym.leftCols(ca);
      gin(1).by_last() += gym.rightCols(cb);
      break;
    }
    case OpKind::SliceLast:
      gin(0).by_last().middleCols(n.i0, n.i1 - n.i0) += gy.by_last();
      break;
    case OpKind::TimeSlice: {
      const Index batch = in(0).shape()[0];
      const Index len = in(0).shape()[1];
      auto gx = gin(0).by_last();
      auto gym = gy.matrix();
      for (Index b = 0; b < batch; ++b) gx.row(b * len + n.i0) += gym.row(b);
      break;
    }
    case OpKind::Reshape:
      gin(0).array() += gy.array();
      break;
    case OpKind::ReduceMean:
      gin(0).array() += gy[0] / static_cast<Scalar>(in(0).size());
      break;
    case OpKind::ReduceSum:
      gin(0).array() += gy[0];
      break;
    case OpKind::Conv1DSame: {
      const Tensor& x = in(0);
      const Tensor& w = in(1);
      const Index batch = x.shape()[0], len = x.shape()[1], cin = x.shape()[2];
      const Index ksize = w.shape()[0];
      const Index pad_left = (ksize - 1) / 2;
      const Tensor& cols = scratch_[static_cast<std::size_t>(id)];  // built in forward
      // dW = cols^T * dY
      gin(1).by_last().noalias() += cols.matrix().transpose() * gy.by_last();
      // dX via d(cols) = dY * W^T scattered back through the im2col copy
      MatrixRM dcols = gy.by_last() * w.by_last().transpose();  // (B*L, K*Cin)
      auto gx = gin(0).by_last();
      for (Index k = 0; k < ksize; ++k) {
        const Index off = k - pad_left;
        const Index lo = std::max<Index>(0, -off);
        const Index hi = std::min<Index>(len, len - off);
        if (hi <= lo) continue;
        for (Index b = 0; b < batch; ++b)
          gx.block(b * len + lo + off, 0, hi - lo, cin) += dcols.block(b * len + lo, k * cin, hi - lo, cin);
      }
      break;
    }
    case OpKind::Embedding: {
      const Tensor& idx = in(0);
      const Index rows = idx.size();
      auto gt = gin(1).matrix();
      auto gym = gy.by_last();
      for (Index r = 0; r < rows; ++r) {
        const Index i = static_cast<Index>(std::llround(idx[r]));
        if (i == 0) continue;  // pad row stays frozen at zero
        gt.row(i) += gym.row(r);
      }
      break;
    }
    default:
      break;
  }
}

ParamMap ComputeGraph::parameter_gradients() const {
  if (grads_.size() != nodes_.size()) throw ForwardNotRun("backward() has not run");
  ParamMap out;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    if (n.kind != OpKind::Parameter) continue;
    if (grad_touched_[id]) out.emplace(n.name, grads_[id]);
    else out.emplace(n.name, Tensor(n.shape));
  }
  return out;
}

const Tensor* ComputeGraph::parameter_gradient(const std::string& name) const {
  if (grads_.size() != nodes_.size()) throw ForwardNotRun("backward() has not run");
  auto it = leaves_.find(name);
  if (it == leaves_.end()) throw GraphError("no parameter leaf named " + name);
  const std::size_t id = static_cast<std::size_t>(it->second);
  if (nodes_[id].kind != OpKind::Parameter)
    throw GraphError("leaf " + name + " is not a parameter");
  return grad_touched_[id] ? &grads_[id] : nullptr;
}

const Tensor& ComputeGraph::gradient(NodeRef n) const {
  if (grads_.size() != nodes_.size()) throw ForwardNotRun("backward() has not run");
  const std::size_t i = static_cast<std::size_t>(n.id);
  if (!grad_touched_[i]) {
    static thread_local Tensor zero;
    zero = Tensor(nodes_[i].shape);
    return zero;
  }
  return grads_[i];
}

// ---------------------------------------------------------------------------

FiniteDiffReport finite_difference_check(ComputeGraph& g, NodeRef loss, ParamMap params,
                                         const std::map<std::string, const Tensor*>& inputs,
                                         Scalar eps) {
  g.forward(params, inputs);
  g.backward(loss);
  const ParamMap analytic = g.parameter_gradients();

  FiniteDiffReport report;
  for (auto& [name, tensor] : params) {
    const Tensor& grad = analytic.at(name);
    for (Index c = 0; c < tensor.size(); ++c) {
      const Scalar saved = tensor[c];

      tensor[c] = saved + eps;
      g.arm_kink_guard_record();
      g.forward(params, inputs);
      const Scalar f_plus = g.value(loss)[0];

      tensor[c] = saved - eps;
      g.arm_kink_guard_compare();
      g.forward(params, inputs);
      const bool kink = g.kink_near();  // some Relu/Clamp input switched sides
      const Scalar f_minus = g.value(loss)[0];

      g.disarm_kink_guard();
      tensor[c] = saved;

      if (kink) {
        ++report.excluded;
        continue;
      }
      const Scalar numeric = (f_plus - f_minus) / (2 * eps);
      const Scalar a = grad[c];
      const Scalar denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const Scalar rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = name;
        report.worst_coord = c;
      }
    }
  }
  // params is local to this check: drop the graph's bindings into it
  g.invalidate();
  return report;
}

}  // namespace chemix
