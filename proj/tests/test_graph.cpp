// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "chemix/graph.hpp"
#include "chemix/rng.hpp"

using namespace chemix;

namespace {

const Tensor* bind(const Tensor& t) { return &t; }

}  // namespace

TEST_CASE("matmul forward matches hand arithmetic") {
  ComputeGraph g;
  NodeRef a = g.input("a", {2, 2});
  NodeRef b = g.input("b", {2, 1});
  NodeRef y = matmul(a, b);
  const Tensor ta({2, 2}, {1, 2, 3, 4});
  const Tensor tb({2, 1}, {1, 1});
  g.forward({}, {{"a", bind(ta)}, {"b", bind(tb)}});
  CHECK(g.value(y)[0] == doctest::Approx(3.0));
  CHECK(g.value(y)[1] == doctest::Approx(7.0));
}

TEST_CASE("relu forward") {
  ComputeGraph g;
  NodeRef x = g.input("x", {3});
  NodeRef y = relu(x);
  const Tensor tx({3}, {-1, 0, 2});
  g.forward({}, {{"x", bind(tx)}});
  CHECK(g.value(y)[0] == 0.0);
  CHECK(g.value(y)[1] == 0.0);
  CHECK(g.value(y)[2] == 2.0);
}

TEST_CASE("concat along the last axis adds widths") {
  ComputeGraph g;
  NodeRef a = g.input("a", {5, 64});
  NodeRef b = g.input("b", {5, 32});
  NodeRef y = concat_last(a, b);
  CHECK(g.node(y.id).shape == Shape{5, 96});
  const Tensor ta({5, 64});
  const Tensor tb = Tensor::full({5, 32}, 2.0);
  g.forward({}, {{"a", bind(ta)}, {"b", bind(tb)}});
  CHECK(g.value(y).shape() == Shape{5, 96});
  CHECK(g.value(y)[63] == 0.0);
  CHECK(g.value(y)[64] == 2.0);
}

TEST_CASE("gradient of mean(x*x) is 2x/n") {
  ComputeGraph g;
  NodeRef x = g.parameter("x", {3});
  NodeRef loss = reduce_mean(x * x);
  ParamMap params;
  params["x"] = Tensor({3}, {1, 2, 3});
  g.forward(params, {});
  g.backward(loss);
  const Tensor grad = g.parameter_gradients().at("x");
  CHECK(grad[0] == doctest::Approx(2.0 / 3.0));
  CHECK(grad[1] == doctest::Approx(4.0 / 3.0));
  CHECK(grad[2] == doctest::Approx(2.0));
}

TEST_CASE("parameter disconnected from the loss gets a zero gradient") {
  ComputeGraph g;
  NodeRef x = g.parameter("x", {2});
  g.parameter("unused", {4});
  NodeRef loss = reduce_sum(x);
  ParamMap params;
  params["x"] = Tensor({2}, {1, 2});
  params["unused"] = Tensor::full({4}, 5.0);
  g.forward(params, {});
  g.backward(loss);
  const Tensor grad = g.parameter_gradients().at("unused");
  CHECK(grad.shape() == Shape{4});
  for (Index i = 0; i < 4; ++i) CHECK(grad[i] == 0.0);
  CHECK(g.parameter_gradient("unused") == nullptr);
}

TEST_CASE("finite differences are exact for a linear model") {
  ComputeGraph g;
  NodeRef x = g.input("x", {1, 3});
  NodeRef w = g.parameter("w", {3, 1});
  NodeRef loss = reduce_mean(matmul(x, w));
  ParamMap params;
  params["w"] = Tensor({3, 1}, {0.3, -0.7, 1.9});
  const Tensor tx({1, 3}, {1.0, 2.0, -0.5});
  const auto report = finite_difference_check(g, loss, params, {{"x", bind(tx)}}, 1e-5);
  CHECK(report.checked == 3);
  CHECK(report.excluded == 0);
  CHECK(report.max_rel_error < 1e-9);
}

TEST_CASE("finite differences on a sigmoid chain at zero weights") {
  ComputeGraph g;
  NodeRef x = g.input("x", {1, 2});
  NodeRef w = g.parameter("w", {2, 1});
  NodeRef loss = reduce_mean(sigmoid(matmul(x, w)));
  ParamMap params;
  params["w"] = Tensor({2, 1});
  const Tensor tx({1, 2}, {0.8, -1.1});
  const auto report = finite_difference_check(g, loss, params, {{"x", bind(tx)}}, 1e-5);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("random two-layer network passes the gradient check") {
  ComputeGraph g;
  NodeRef x = g.input("x", {4, 5});
  NodeRef t = g.input("t", {4, 1});
  NodeRef w1 = g.parameter("w1", {5, 4});
  NodeRef b1 = g.parameter("b1", {4});
  NodeRef w2 = g.parameter("w2", {4, 1});
  NodeRef h = relu(add_bias(matmul(x, w1), b1));
  NodeRef diff = matmul(h, w2) - t;
  NodeRef loss = reduce_mean(diff * diff);

  SplitMix64 rng(7);
  auto rand_tensor = [&](Shape s) {
    Tensor out(std::move(s));
    for (Index i = 0; i < out.size(); ++i) out[i] = rng.next_double(-1.0, 1.0);
    return out;
  };
  ParamMap params;
  params["w1"] = rand_tensor({5, 4});
  params["b1"] = rand_tensor({4});
  params["w2"] = rand_tensor({4, 1});
  const Tensor tx = rand_tensor({4, 5});
  const Tensor tt = rand_tensor({4, 1});
  const auto report =
      finite_difference_check(g, loss, params, {{"x", bind(tx)}, {"t", bind(tt)}}, 1e-5);
  CHECK(report.checked > 0);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("relu coordinate exactly at zero is flagged non-comparable") {
  ComputeGraph g;
  NodeRef w = g.parameter("w", {1});
  NodeRef loss = reduce_mean(relu(w));
  ParamMap params;
  params["w"] = Tensor({1});  // exactly at the kink
  const auto report = finite_difference_check(g, loss, params, {}, 1e-5);
  CHECK(report.excluded == 1);
  CHECK(report.checked == 0);
}

TEST_CASE("backward of a sum of losses equals the sum of backwards") {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor tw({2, 2});
    Tensor tx({2, 2});
    for (Index i = 0; i < 4; ++i) tw[i] = rng.next_double(-1, 1);
    for (Index i = 0; i < 4; ++i) tx[i] = rng.next_double(-1, 1);
    ParamMap params;
    params["w"] = tw;

    auto grad_of = [&](int which) {
      ComputeGraph g;
      NodeRef w = g.parameter("w", {2, 2});
      NodeRef x = g.input("x", {2, 2});
      NodeRef l1 = reduce_mean(sigmoid(matmul(x, w)));
      NodeRef l2 = reduce_sum(tanh(w) * tanh(w));
      NodeRef loss = which == 0 ? l1 : (which == 1 ? l2 : l1 + l2);
      g.forward(params, {{"x", bind(tx)}});
      g.backward(loss);
      return g.parameter_gradients().at("w");
    };
    const Tensor g0 = grad_of(0), g1 = grad_of(1), g2 = grad_of(2);
    for (Index i = 0; i < 4; ++i)
      CHECK(g2[i] == doctest::Approx(g0[i] + g1[i]).epsilon(1e-12));
  }
}

TEST_CASE("declared shapes equal evaluated shapes under randomized fuzzing") {
  SplitMix64 rng(12345);
  for (int trial = 0; trial < 60; ++trial) {
    const Index batch = 1 + static_cast<Index>(rng.next_below(5));
    const Index in = 1 + static_cast<Index>(rng.next_below(7));
    const Index mid = 1 + static_cast<Index>(rng.next_below(6));
    const Index len = 1 + static_cast<Index>(rng.next_below(9));

    ComputeGraph g;
    NodeRef x = g.input("x", {batch, in});
    NodeRef w = g.parameter("w", {in, mid});
    NodeRef b = g.parameter("b", {mid});
    NodeRef h = tanh(add_bias(matmul(x, w), b));
    NodeRef both = concat_last(h, h);
    NodeRef sl = slice_last(both, 0, 1 + static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(mid))));
    NodeRef seq = g.input("seq", {batch, len, mid});
    NodeRef ts = time_slice(seq, static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(len))));
    NodeRef flat = reshape(seq, {batch, len * mid});
    NodeRef loss = reduce_mean(sl) + reduce_sum(ts) + reduce_mean(flat);

    ParamMap params;
    params["w"] = Tensor::full({in, mid}, 0.25);
    params["b"] = Tensor({mid});
    Tensor tx = Tensor::full({batch, in}, 0.5);
    Tensor tseq = Tensor::full({batch, len, mid}, -0.75);
    g.forward(params, {{"x", bind(tx)}, {"seq", bind(tseq)}});
    for (const Node& node : g.nodes()) {
      if (node.kind == OpKind::Input || node.kind == OpKind::Parameter) continue;
      CHECK(g.value(NodeRef{&g, static_cast<int>(&node - g.nodes().data())}).shape() == node.shape);
    }
    g.forward(params, {{"x", bind(tx)}, {"seq", bind(tseq)}});
    g.backward(loss);
  }
}

TEST_CASE("same graph and bindings give bit-identical results") {
  ComputeGraph g;
  NodeRef x = g.input("x", {3, 4});
  NodeRef w = g.parameter("w", {4, 2});
  NodeRef y = sigmoid(matmul(exp(affine(x, 0.1, -0.05)), w));
  NodeRef loss = reduce_mean(y);
  ParamMap params;
  SplitMix64 rng(3);
  Tensor tw({4, 2});
  for (Index i = 0; i < tw.size(); ++i) tw[i] = rng.next_double(-1, 1);
  params["w"] = tw;
  Tensor tx({3, 4});
  for (Index i = 0; i < tx.size(); ++i) tx[i] = rng.next_double(-2, 2);

  g.forward(params, {{"x", bind(tx)}});
  Tensor first = g.value(y);
  Scalar l1 = g.value(loss)[0];
  g.forward(params, {{"x", bind(tx)}});
  const Tensor& second = g.value(y);
  CHECK(std::memcmp(first.data(), second.data(), sizeof(Scalar) * static_cast<std::size_t>(first.size())) == 0);
  CHECK(l1 == g.value(loss)[0]);
}

TEST_CASE("conv1d_same preserves the length axis and obeys hand kernels") {
  SUBCASE("delta kernel reproduces the input") {
    ComputeGraph g;
    NodeRef x = g.input("x", {1, 5, 1});
    NodeRef k = g.parameter("k", {3, 1, 1});
    NodeRef y = conv1d_same(x, k);
    ParamMap params;
    params["k"] = Tensor({3, 1, 1}, {0, 1, 0});
    Tensor tx({1, 5, 1}, {3, 1, 4, 1, 5});
    g.forward(params, {{"x", bind(tx)}});
    for (Index i = 0; i < 5; ++i) CHECK(g.value(y)[i] == doctest::Approx(tx[i]));
  }
  SUBCASE("zero kernels give zero output") {
    ComputeGraph g;
    NodeRef x = g.input("x", {2, 7, 3});
    NodeRef k = g.parameter("k", {3, 3, 4});
    NodeRef y = conv1d_same(x, k);
    ParamMap params;
    params["k"] = Tensor({3, 3, 4});
    Tensor tx = Tensor::full({2, 7, 3}, 1.5);
    g.forward(params, {{"x", bind(tx)}});
    for (Index i = 0; i < g.value(y).size(); ++i) CHECK(g.value(y)[i] == 0.0);
  }
  SUBCASE("length preserved for every input length") {
    for (Index len : {1, 2, 3, 5, 83}) {
      ComputeGraph g;
      NodeRef x = g.input("x", {1, len, 2});
      NodeRef k = g.parameter("k", {3, 2, 32});
      NodeRef y = conv1d_same(x, k);
      CHECK(g.node(y.id).shape == Shape{1, len, 32});
    }
  }
  SUBCASE("even kernel pads the extra zero on the right") {
    // K=2, pad_left=0: out[l] = x[l] w0 + x[l+1] w1, x[L] = 0
    ComputeGraph g;
    NodeRef x = g.input("x", {1, 3, 1});
    NodeRef k = g.parameter("k", {2, 1, 1});
    NodeRef y = conv1d_same(x, k);
    ParamMap params;
    params["k"] = Tensor({2, 1, 1}, {1, 10});
    Tensor tx({1, 3, 1}, {1, 2, 3});
    g.forward(params, {{"x", bind(tx)}});
    CHECK(g.value(y)[0] == doctest::Approx(21.0));
    CHECK(g.value(y)[1] == doctest::Approx(32.0));
    CHECK(g.value(y)[2] == doctest::Approx(3.0));
  }
}

TEST_CASE("embedding gathers rows, keeps index 0 at zero, and scatters gradients") {
  ComputeGraph g;
  NodeRef idx = g.input("idx", {2, 3});
  NodeRef table = g.parameter("table", {4, 2});
  NodeRef e = embedding(idx, table);
  NodeRef loss = reduce_sum(e);
  ParamMap params;
  params["table"] = Tensor({4, 2}, {0, 0, 10, 11, 20, 21, 30, 31});
  Tensor tidx({2, 3}, {1, 0, 3, 2, 2, 0});
  g.forward(params, {{"idx", bind(tidx)}});
  const Tensor& out = g.value(e);
  CHECK(out.shape() == Shape{2, 3, 2});
  CHECK(out[0] == 10.0);  // row 1
  CHECK(out[2] == 0.0);   // pad row
  CHECK(out[4] == 30.0);  // row 3
  g.backward(loss);
  const Tensor grad = g.parameter_gradients().at("table");
  CHECK(grad[0] == 0.0);  // pad row receives no gradient
  CHECK(grad[1] == 0.0);
  CHECK(grad[2] == 1.0);           // row 1 used once
  CHECK(grad[4] == doctest::Approx(2.0));  // row 2 used twice
  CHECK(grad[6] == 1.0);           // row 3 used once

  SUBCASE("out-of-range index throws") {
    Tensor bad({2, 3}, {1, 0, 4, 0, 0, 0});
    CHECK_THROWS_AS(g.forward(params, {{"idx", bind(bad)}}), IndexOutOfRange);
    Tensor frac({2, 3}, {1, 0, 2.5, 0, 0, 0});
    CHECK_THROWS_AS(g.forward(params, {{"idx", bind(frac)}}), IndexOutOfRange);
  }
}

TEST_CASE("graph error paths") {
  ComputeGraph g;
  NodeRef a = g.input("a", {2, 3});
  NodeRef b = g.input("b", {3, 3});
  CHECK_THROWS_AS(a + b, ShapeMismatch);
  CHECK_THROWS_AS(matmul(a, a), ShapeMismatch);
  CHECK_THROWS_AS(g.value(a), ForwardNotRun);

  Tensor ta({2, 3});
  CHECK_THROWS_AS(g.forward({}, {{"a", bind(ta)}}), UnboundInput);

  NodeRef y = matmul(a, b);
  Tensor tb({3, 3});
  g.forward({}, {{"a", bind(ta)}, {"b", bind(tb)}});
  CHECK_THROWS_AS(g.backward(y), NotScalarLoss);

  SUBCASE("non-finite values are reported with the node name") {
    ComputeGraph h;
    NodeRef x = h.input("x", {1});
    NodeRef bad = log(x);
    (void)bad;
    Tensor tx({1}, {-1.0});
    CHECK_THROWS_AS(h.forward({}, {{"x", bind(tx)}}), NonFiniteValue);
  }
}

TEST_CASE("exp and log gradients agree with finite differences") {
  ComputeGraph g;
  NodeRef w = g.parameter("w", {3});
  NodeRef loss = reduce_mean(log(exp(w) + exp(affine(w, -1.0, 0.5))));
  ParamMap params;
  params["w"] = Tensor({3}, {0.2, 1.1, -0.4});
  const auto report = finite_difference_check(g, loss, params, {}, 1e-5);
  CHECK(report.checked == 3);
  CHECK(report.max_rel_error < 1e-7);
}
