#include <gtest/gtest.h>

#include <cmath>

#include "endgen/autodiff.hpp"
#include "endgen/errors.hpp"
#include "endgen/random.hpp"
#include "test_support.hpp"

using namespace endgen;
using namespace endgen::ad;
using endgen::testing::check_gradients;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -2, double hi = 2) {
  Tensor t(std::move(shape));
  for (Real& x : t.values()) x = static_cast<Real>(rng.uniform(lo, hi));
  return t;
}

}  // namespace

TEST(Matmul, IdentityLeavesVector) {
  Graph g;
  Var eye = g.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  Var x = g.constant(Tensor::vector({3.5, -1.25}));
  EXPECT_EQ(matmul(eye, x).value(), Tensor::vector({3.5, -1.25}));
}

TEST(Matmul, HandProduct) {
  Graph g;
  Var a = g.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Var b = g.constant(Tensor::matrix(2, 1, {1, 1}));
  EXPECT_EQ(matmul(a, b).value(), Tensor::matrix(2, 1, {3, 7}));
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  Graph g;
  Var a = g.constant(Tensor({2, 3}));
  Var b = g.constant(Tensor({2, 2}));
  try {
    matmul(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("[2x2]"), std::string::npos);
  }
}

TEST(Matmul, GradientOfSumMatchesFiniteDifferences) {
  Rng rng(1);
  ParamStore s;
  auto A = s.add("A", random_tensor({3, 4}, rng));
  auto B = s.add("B", random_tensor({4, 2}, rng));
  auto r = check_gradients(s, [&](Graph& g) { return sum(matmul(g.param(A), g.param(B))); }, 20, 3);
  EXPECT_EQ(r.checked, 20u);
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(Elementwise, Examples) {
  Graph g;
  EXPECT_DOUBLE_EQ(sigmoid(g.constant(Tensor::scalar(0))).item(), 0.5);
  Var m = minimum(g.constant(Tensor::vector({0.3, 0.7})), g.constant(Tensor::vector({0.5, 0.2})));
  EXPECT_EQ(m.value(), Tensor::vector({0.3, 0.2}));
}

TEST(Elementwise, TanhGradientAtPointThree) {
  ParamStore s;
  auto x = s.add("x", Tensor::scalar(0.3));
  auto r = check_gradients(s, [&](Graph& g) { return tanh(g.param(x)); }, 1, 1);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(Elementwise, MinTiesRouteToFirstInput) {
  ParamStore s;
  auto a = s.add("a", Tensor::vector({1, 2}));
  auto b = s.add("b", Tensor::vector({1, 3}));
  GradStore grads(s);
  Graph g(&s);
  g.backward(sum(minimum(g.param(a), g.param(b))), grads);
  EXPECT_EQ(grads[a], Tensor::vector({1, 1}));
  EXPECT_EQ(grads[b], Tensor::vector({0, 0}));
}

TEST(Elementwise, LogClampsAtFloor) {
  Graph g;
  EXPECT_NEAR(log(g.constant(Tensor::scalar(0))).item(), std::log(1e-12), 1e-9);
  EXPECT_NEAR(log(g.constant(Tensor::scalar(-3))).item(), std::log(1e-12), 1e-9);
}

TEST(Elementwise, ScalarBroadcast) {
  Graph g;
  Var v = mul(g.constant(Tensor::vector({1, 2, 3})), g.constant(Tensor::scalar(2)));
  EXPECT_EQ(v.value(), Tensor::vector({2, 4, 6}));
  EXPECT_THROW(add(g.constant(Tensor::vector({1, 2})), g.constant(Tensor::vector({1, 2, 3}))), ShapeError);
}

// Central differences agree with backward for every differentiable op over
// 100+ random trials with inputs in [-2, 2].
TEST(Elementwise, PropertyFiniteDifferences) {
  const Elementwise unary[] = {Elementwise::kSigmoid, Elementwise::kTanh, Elementwise::kLog, Elementwise::kExp,
                               Elementwise::kSqrt};
  const Elementwise binary[] = {Elementwise::kAdd, Elementwise::kSub, Elementwise::kMul, Elementwise::kDiv,
                                Elementwise::kMin};
  Rng rng(11);
  int trials = 0;
  for (int trial = 0; trial < 12; ++trial) {
    for (auto op : unary) {
      ParamStore s;
      const bool positive = op == Elementwise::kLog || op == Elementwise::kSqrt;
      auto x = s.add("x", random_tensor({5}, rng, positive ? 0.1 : -2, 2));
      auto r = check_gradients(s, [&](Graph& g) { return sum(elementwise(op, g.param(x))); }, 5, trial);
      EXPECT_LT(r.max_rel_error, 1e-4) << int(op);
      ++trials;
    }
    for (auto op : binary) {
      ParamStore s;
      auto a = s.add("a", random_tensor({5}, rng));
      Tensor bt = random_tensor({5}, rng);
      if (op == Elementwise::kDiv) {
        for (Real& v : bt.values()) v = v >= 0 ? v + 0.5 : v - 0.5;
      }
      auto b = s.add("b", bt);
      // Weighted sum so that each output has a distinct upstream gradient.
      const Tensor w = random_tensor({5}, rng);
      auto r = check_gradients(
          s, [&](Graph& g) { return dot(elementwise(op, g.param(a), g.param(b)), g.constant(w)); }, 10, trial);
      EXPECT_LT(r.max_rel_error, 1e-4) << int(op);
      ++trials;
    }
  }
  EXPECT_GE(trials, 100);
}

TEST(Softmax, Examples) {
  Graph g;
  Var u = softmax(g.constant(Tensor::vector({0.7, 0.7, 0.7})));
  for (Real p : u.value().values()) EXPECT_NEAR(p, 1.0 / 3, 1e-12);
  Var h = softmax(g.constant(Tensor::vector({std::log(2.0), 0})));
  EXPECT_NEAR(h.value()[0], 2.0 / 3, 1e-12);
  EXPECT_NEAR(h.value()[1], 1.0 / 3, 1e-12);
  const std::uint8_t mask[] = {1, 0};
  Var m = softmax(g.constant(Tensor::vector({5, 5})), mask);
  EXPECT_EQ(m.value()[0], 1.0);
  EXPECT_EQ(m.value()[1], 0.0);
}

TEST(Softmax, AllMaskedIsAnError) {
  Graph g;
  const std::uint8_t mask[] = {0, 0};
  EXPECT_THROW(softmax(g.constant(Tensor::vector({1, 2})), mask), ContractError);
}

TEST(Softmax, SimplexAndStability) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g;
    Tensor x = random_tensor({7}, rng, -500, 500);
    std::vector<std::uint8_t> mask(7, 1);
    mask[static_cast<std::size_t>(trial % 7)] = 0;
    Var p = softmax(g.constant(x), mask);
    double total = 0;
    for (std::size_t i = 0; i < 7; ++i) {
      ASSERT_GE(p.value()[i], 0);
      ASSERT_TRUE(std::isfinite(p.value()[i]));
      if (!mask[i]) {
        ASSERT_EQ(p.value()[i], 0);
      }
      total += p.value()[i];
    }
    EXPECT_NEAR(total, 1, 1e-9);
  }
}

TEST(Softmax, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  ParamStore s;
  auto x = s.add("x", random_tensor({6}, rng));
  const Tensor w = random_tensor({6}, rng);
  const std::uint8_t mask[] = {1, 1, 0, 1, 1, 1};
  auto r = check_gradients(s, [&](Graph& g) { return dot(softmax(g.param(x), mask), g.constant(w)); }, 5, 1);
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
  EXPECT_LT(r.max_zero_abs, 1e-9);
}

TEST(Gather, RowsAndAccumulation) {
  ParamStore s;
  auto t = s.add("T", Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  Graph g(&s);
  const int first[] = {0};
  EXPECT_EQ(gather(g.param(t), first).value(), Tensor::matrix(1, 2, {1, 2}));

  const int twice[] = {2, 2};
  Var rows = gather(g.param(t), twice);
  Var up = g.constant(Tensor::matrix(2, 2, {1, 10, 100, 1000}));
  GradStore grads(s);
  g.backward(sum(mul(rows, up)), grads);
  EXPECT_EQ(grads[t], Tensor::matrix(3, 2, {0, 0, 0, 0, 101, 1010}));
}

TEST(Gather, OutOfRangeNamesId) {
  Graph g;
  const int bad[] = {3};
  try {
    gather(g.constant(Tensor({3, 2})), bad);
    FAIL();
  } catch (const IndexError& e) {
    EXPECT_NE(std::string(e.what()).find('3'), std::string::npos);
  }
}

TEST(Gather, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  ParamStore s;
  auto t = s.add("T", random_tensor({3, 2}, rng));
  const Tensor w = random_tensor({4, 2}, rng);
  const int ids[] = {1, 0, 1, 2};
  auto r = check_gradients(s, [&](Graph& g) { return sum(mul(gather(g.param(t), ids), g.constant(w))); }, 6, 1);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(ScatterAdd, Examples) {
  Graph g;
  const int idx[] = {0, 1, 0};
  Var out = scatter_add(g.constant(Tensor({2})), idx, g.constant(Tensor::vector({0.2, 0.3, 0.5})));
  EXPECT_NEAR(out.value()[0], 0.7, 1e-15);
  EXPECT_NEAR(out.value()[1], 0.3, 1e-15);
  Var same = scatter_add(g.constant(Tensor::vector({1, 2})), std::span<const int>(), g.constant(Tensor::scalar(0)));
  EXPECT_EQ(same.value(), Tensor::vector({1, 2}));
  const int bad[] = {2};
  EXPECT_THROW(scatter_add(g.constant(Tensor({2})), bad, g.constant(Tensor::scalar(1))), IndexError);
}

TEST(ScatterAdd, ConservesMassAndMatchesFiniteDifferences) {
  Rng rng(6);
  ParamStore s;
  auto base = s.add("base", random_tensor({4}, rng));
  auto vals = s.add("vals", random_tensor({6}, rng));
  const int idx[] = {3, 0, 3, 1, 3, 0};
  {
    Graph g(&s);
    Var out = scatter_add(g.param(base), idx, g.param(vals));
    double in_total = 0, out_total = 0;
    for (Real v : s.value(base).values()) in_total += v;
    for (Real v : s.value(vals).values()) in_total += v;
    for (Real v : out.value().values()) out_total += v;
    EXPECT_NEAR(in_total, out_total, 1e-9);
  }
  const Tensor w = random_tensor({4}, rng);
  auto r = check_gradients(s, [&](Graph& g) { return dot(scatter_add(g.param(base), idx, g.param(vals)), g.constant(w)); },
                           10, 1);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(Reduce, Examples) {
  Graph g;
  EXPECT_EQ(sum(g.constant(Tensor::vector({1, 2, 3}))).item(), 6);
  EXPECT_EQ(mean(g.constant(Tensor::scalar(4.5))).item(), 4.5);
  EXPECT_EQ(max(g.constant(Tensor::vector({1, 5, 5}))).item(), 5);
  EXPECT_THROW(reduce(Reduction::kSum, g.constant(Tensor::vector({1, 2})), 1), ShapeError);
  Var rows = reduce(Reduction::kSum, g.constant(Tensor::matrix(2, 2, {1, 2, 3, 4})), 0);
  EXPECT_EQ(rows.value(), Tensor::vector({4, 6}));
}

TEST(Reduce, MeanGradientIsOneOverN) {
  ParamStore s;
  auto x = s.add("x", Tensor::vector({1, -2, 3, 0.5}));
  GradStore grads(s);
  Graph g(&s);
  g.backward(mean(g.param(x)), grads);
  for (Real v : grads[x].values()) EXPECT_DOUBLE_EQ(v, 0.25);
  auto r = check_gradients(s, [&](Graph& gg) { return mean(gg.param(x)); }, 4, 1);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(Reduce, MaxRoutesToFirstArgmax) {
  ParamStore s;
  auto x = s.add("x", Tensor::vector({1, 5, 5}));
  GradStore grads(s);
  Graph g(&s);
  g.backward(max(g.param(x)), grads);
  EXPECT_EQ(grads[x], Tensor::vector({0, 1, 0}));
}

TEST(Backward, SumOfSquares) {
  ParamStore s;
  auto w = s.add("w", Tensor::vector({1, 2}));
  GradStore grads(s);
  Graph g(&s);
  Var v = g.param(w);
  g.backward(sum(mul(v, v)), grads);
  EXPECT_EQ(grads[w], Tensor::vector({2, 4}));
}

TEST(Backward, IndependentLossGivesZeroGradient) {
  ParamStore s;
  auto w = s.add("w", Tensor::vector({1, 2}));
  auto u = s.add("u", Tensor::vector({3, 4}));
  GradStore grads(s);
  Graph g(&s);
  g.param(w);
  g.backward(sum(g.param(u)), grads);
  EXPECT_EQ(grads[w], Tensor::vector({0, 0}));
}

TEST(Backward, NonScalarAndRepeatedCallsAreRejected) {
  ParamStore s;
  auto w = s.add("w", Tensor::vector({1, 2}));
  GradStore grads(s);
  Graph g(&s);
  EXPECT_THROW(g.backward(g.param(w), grads), ContractError);
  Graph h(&s);
  Var l = sum(h.param(w));
  h.backward(l, grads);
  EXPECT_THROW(h.backward(l, grads), ContractError);
}

TEST(Backward, AccumulatesAcrossGraphsUntilZeroed) {
  ParamStore s;
  auto w = s.add("w", Tensor::vector({1, 2}));
  GradStore grads(s);
  for (int i = 0; i < 2; ++i) {
    Graph g(&s);
    g.backward(sum(g.param(w)), grads);
  }
  EXPECT_EQ(grads[w], Tensor::vector({2, 2}));
  grads.zero();
  EXPECT_EQ(grads[w], Tensor::vector({0, 0}));
}

// A node consumed twice must receive both contributions: compare against the
// same expression built from two separate copies of the subgraph.
TEST(Backward, SharedNodeMatchesDuplicatedSubgraph) {
  Rng rng(8);
  ParamStore s;
  auto x = s.add("x", random_tensor({3}, rng));
  GradStore shared(s), duplicated(s);
  {
    Graph g(&s);
    Var t = tanh(g.param(x));
    g.backward(sum(mul(t, t)), shared);
  }
  {
    Graph g(&s);
    Var a = tanh(g.param(x));
    Var b = tanh(scale(g.param(x), 1));
    g.backward(sum(mul(a, b)), duplicated);
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(shared[x][i], duplicated[x][i], 1e-15);
}

TEST(Structure, ConcatSliceStackReshape) {
  Rng rng(10);
  ParamStore s;
  auto a = s.add("a", random_tensor({3}, rng));
  auto b = s.add("b", random_tensor({3}, rng));
  const Tensor w = random_tensor({2, 3}, rng);
  auto r = check_gradients(
      s,
      [&](Graph& g) {
        Var c = concat({g.param(a), g.param(b)});
        Var rows = stack(std::vector<Var>{slice(c, 1, 3), slice(c, 3, 3)});
        Var flat = reshape(mul(rows, g.constant(w)), {6});
        return sum(mul(flat, reshape(broadcast_rows(g.param(a), 2), {6})));
      },
      6, 2);
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(Structure, DetachBlocksGradient) {
  ParamStore s;
  auto x = s.add("x", Tensor::vector({1, 2}));
  GradStore grads(s);
  Graph g(&s);
  Var v = g.param(x);
  g.backward(sum(mul(v, detach(v))), grads);
  EXPECT_EQ(grads[x], Tensor::vector({1, 2}));
}

TEST(Graph, NonRecordingGraphKeepsValuesOnly) {
  ParamStore s;
  auto x = s.add("x", Tensor::vector({1, 2}));
  Graph g(&s, false);
  Var y = sum(g.param(x));
  EXPECT_EQ(y.item(), 3);
  EXPECT_FALSE(g.requires_grad(y));
}

TEST(Graph, VarsFromAnotherGraphAreRejected) {
  Graph a, b;
  Var x = a.constant(Tensor::scalar(1));
  Var y = b.constant(Tensor::scalar(1));
  EXPECT_THROW(add(x, y), ContractError);
}
