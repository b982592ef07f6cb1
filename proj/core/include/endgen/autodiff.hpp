#pragma once

// Define-by-run reverse-mode automatic differentiation over dense tensors.
//
// A Graph is a tape: nodes are appended in evaluation order, so creation order
// is a topological order and backward() walks it in reverse. Parameters live
// outside any graph in a ParamStore; a graph references them through leaf
// nodes and writes their gradients into a caller-owned GradStore.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "endgen/tensor.hpp"

namespace endgen::ad {

/// Named learnable tensors. Ids are dense and stable in insertion order.
class ParamStore {
 public:
  using Id = std::size_t;

  Id add(std::string name, Tensor init);

  std::size_t size() const noexcept { return values_.size(); }
  const std::string& name(Id id) const { return names_.at(id); }
  Tensor& value(Id id) { return values_.at(id); }
  const Tensor& value(Id id) const { return values_.at(id); }
  std::optional<Id> find(std::string_view name) const;
  std::size_t scalar_count() const;

  bool operator==(const ParamStore& other) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

/// Gradient buffers shaped like a ParamStore. backward() accumulates into it;
/// zero() is the explicit reset between steps.
class GradStore {
 public:
  GradStore() = default;
  explicit GradStore(const ParamStore& params);

  void zero();
  std::size_t size() const noexcept { return grads_.size(); }
  Tensor& operator[](ParamStore::Id id) { return grads_.at(id); }
  const Tensor& operator[](ParamStore::Id id) const { return grads_.at(id); }

  Real global_norm() const;
  void scale(Real factor);
  void add(const GradStore& other);

 private:
  std::vector<Tensor> grads_;
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  Real item() const { return value().item(); }
  Graph& graph() const;
  std::uint32_t id() const noexcept { return id_; }
  explicit operator bool() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::uint32_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

enum class Elementwise { kAdd, kSub, kMul, kDiv, kMin, kSigmoid, kTanh, kLog, kExp, kSqrt };
enum class Reduction { kSum, kMean, kMax };

/// Inputs to log are clamped below at this value.
inline constexpr Real kLogFloor = Real(1e-12);

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  /// `params` may be null for graphs without parameters. With `record` false no
  /// backward closures are kept (inference only).
  explicit Graph(const ParamStore* params = nullptr, bool record = true);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a stored parameter; repeated calls return the same node.
  Var param(ParamStore::Id id);

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const ParamStore* params() const noexcept { return params_; }

  /// Accumulates dLoss/dParam into `grads` for every reachable parameter.
  /// Allowed once per graph.
  void backward(Var loss, GradStore& grads);

  // Op-implementation interface.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);
  bool requires_grad(Var v) const { return nodes_.at(v.id_).requires_grad; }
  /// Gradient buffer of `v`; only valid inside backward.
  Tensor& grad(Var v);
  const Tensor& value(std::uint32_t id) const;
  void check_owner(Var v) const;

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    std::int64_t param_id = -1;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::vector<std::int64_t> param_nodes_;
  const ParamStore* params_;
  bool record_;
  bool backward_done_ = false;
  GradStore* sink_ = nullptr;
};

// Matrix product. 1-D operands are treated as a row (left) or column (right)
// vector and the corresponding output dimension is dropped.
Var matmul(Var a, Var b);

Var elementwise(Elementwise op, Var a);
Var elementwise(Elementwise op, Var a, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
/// Elementwise minimum; the gradient goes to `a` on ties.
Var minimum(Var a, Var b);
Var sigmoid(Var x);
Var tanh(Var x);
/// Natural log of max(x, kLogFloor).
Var log(Var x);
Var exp(Var x);
Var sqrt(Var x);
Var scale(Var x, Real factor);

/// Masked softmax over a 1-D input. Masked positions (mask[i] == 0) get
/// exactly 0. An empty mask means all positions are active.
Var softmax(Var x, std::span<const std::uint8_t> mask = {});

/// Rows of a 2-D table ([n x d] result) or entries of a 1-D table ([n]).
Var gather(Var table, std::span<const int> ids);
/// out[i] = base[i] + sum of values[j] with indices[j] == i.
Var scatter_add(Var base, std::span<const int> indices, Var values);

/// Full reduction to shape {1}, or along `axis`.
Var reduce(Reduction op, Var x, std::optional<std::size_t> axis = std::nullopt);
Var sum(Var x);
Var mean(Var x);
Var max(Var x);
Var dot(Var a, Var b);

Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
/// Stacks equal-length 1-D vectors into a [n x d] matrix.
Var stack(std::span<const Var> rows);
Var slice(Var x, std::size_t offset, std::size_t length);
Var reshape(Var x, Shape shape);
/// Repeats a 1-D vector [d] into [rows x d].
Var broadcast_rows(Var x, std::size_t rows);
/// Same value, no gradient flow.
Var detach(Var x);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace endgen::ad
