#include "endgen/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "endgen/errors.hpp"

namespace endgen::ad {

// ---------------------------------------------------------------------------
// ParamStore / GradStore

ParamStore::Id ParamStore::add(std::string name, Tensor init) {
  if (find(name)) throw ContractError("duplicate parameter name '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return values_.size() - 1;
}

std::optional<ParamStore::Id> ParamStore::find(std::string_view name) const {
  for (Id i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

GradStore::GradStore(const ParamStore& params) {
  grads_.reserve(params.size());
  for (ParamStore::Id i = 0; i < params.size(); ++i) grads_.emplace_back(params.value(i).shape());
}

void GradStore::zero() {
  for (auto& g : grads_) g.fill(0);
}

Real GradStore::global_norm() const {
  double acc = 0;
  for (const auto& g : grads_) {
    for (Real x : g.values()) acc += double(x) * double(x);
  }
  return Real(std::sqrt(acc));
}

void GradStore::scale(Real factor) {
  for (auto& g : grads_) {
    for (Real& x : g.values()) x *= factor;
  }
}

void GradStore::add(const GradStore& other) {
  if (other.size() != size()) throw ShapeError("gradient stores have different layouts");
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    auto dst = grads_[i].values();
    auto src = other.grads_[i].values();
    if (dst.size() != src.size()) throw ShapeError("gradient stores have different layouts");
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

// ---------------------------------------------------------------------------
// Var / Graph

const Tensor& Var::value() const {
  if (!graph_) throw ContractError("use of an unbound Var");
  return graph_->value(id_);
}

Graph& Var::graph() const {
  if (!graph_) throw ContractError("use of an unbound Var");
  return *graph_;
}

Graph::Graph(const ParamStore* params, bool record) : params_(params), record_(record) {
  if (params_) param_nodes_.assign(params_->size(), -1);
}

const Tensor& Graph::value(std::uint32_t id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.value;
}

void Graph::check_owner(Var v) const {
  if (v.graph_ != this) throw ContractError("Var belongs to a different graph");
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::param(ParamStore::Id id) {
  if (!params_) throw ContractError("graph has no parameter store");
  if (id >= params_->size()) throw IndexError("parameter id " + std::to_string(id) + " out of range");
  if (param_nodes_[id] >= 0) return Var(this, static_cast<std::uint32_t>(param_nodes_[id]));
  Node n;
  n.external = &params_->value(id);
  n.param_id = static_cast<std::int64_t>(id);
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  param_nodes_[id] = static_cast<std::int64_t>(nodes_.size() - 1);
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Graph::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  bool needs = false;
  for (Var in : inputs) {
    check_owner(in);
    needs = needs || nodes_[in.id_].requires_grad;
  }
  Node n;
  n.value = std::move(value);
  if (record_ && needs) {
    n.requires_grad = true;
    n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor& Graph::grad(Var v) {
  check_owner(v);
  Node& n = nodes_[v.id_];
  if (n.param_id >= 0) {
    if (!sink_) throw ContractError("parameter gradient requested outside backward");
    return (*sink_)[static_cast<ParamStore::Id>(n.param_id)];
  }
  if (n.grad.empty()) n.grad = Tensor(value(v.id_).shape());
  return n.grad;
}

void Graph::backward(Var loss, GradStore& grads) {
  check_owner(loss);
  if (backward_done_) throw ContractError("backward() called twice on the same graph");
  if (value(loss.id_).size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(value(loss.id_).shape()));
  }
  if (params_ && grads.size() != params_->size()) throw ShapeError("gradient store does not match parameters");
  backward_done_ = true;
  if (!nodes_[loss.id_].requires_grad) return;

  sink_ = &grads;
  grad(loss)[0] += Real(1);
  for (std::int64_t i = loss.id_; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
  sink_ = nullptr;
}

// ---------------------------------------------------------------------------
// Ops

namespace {

Graph& owner(Var a, Var b) {
  Graph& g = a.graph();
  g.check_owner(b);
  return g;
}

struct MatDims {
  std::size_t rows, inner, cols;
};

MatDims matmul_dims(const Shape& a, const Shape& b) {
  if (a.size() > 2 || b.size() > 2) {
    throw ShapeError("matmul supports rank 1 or 2, got " + shape_string(a) + " and " + shape_string(b));
  }
  const std::size_t m = a.size() == 2 ? a[0] : 1;
  const std::size_t ka = a.size() == 2 ? a[1] : a[0];
  const std::size_t kb = b[0];
  const std::size_t n = b.size() == 2 ? b[1] : 1;
  if (ka != kb) throw ShapeError("matmul dimension mismatch: " + shape_string(a) + " x " + shape_string(b));
  return {m, ka, n};
}

Shape broadcast_shape(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return a.shape();
  if (b.size() == 1) return a.shape();
  if (a.size() == 1) return b.shape();
  throw ShapeError("elementwise shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

bool is_unary(Elementwise op) {
  switch (op) {
    case Elementwise::kSigmoid:
    case Elementwise::kTanh:
    case Elementwise::kLog:
    case Elementwise::kExp:
    case Elementwise::kSqrt:
      return true;
    default:
      return false;
  }
}

Real sigmoid_scalar(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

// Adds `g` (shape of the output) into `dst`, summing when dst was broadcast.
void accumulate_broadcast(Tensor& dst, const Tensor& g, Real sign) {
  if (dst.size() == g.size()) {
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += sign * g[i];
  } else {
    Real s = 0;
    for (Real x : g.values()) s += x;
    dst[0] += sign * s;
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = owner(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const auto [m, k, n] = matmul_dims(av.shape(), bv.shape());

  Shape out_shape;
  if (av.rank() == 2) out_shape.push_back(m);
  if (bv.rank() == 2) out_shape.push_back(n);
  if (out_shape.empty()) out_shape.push_back(1);

  Tensor out(out_shape);
  const Real* A = av.data();
  const Real* B = bv.data();
  Real* C = out.data();
  if (n == 1) {
    for (std::size_t i = 0; i < m; ++i) {
      Real acc = 0;
      const Real* row = A + i * k;
      for (std::size_t p = 0; p < k; ++p) acc += row[p] * B[p];
      C[i] = acc;
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      Real* crow = C + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const Real aip = A[i * k + p];
        if (aip == Real(0)) continue;
        const Real* brow = B + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  }

  return g.record(std::move(out), {a, b}, [a, b, m, k, n](Graph& gr, const Tensor& go) {
    const Real* G = go.data();
    if (gr.requires_grad(a)) {
      const Real* B = b.value().data();
      Real* GA = gr.grad(a).data();
      for (std::size_t i = 0; i < m; ++i) {
        const Real* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const Real* brow = B + p * n;
          Real acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          GA[i * k + p] += acc;
        }
      }
    }
    if (gr.requires_grad(b)) {
      const Real* A = a.value().data();
      Real* GB = gr.grad(b).data();
      for (std::size_t i = 0; i < m; ++i) {
        const Real* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const Real aip = A[i * k + p];
          Real* gbrow = GB + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

Var elementwise(Elementwise op, Var a) {
  if (!is_unary(op)) throw ContractError("binary elementwise op called with one operand");
  Graph& g = a.graph();
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real v = x[i];
    switch (op) {
      case Elementwise::kSigmoid: out[i] = sigmoid_scalar(v); break;
      case Elementwise::kTanh: out[i] = std::tanh(v); break;
      case Elementwise::kLog: out[i] = std::log(std::max(v, kLogFloor)); break;
      case Elementwise::kExp: out[i] = std::exp(v); break;
      case Elementwise::kSqrt: out[i] = std::sqrt(std::max(v, Real(0))); break;
      default: break;
    }
  }
  const std::uint32_t self = static_cast<std::uint32_t>(g.size());
  return g.record(std::move(out), {a}, [a, op, self](Graph& gr, const Tensor& go) {
    const Tensor& x = a.value();
    const Tensor& y = gr.value(self);
    Tensor& ga = gr.grad(a);
    for (std::size_t i = 0; i < go.size(); ++i) {
      const Real gi = go[i];
      switch (op) {
        case Elementwise::kSigmoid: ga[i] += gi * y[i] * (Real(1) - y[i]); break;
        case Elementwise::kTanh: ga[i] += gi * (Real(1) - y[i] * y[i]); break;
        case Elementwise::kLog:
          if (x[i] >= kLogFloor) ga[i] += gi / x[i];
          break;
        case Elementwise::kExp: ga[i] += gi * y[i]; break;
        case Elementwise::kSqrt:
          if (y[i] > Real(0)) ga[i] += gi * Real(0.5) / y[i];
          break;
        default: break;
      }
    }
  });
}

Var elementwise(Elementwise op, Var a, Var b) {
  if (is_unary(op)) throw ContractError("unary elementwise op called with two operands");
  Graph& g = owner(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(broadcast_shape(av, bv));
  const bool a_scalar = av.size() != out.size();
  const bool b_scalar = bv.size() != out.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Real x = av[a_scalar ? 0 : i];
    const Real y = bv[b_scalar ? 0 : i];
    switch (op) {
      case Elementwise::kAdd: out[i] = x + y; break;
      case Elementwise::kSub: out[i] = x - y; break;
      case Elementwise::kMul: out[i] = x * y; break;
      case Elementwise::kDiv: out[i] = x / y; break;
      case Elementwise::kMin: out[i] = x <= y ? x : y; break;
      default: break;
    }
  }
  return g.record(std::move(out), {a, b}, [a, b, op, a_scalar, b_scalar](Graph& gr, const Tensor& go) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const bool need_a = gr.requires_grad(a);
    const bool need_b = gr.requires_grad(b);
    switch (op) {
      case Elementwise::kAdd:
        if (need_a) accumulate_broadcast(gr.grad(a), go, 1);
        if (need_b) accumulate_broadcast(gr.grad(b), go, 1);
        return;
      case Elementwise::kSub:
        if (need_a) accumulate_broadcast(gr.grad(a), go, 1);
        if (need_b) accumulate_broadcast(gr.grad(b), go, -1);
        return;
      default: break;
    }
    Tensor* ga = need_a ? &gr.grad(a) : nullptr;
    Tensor* gb = need_b ? &gr.grad(b) : nullptr;
    for (std::size_t i = 0; i < go.size(); ++i) {
      const std::size_t ia = a_scalar ? 0 : i;
      const std::size_t ib = b_scalar ? 0 : i;
      const Real x = av[ia];
      const Real y = bv[ib];
      const Real gi = go[i];
      switch (op) {
        case Elementwise::kMul:
          if (ga) (*ga)[ia] += gi * y;
          if (gb) (*gb)[ib] += gi * x;
          break;
        case Elementwise::kDiv:
          if (ga) (*ga)[ia] += gi / y;
          if (gb) (*gb)[ib] -= gi * x / (y * y);
          break;
        case Elementwise::kMin:
          if (x <= y) {
            if (ga) (*ga)[ia] += gi;
          } else if (gb) {
            (*gb)[ib] += gi;
          }
          break;
        default: break;
      }
    }
  });
}

Var add(Var a, Var b) { return elementwise(Elementwise::kAdd, a, b); }
Var sub(Var a, Var b) { return elementwise(Elementwise::kSub, a, b); }
Var mul(Var a, Var b) { return elementwise(Elementwise::kMul, a, b); }
Var div(Var a, Var b) { return elementwise(Elementwise::kDiv, a, b); }
Var minimum(Var a, Var b) { return elementwise(Elementwise::kMin, a, b); }
Var sigmoid(Var x) { return elementwise(Elementwise::kSigmoid, x); }
Var tanh(Var x) { return elementwise(Elementwise::kTanh, x); }
Var log(Var x) { return elementwise(Elementwise::kLog, x); }
Var exp(Var x) { return elementwise(Elementwise::kExp, x); }
Var sqrt(Var x) { return elementwise(Elementwise::kSqrt, x); }

Var scale(Var x, Real factor) {
  Graph& g = x.graph();
  Tensor out = x.value();
  for (Real& v : out.values()) v *= factor;
  return g.record(std::move(out), {x}, [x, factor](Graph& gr, const Tensor& go) {
    Tensor& gx = gr.grad(x);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += factor * go[i];
  });
}

Var softmax(Var x, std::span<const std::uint8_t> mask) {
  Graph& g = x.graph();
  const Tensor& xv = x.value();
  if (xv.rank() != 1) throw ShapeError("softmax expects a 1-D input, got " + shape_string(xv.shape()));
  const std::size_t n = xv.size();
  if (!mask.empty() && mask.size() != n) {
    throw ShapeError("softmax mask has " + std::to_string(mask.size()) + " entries for " + std::to_string(n) +
                     " scores");
  }
  auto active = [&](std::size_t i) { return mask.empty() || mask[i] != 0; };

  Real hi = -std::numeric_limits<Real>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (active(i)) {
      hi = std::max(hi, xv[i]);
      any = true;
    }
  }
  if (!any) throw ContractError("softmax: every position is masked");

  Tensor out(xv.shape());
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!active(i)) continue;
    out[i] = std::exp(xv[i] - hi);
    total += out[i];
  }
  for (std::size_t i = 0; i < n; ++i) out[i] /= total;

  const std::uint32_t self = static_cast<std::uint32_t>(g.size());
  return g.record(std::move(out), {x}, [x, self](Graph& gr, const Tensor& go) {
    const Tensor& y = gr.value(self);
    Real inner = 0;
    for (std::size_t i = 0; i < y.size(); ++i) inner += go[i] * y[i];
    Tensor& gx = gr.grad(x);
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += y[i] * (go[i] - inner);
  });
}

Var gather(Var table, std::span<const int> ids) {
  Graph& g = table.graph();
  const Tensor& t = table.value();
  if (t.rank() > 2) throw ShapeError("gather expects a 1-D or 2-D table, got " + shape_string(t.shape()));
  if (ids.empty()) throw ShapeError("gather with no ids");
  const std::size_t rows = t.dim(0);
  const std::size_t width = t.rank() == 2 ? t.dim(1) : 1;
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= rows) {
      throw IndexError("gather id " + std::to_string(id) + " outside table of " + std::to_string(rows) + " rows");
    }
  }
  Shape out_shape = t.rank() == 2 ? Shape{ids.size(), width} : Shape{ids.size()};
  Tensor out(out_shape);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    std::copy_n(t.data() + static_cast<std::size_t>(ids[r]) * width, width, out.data() + r * width);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return g.record(std::move(out), {table}, [table, idx = std::move(idx), width](Graph& gr, const Tensor& go) {
    Tensor& gt = gr.grad(table);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      Real* dst = gt.data() + static_cast<std::size_t>(idx[r]) * width;
      const Real* src = go.data() + r * width;
      for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
    }
  });
}

Var scatter_add(Var base, std::span<const int> indices, Var values) {
  Graph& g = owner(base, values);
  const Tensor& b = base.value();
  const Tensor& v = values.value();
  if (b.rank() != 1) throw ShapeError("scatter_add expects a 1-D base, got " + shape_string(b.shape()));
  if (!indices.empty() && (v.rank() != 1 || v.size() != indices.size())) {
    throw ShapeError("scatter_add: " + std::to_string(indices.size()) + " indices but values of shape " +
                     shape_string(v.shape()));
  }
  for (int i : indices) {
    if (i < 0 || static_cast<std::size_t>(i) >= b.size()) {
      throw IndexError("scatter_add index " + std::to_string(i) + " outside base of size " +
                       std::to_string(b.size()));
    }
  }
  Tensor out = b;
  for (std::size_t j = 0; j < indices.size(); ++j) out[static_cast<std::size_t>(indices[j])] += v[j];
  std::vector<int> idx(indices.begin(), indices.end());
  return g.record(std::move(out), {base, values}, [base, values, idx = std::move(idx)](Graph& gr, const Tensor& go) {
    if (gr.requires_grad(base)) {
      Tensor& gb = gr.grad(base);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
    }
    if (gr.requires_grad(values) && !idx.empty()) {
      Tensor& gv = gr.grad(values);
      for (std::size_t j = 0; j < idx.size(); ++j) gv[j] += go[static_cast<std::size_t>(idx[j])];
    }
  });
}

Var reduce(Reduction op, Var x, std::optional<std::size_t> axis) {
  Graph& g = x.graph();
  const Tensor& xv = x.value();
  std::size_t outer = 1, len = xv.size(), inner = 1;
  Shape out_shape{1};
  if (axis) {
    if (*axis >= xv.rank()) {
      throw ShapeError("reduce axis " + std::to_string(*axis) + " invalid for shape " + shape_string(xv.shape()));
    }
    for (std::size_t d = 0; d < *axis; ++d) outer *= xv.dim(d);
    len = xv.dim(*axis);
    inner = 1;
    for (std::size_t d = *axis + 1; d < xv.rank(); ++d) inner *= xv.dim(d);
    out_shape.clear();
    for (std::size_t d = 0; d < xv.rank(); ++d) {
      if (d != *axis) out_shape.push_back(xv.dim(d));
    }
    if (out_shape.empty()) out_shape.push_back(1);
  }

  Tensor out(out_shape);
  std::vector<std::size_t> argmax(op == Reduction::kMax ? out.size() : 0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t slot = o * inner + in;
      const Real* base = xv.data() + o * len * inner + in;
      if (op == Reduction::kMax) {
        std::size_t best = 0;
        for (std::size_t l = 1; l < len; ++l) {
          if (base[l * inner] > base[best * inner]) best = l;
        }
        argmax[slot] = best;
        out[slot] = base[best * inner];
      } else {
        Real acc = 0;
        for (std::size_t l = 0; l < len; ++l) acc += base[l * inner];
        out[slot] = op == Reduction::kMean ? acc / Real(len) : acc;
      }
    }
  }

  return g.record(std::move(out), {x}, [x, op, outer, len, inner, argmax = std::move(argmax)](Graph& gr,
                                                                                                const Tensor& go) {
    Tensor& gx = gr.grad(x);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t slot = o * inner + in;
        Real* base = gx.data() + o * len * inner + in;
        if (op == Reduction::kMax) {
          base[argmax[slot] * inner] += go[slot];
        } else {
          const Real gv = op == Reduction::kMean ? go[slot] / Real(len) : go[slot];
          for (std::size_t l = 0; l < len; ++l) base[l * inner] += gv;
        }
      }
    }
  });
}

Var sum(Var x) { return reduce(Reduction::kSum, x); }
Var mean(Var x) { return reduce(Reduction::kMean, x); }
Var max(Var x) { return reduce(Reduction::kMax, x); }
Var dot(Var a, Var b) { return sum(mul(a, b)); }

Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Graph& g = parts[0].graph();
  std::size_t total = 0;
  for (Var p : parts) {
    g.check_owner(p);
    if (p.value().rank() != 1) throw ShapeError("concat expects 1-D parts, got " + shape_string(p.shape()));
    total += p.size();
  }
  Tensor out({total});
  std::size_t off = 0;
  for (Var p : parts) {
    std::copy_n(p.value().data(), p.size(), out.data() + off);
    off += p.size();
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return g.record(std::move(out), std::span<const Var>(ins), [ins](Graph& gr, const Tensor& go) {
    std::size_t off = 0;
    for (Var p : ins) {
      const std::size_t n = p.size();
      if (gr.requires_grad(p)) {
        Tensor& gp = gr.grad(p);
        for (std::size_t i = 0; i < n; ++i) gp[i] += go[off + i];
      }
      off += n;
    }
  });
}

Var stack(std::span<const Var> rows) {
  if (rows.empty()) throw ShapeError("stack of zero tensors");
  Graph& g = rows[0].graph();
  const std::size_t width = rows[0].size();
  for (Var r : rows) {
    g.check_owner(r);
    if (r.value().rank() != 1 || r.size() != width) {
      throw ShapeError("stack expects 1-D rows of length " + std::to_string(width) + ", got " +
                       shape_string(r.shape()));
    }
  }
  Tensor out({rows.size(), width});
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(rows[i].value().data(), width, out.data() + i * width);
  std::vector<Var> ins(rows.begin(), rows.end());
  return g.record(std::move(out), std::span<const Var>(ins), [ins, width](Graph& gr, const Tensor& go) {
    for (std::size_t i = 0; i < ins.size(); ++i) {
      if (!gr.requires_grad(ins[i])) continue;
      Tensor& gr_row = gr.grad(ins[i]);
      for (std::size_t c = 0; c < width; ++c) gr_row[c] += go[i * width + c];
    }
  });
}

Var slice(Var x, std::size_t offset, std::size_t length) {
  Graph& g = x.graph();
  const Tensor& xv = x.value();
  if (xv.rank() != 1 || offset + length > xv.size() || length == 0) {
    throw ShapeError("slice [" + std::to_string(offset) + ", +" + std::to_string(length) + ") invalid for " +
                     shape_string(xv.shape()));
  }
  Tensor out({length});
  std::copy_n(xv.data() + offset, length, out.data());
  return g.record(std::move(out), {x}, [x, offset](Graph& gr, const Tensor& go) {
    Tensor& gx = gr.grad(x);
    for (std::size_t i = 0; i < go.size(); ++i) gx[offset + i] += go[i];
  });
}

Var reshape(Var x, Shape shape) {
  Graph& g = x.graph();
  Tensor out = x.value();
  out.reshape(std::move(shape));
  return g.record(std::move(out), {x}, [x](Graph& gr, const Tensor& go) {
    Tensor& gx = gr.grad(x);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
  });
}

Var broadcast_rows(Var x, std::size_t rows) {
  Graph& g = x.graph();
  const Tensor& xv = x.value();
  if (xv.rank() != 1) throw ShapeError("broadcast_rows expects 1-D input, got " + shape_string(xv.shape()));
  const std::size_t width = xv.size();
  Tensor out({rows, width});
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(xv.data(), width, out.data() + r * width);
  return g.record(std::move(out), {x}, [x, rows, width](Graph& gr, const Tensor& go) {
    Tensor& gx = gr.grad(x);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < width; ++c) gx[c] += go[r * width + c];
    }
  });
}

Var detach(Var x) { return x.graph().constant(x.value()); }

}  // namespace endgen::ad
