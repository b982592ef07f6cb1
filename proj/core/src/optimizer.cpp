#include "endgen/optimizer.hpp"

#include <cmath>
#include <string>

#include "endgen/errors.hpp"

namespace endgen::opt {

AdamState::AdamState(const ad::ParamStore& params) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    m.emplace_back(params.value(i).shape());
    v.emplace_back(params.value(i).shape());
  }
}

Real clip_global_norm(ad::GradStore& grads, Real max_norm) {
  const Real norm = grads.global_norm();
  if (norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

void adam_step(ad::ParamStore& params, const ad::GradStore& grads, AdamState& state, const AdamOptions& o) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("optimizer state does not match the parameter store");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params.value(i).shape()) throw ShapeError("gradient shape mismatch for " + params.name(i));
    for (Real g : grads[i].values()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + params.name(i) + "'");
    }
  }

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params.value(i).values();
    const auto g = grads[i].values();
    auto m = state.m[i].values();
    auto v = state.v[i].values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k];
      m[k] = static_cast<Real>(o.beta1 * m[k] + (1.0 - o.beta1) * gk);
      v[k] = static_cast<Real>(o.beta2 * v[k] + (1.0 - o.beta2) * gk * gk);
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      w[k] = static_cast<Real>(w[k] - o.lr * m_hat / (std::sqrt(v_hat) + o.eps));
    }
  }
}

}  // namespace endgen::opt
