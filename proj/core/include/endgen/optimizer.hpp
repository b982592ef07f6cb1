#pragma once

#include <cstdint>
#include <vector>

#include "endgen/autodiff.hpp"

namespace endgen::opt {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moments per parameter plus the update count.
struct AdamState {
  AdamState() = default;
  explicit AdamState(const ad::ParamStore& params);

  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;

  bool operator==(const AdamState&) const = default;
};

/// Rescales `grads` so their global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
Real clip_global_norm(ad::GradStore& grads, Real max_norm);

/// One bias-corrected Adam update. Throws NumericError naming the first
/// parameter whose gradient holds a NaN or infinity; nothing is modified then.
void adam_step(ad::ParamStore& params, const ad::GradStore& grads, AdamState& state, const AdamOptions& options);

}  // namespace endgen::opt
