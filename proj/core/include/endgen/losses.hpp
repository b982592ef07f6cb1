#pragma once

#include <cstdint>
#include <span>

#include "endgen/autodiff.hpp"
#include "endgen/corpus.hpp"

namespace endgen::loss {

using ad::Var;
using corpus::TokenId;

struct LossConfig {
  Real beta = 1;   // coverage-loss weight
  Real mu = 0.95;  // weight of the RL loss in the blended total
  bool coverage_enabled = true;
  bool semantic_enabled = true;

  void validate() const;
};

/// -sum_t log P_t(y*_t) over unmasked steps, divided by the number of those
/// steps. `mask` empty means every step counts.
Var mle_loss(std::span<const Var> distributions, std::span<const TokenId> targets,
             std::span<const std::uint8_t> mask = {});

/// sum_i min(alpha_i, s_i).
Var coverage_penalty(Var alpha, Var coverage);

/// Length-normalized sum over steps of -log P_fin(y*_t) + beta * penalty_t.
/// With coverage disabled this is exactly mle_loss.
Var pointer_coverage_loss(std::span<const Var> distributions, std::span<const TokenId> targets,
                          std::span<const Var> alphas, std::span<const Var> coverages, Real beta,
                          bool coverage_enabled, std::span<const std::uint8_t> mask = {});

/// Cosine similarity; 0 (constant, no gradient) when either norm is below 1e-8.
Var semantic_relevance(Var v_plot, Var v_gen);

Var mixed_loss(Var pointer_loss, Var semantic);

/// sum_t log P_t(ids_t).
Var sequence_log_prob(std::span<const Var> distributions, std::span<const TokenId> ids);

/// (r_baseline - r_sample) * sum of the sampled log-probabilities. Rewards are
/// plain numbers, so no gradient reaches the reward computation.
Var rl_loss(Real reward_baseline, Real reward_sample, Var sample_log_prob);

Var total_loss(Var rl, Var mixed, Real mu);

}  // namespace endgen::loss
