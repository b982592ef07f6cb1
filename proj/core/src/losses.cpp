#include "endgen/losses.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "endgen/errors.hpp"

namespace endgen::loss {

namespace {

bool step_active(std::span<const std::uint8_t> mask, std::size_t t) { return mask.empty() || mask[t] != 0; }

Var pick(Var dist, TokenId id) {
  const int ids[1] = {id};
  return ad::gather(dist, ids);
}

void check_lengths(std::size_t dists, std::size_t targets, std::span<const std::uint8_t> mask) {
  if (dists != targets) {
    throw ShapeError(std::to_string(dists) + " step distributions for " + std::to_string(targets) + " targets");
  }
  if (!mask.empty() && mask.size() != targets) throw ShapeError("target mask length does not match targets");
  if (targets == 0) throw ContractError("loss over an empty target sequence");
}

}  // namespace

void LossConfig::validate() const {
  if (!(beta >= 0)) throw ConfigError("beta must be >= 0");
  if (!(mu >= 0 && mu <= 1)) throw ConfigError("mu must lie in [0, 1]");
}

Var mle_loss(std::span<const Var> distributions, std::span<const TokenId> targets,
             std::span<const std::uint8_t> mask) {
  return pointer_coverage_loss(distributions, targets, {}, {}, 0, false, mask);
}

Var coverage_penalty(Var alpha, Var coverage) { return ad::sum(ad::minimum(alpha, coverage)); }

Var pointer_coverage_loss(std::span<const Var> distributions, std::span<const TokenId> targets,
                          std::span<const Var> alphas, std::span<const Var> coverages, Real beta,
                          bool coverage_enabled, std::span<const std::uint8_t> mask) {
  check_lengths(distributions.size(), targets.size(), mask);
  if (coverage_enabled && (alphas.size() != targets.size() || coverages.size() != targets.size())) {
    throw ShapeError("coverage loss needs one attention and one coverage vector per step");
  }
  ad::Graph& g = distributions[0].graph();
  std::vector<Var> terms;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (!step_active(mask, t)) continue;
    Var term = ad::scale(ad::log(pick(distributions[t], targets[t])), Real(-1));
    if (coverage_enabled) term = term + ad::scale(coverage_penalty(alphas[t], coverages[t]), beta);
    terms.push_back(term);
  }
  if (terms.empty()) return g.constant(Tensor::scalar(0));
  return ad::scale(ad::sum(ad::concat(terms)), Real(1) / Real(terms.size()));
}

Var semantic_relevance(Var v_plot, Var v_gen) {
  ad::Graph& g = v_plot.graph();
  auto norm_of = [](const Tensor& t) {
    double acc = 0;
    for (Real x : t.values()) acc += double(x) * double(x);
    return std::sqrt(acc);
  };
  if (v_plot.size() != v_gen.size()) throw ShapeError("semantic vectors differ in length");
  if (norm_of(v_plot.value()) < 1e-8 || norm_of(v_gen.value()) < 1e-8) return g.constant(Tensor::scalar(0));
  Var denom = ad::sqrt(ad::dot(v_plot, v_plot)) * ad::sqrt(ad::dot(v_gen, v_gen));
  return ad::div(ad::dot(v_plot, v_gen), denom);
}

Var mixed_loss(Var pointer_loss, Var semantic) { return ad::sub(pointer_loss, semantic); }

Var sequence_log_prob(std::span<const Var> distributions, std::span<const TokenId> ids) {
  check_lengths(distributions.size(), ids.size(), {});
  std::vector<Var> terms;
  terms.reserve(ids.size());
  for (std::size_t t = 0; t < ids.size(); ++t) terms.push_back(ad::log(pick(distributions[t], ids[t])));
  return ad::sum(ad::concat(terms));
}

Var rl_loss(Real reward_baseline, Real reward_sample, Var sample_log_prob) {
  if (!std::isfinite(reward_baseline) || !std::isfinite(reward_sample)) throw NumericError("non-finite reward");
  return ad::scale(sample_log_prob, reward_baseline - reward_sample);
}

Var total_loss(Var rl, Var mixed, Real mu) {
  if (!(mu >= 0 && mu <= 1)) throw ConfigError("mu must lie in [0, 1]");
  return ad::scale(rl, mu) + ad::scale(mixed, Real(1) - mu);
}

}  // namespace endgen::loss
