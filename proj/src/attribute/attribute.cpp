#include "dtpa/attribute.hpp"

#include <algorithm>
#include <cmath>

#include "dtpa/errors.hpp"
#include "dtpa/numkernel.hpp"

namespace dtpa::attribute {

double clamp_probability(double p) {
  return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

double reconstruct(double p) { return -1.0 / std::log(clamp_probability(p)); }

double log_term(double p, bool reconstruction) {
  return reconstruction ? std::log(reconstruct(p))
                        : std::log(clamp_probability(p));
}

void advance(AttributeStreamState& state, double p, bool reconstruction) {
  state.cumulative_log += log_term(p, reconstruction);
}

AttributeWeightVector attribute_weights(std::span<const ClassCandidates> classes,
                                        bool reconstruction) {
  if (classes.size() < 2) {
    throw ConfigError("attribute weights need at least two classes");
  }
  const std::size_t vocab = classes.front().probs.size();
  for (const auto& c : classes) {
    if (c.probs.size() != vocab) {
      throw ConfigError("class candidate vectors differ in vocabulary size");
    }
  }
  AttributeWeightVector out(classes.size(), vocab);
  std::vector<double> terms(classes.size());
  for (std::size_t x = 0; x < vocab; ++x) {
    for (std::size_t a = 0; a < classes.size(); ++a) {
      terms[a] = classes[a].log_prior + classes[a].cumulative_log +
                 log_term(classes[a].probs[x], reconstruction);
    }
    const double lse = num::log_sum_exp(terms);
    for (std::size_t a = 0; a < classes.size(); ++a) {
      out.weights(a)[x] = std::exp(terms[a] - lse);
    }
  }
  return out;
}

std::vector<double> combine(std::span<const double> raw,
                            std::span<const double> target_weights,
                            double omega) {
  if (raw.size() != target_weights.size() || raw.empty()) {
    throw DomainError("combine: raw and weight vectors differ in size");
  }
  if (!(omega >= 0.0) || !std::isfinite(omega)) {
    throw DomainError("combine: omega must be finite and >= 0");
  }
  std::vector<double> logits(raw.size());
  bool any = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double w = target_weights[i];
    if (w < 0.0 || raw[i] < 0.0) throw DomainError("combine: negative input");
    if (raw[i] == 0.0 || (w == 0.0 && omega > 0.0)) {
      logits[i] = num::kMasked;
      continue;
    }
    logits[i] = std::log(raw[i]) + (omega == 0.0 ? 0.0 : omega * std::log(w));
    any = true;
  }
  if (!any) {
    throw DegenerateDistributionError("combine: attribute weights annihilate all mass");
  }
  num::softmax_inplace(logits);
  return logits;
}

}  // namespace dtpa::attribute
