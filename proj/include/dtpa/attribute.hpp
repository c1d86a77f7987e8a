#pragma once

#include <span>
#include <string>
#include <vector>

namespace dtpa::attribute {

// Probabilities are clamped to [eps, 1 - eps] before any logarithm.
inline constexpr double kProbabilityClamp = 1e-12;

double clamp_probability(double p);

// Inverse-log reconstruction -1 / ln(p) of a clamped probability. Strictly
// increasing; maps (0, 1) onto (0, inf) with e^-1 -> 1.
double reconstruct(double p);

// ln f(p) where f is reconstruct (flag set) or the identity, on the clamped p.
double log_term(double p, bool reconstruction);

// Running class-conditional log-likelihood of the sampled continuation for
// one attribute class: sum over generated tokens of ln f(p_j).
struct AttributeStreamState {
  std::string label;
  double cumulative_log = 0.0;
  double log_prior = 0.0;  // ln P(a'); uniform priors cancel
};

void advance(AttributeStreamState& state, double p, bool reconstruction);

// One class's inputs to the weight computation for the current step.
struct ClassCandidates {
  double cumulative_log = 0.0;
  double log_prior = 0.0;
  std::span<const double> probs;  // next-token distribution of the class stream
};

// Per-class, per-candidate posterior weights. For every candidate token the
// weights across classes sum to 1.
class AttributeWeightVector {
 public:
  AttributeWeightVector(std::size_t n_classes, std::size_t vocab_size)
      : n_classes_(n_classes), vocab_size_(vocab_size),
        data_(n_classes * vocab_size, 0.0) {}

  std::size_t n_classes() const { return n_classes_; }
  std::size_t vocab_size() const { return vocab_size_; }

  std::span<double> weights(std::size_t cls) {
    return std::span<double>(data_).subspan(cls * vocab_size_, vocab_size_);
  }
  std::span<const double> weights(std::size_t cls) const {
    return std::span<const double>(data_).subspan(cls * vocab_size_, vocab_size_);
  }
  double at(std::size_t cls, std::size_t token) const {
    return data_[cls * vocab_size_ + token];
  }

 private:
  std::size_t n_classes_;
  std::size_t vocab_size_;
  std::vector<double> data_;
};

// weight(a', x) = exp(prior + cumulative + ln f(p_a'(x))) normalized over
// classes, computed in log space. Throws ConfigError for fewer than two
// classes or mismatched vocabulary sizes.
AttributeWeightVector attribute_weights(std::span<const ClassCandidates> classes,
                                        bool reconstruction);

// output_i proportional to w_i^omega * raw_i, renormalized. Throws
// DegenerateDistributionError if no mass survives, DomainError on negative
// weights or a size mismatch.
std::vector<double> combine(std::span<const double> raw,
                            std::span<const double> target_weights,
                            double omega);

}  // namespace dtpa::attribute
