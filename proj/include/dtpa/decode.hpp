#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtpa/attribute.hpp"
#include "dtpa/intervene.hpp"
#include "dtpa/model.hpp"
#include "dtpa/prefix.hpp"
#include "dtpa/vocab.hpp"
#include "json.hpp"

namespace dtpa::decode {

struct DecodeConfig {
  double omega = 140.0;
  double alpha = 0.5;
  intervene::DenomMode denom = intervene::DenomMode::Region;
  std::size_t top_k = 200;
  std::size_t max_new_tokens = 50;
  bool reconstruction = true;
  bool prompt_augmentation = true;
  attribute::PrefixKind prefix_kind = attribute::PrefixKind::Hard;
  std::uint64_t seed = 0;
  std::string target;

  // Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
};

struct GenerationResult {
  std::vector<TokenId> tokens;
  std::string text;
  std::vector<double> per_step_probability;
  std::vector<double> per_step_attribute_weight;
  // Sorted by (stream, step).
  std::vector<intervene::AttentionTraceRecord> trace;
};

nlohmann::json to_json(const GenerationResult& result);

// All but the k largest entries zeroed, survivors renormalized. Ties at the
// k-th value go to the lower token id. Throws DomainError for k == 0.
std::vector<double> top_k_filter(std::span<const double> probs, std::size_t k);

// One 64-bit draw per variate, mapped to [0, 1) with 53-bit resolution.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
};

// Inverse-CDF draw over ascending token ids for a variate u in [0, 1).
// Throws DomainError if probs cannot be normalized.
TokenId sample(std::span<const double> probs, double u);
TokenId sample(std::span<const double> probs, Rng& rng);

// Per-step view handed to an observer; spans are valid during the call only.
struct StepView {
  std::size_t step = 0;
  std::span<const double> raw;        // (augmented) raw distribution
  const attribute::AttributeWeightVector* weights = nullptr;
  std::span<const double> combined;   // after combine, reserved ids zeroed
  std::span<const double> final;      // after top-k; sampled from
  TokenId chosen = 0;
};

struct GenerateOptions {
  // Teacher forcing: when non-empty, these tokens are emitted instead of
  // sampled, and generation runs for exactly this many steps.
  std::span<const TokenId> forced_tokens;
  std::function<void(const StepView&)> observer;
};

inline constexpr std::string_view kRawStreamLabel = "raw";

// Raw stream plus one class stream per prefix: each step combines the raw
// distribution with the target class's attribute weights, filters, samples and
// feeds the token to every stream. Stops at max_new_tokens or EOS.
GenerationResult generate(const model::ModelWeights& model,
                          std::span<const attribute::AttributePrefix> prefixes,
                          const model::Vocabulary& vocab, std::string_view prompt,
                          const DecodeConfig& config,
                          const GenerateOptions& options = {});

}  // namespace dtpa::decode
