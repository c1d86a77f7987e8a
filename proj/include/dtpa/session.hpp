#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dtpa/intervene.hpp"
#include "dtpa/model.hpp"
#include "dtpa/prefix.hpp"
#include "dtpa/types.hpp"

namespace dtpa::model {

enum class TokenRole { Prompt, Generated };

struct StepOutput {
  std::vector<double> logits;
  intervene::AttentionRows attention;
};

// One autoregressive stream: region map, per-layer KV cache and the
// attention intervention applied to every last-token attention row.
// Holds a reference to the model, which must outlive the session.
class GenerationSession {
 public:
  // A session whose prefix is in place (soft rows cached, or hard tokens
  // consumed) and no prompt yet.
  static GenerationSession open(
      const ModelWeights& model, const attribute::AttributePrefix* prefix,
      std::optional<intervene::InterventionSpec> intervention);

  // Consumes one token and returns next-token logits plus the attention rows
  // of the new position. Prompt tokens grow l_pro, generated tokens l_gen.
  // Throws CapacityError past max_positions, DomainError for a bad id.
  StepOutput step(TokenId token, TokenRole role = TokenRole::Generated);

  const RegionMap& regions() const { return regions_; }
  std::size_t length() const { return position_; }
  std::size_t cache_length(std::size_t layer) const;
  const std::optional<intervene::InterventionSpec>& intervention() const {
    return intervention_;
  }
  const ModelWeights& model() const { return *model_; }

  // Output of the most recent step; empty before the first one.
  const StepOutput& last() const { return last_; }

 private:
  GenerationSession(const ModelWeights& model,
                    std::optional<intervene::InterventionSpec> intervention);

  StepOutput forward(TokenId token);

  const ModelWeights* model_;
  std::optional<intervene::InterventionSpec> intervention_;
  RegionMap regions_;
  std::size_t position_ = 0;
  // Per layer: position-major rows of d_model (heads concatenated).
  std::vector<std::vector<double>> keys_;
  std::vector<std::vector<double>> values_;
  StepOutput last_;
};

// open() followed by a prefill loop over `prompt` through step().
GenerationSession new_session(
    const ModelWeights& model, const attribute::AttributePrefix* prefix,
    std::span<const TokenId> prompt,
    std::optional<intervene::InterventionSpec> intervention);

// Cache-free reference: for every t, recomputes the full forward pass over
// prefix + history[0..t] and returns the last position's logits. Positions
// keep the region map (and hence the bias) they had when first consumed; the
// first `prompt_length` history tokens count as prompt. Uses the scalar
// kernels regardless of the active backend.
std::vector<std::vector<double>> replay_oracle(
    const ModelWeights& model, const attribute::AttributePrefix* prefix,
    std::span<const TokenId> history, std::size_t prompt_length,
    std::optional<intervene::InterventionSpec> intervention);

}  // namespace dtpa::model
