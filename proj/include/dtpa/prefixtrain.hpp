#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtpa/model.hpp"
#include "dtpa/prefix.hpp"
#include "dtpa/types.hpp"

namespace dtpa::prefixtrain {

struct TrainConfig {
  std::size_t prefix_length = 20;
  double learning_rate = 0.1;
  std::size_t steps = 100;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  std::optional<double> clip_norm;
  double init_std = 0.02;

  // Throws ConfigError.
  void validate() const;
};

struct Corpus {
  std::string label;
  std::vector<std::vector<TokenId>> sequences;
};

using Batch = std::span<const std::vector<TokenId>>;

// Each sequence x_1..x_K is scored from the prefix alone for x_1 (the query
// position holds BOS) and from prefix + x_<k for later tokens, so every token
// contributes one term. The batch loss is the mean of per-sequence sums of
// -ln P(x_k | x_<k, prefix). Throws DomainError on an empty batch.
double prefix_loss(const model::ModelWeights& model,
                   const attribute::AttributePrefix& prefix, Batch batch);

struct PrefixGradient {
  double loss = 0.0;
  std::vector<num::Tensor> keys;    // per layer, same shape as the prefix
  std::vector<num::Tensor> values;

  double norm() const;
};

// Exact reverse-mode gradient of prefix_loss with respect to the prefix
// key/value tensors; the model is read-only.
PrefixGradient prefix_grad(const model::ModelWeights& model,
                           const attribute::AttributePrefix& prefix, Batch batch);

// Soft prefix with Normal(0, std_dev) entries from a seeded generator.
attribute::AttributePrefix init_prefix(const model::ModelConfig& config,
                                       std::string label, std::size_t length,
                                       double std_dev, std::uint64_t seed);

struct TrainResult {
  attribute::AttributePrefix prefix;
  // losses[s] is the batch loss evaluated before update s.
  std::vector<double> losses;
};

// Plain gradient descent from init_prefix. Throws TrainingError when the loss
// turns non-finite, naming the step.
TrainResult train_soft_prefix(const model::ModelWeights& model,
                              const Corpus& corpus, const TrainConfig& config);

// "step,loss" CSV.
std::string loss_log_csv(std::span<const double> losses);

}  // namespace dtpa::prefixtrain
