#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dtpa/numkernel.hpp"
#include "dtpa/prefix.hpp"
#include "dtpa/stwb.hpp"

namespace dtpa::model {

struct ModelConfig {
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_model = 32;
  std::size_t vocab_size = 64;
  std::size_t max_positions = 512;
  // Feed-forward width; 0 means 4 * d_model.
  std::size_t d_ff = 0;

  std::size_t d_head() const { return d_model / n_heads; }
  std::size_t ff_width() const { return d_ff == 0 ? 4 * d_model : d_ff; }

  // Throws ConfigError.
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LayerWeights {
  num::Tensor ln1_weight, ln1_bias;   // [d]
  num::Tensor qkv_weight, qkv_bias;   // [3d, d], [3d]
  num::Tensor proj_weight, proj_bias; // [d, d], [d]
  num::Tensor ln2_weight, ln2_bias;   // [d]
  num::Tensor fc_weight, fc_bias;     // [ff, d], [ff]
  num::Tensor out_weight, out_bias;   // [d, ff], [d]

  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

// Pre-norm GPT-2 style decoder with learned absolute positions. The output
// head is tied to the token embedding unless lm_head is present.
struct ModelWeights {
  ModelConfig config;
  num::Tensor token_embedding;     // [vocab, d]
  num::Tensor position_embedding;  // [max_positions, d]
  std::vector<LayerWeights> layers;
  num::Tensor final_norm_weight, final_norm_bias;  // [d]
  num::Tensor lm_head;  // [vocab, d] or empty

  const num::Tensor& output_head() const {
    return lm_head.empty() ? token_embedding : lm_head;
  }

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

// Zero-filled weights with unit norm gains.
ModelWeights zero_model(const ModelConfig& config, bool tied_head = true);

// Normal(0, scale) weights drawn from a seeded generator, rounded to f32 so
// that save/load round-trips are exact.
ModelWeights random_model(const ModelConfig& config, std::uint64_t seed,
                          double scale = 0.2, bool tied_head = false);

std::vector<std::uint8_t> save_model(const ModelWeights& model);
ModelWeights load_model(std::span<const std::uint8_t> bytes);
ModelWeights load_model_file(const std::filesystem::path& path);
void save_model_file(const ModelWeights& model, const std::filesystem::path& path);

// Soft prefix checkpoints: tensors "prefix.layer{i}.key"/"prefix.layer{i}.value"
// of shape [n_heads, l_pre, d_head].
std::vector<std::uint8_t> save_prefix(const attribute::AttributePrefix& prefix);
attribute::AttributePrefix load_prefix(std::span<const std::uint8_t> bytes,
                                       std::string label);
attribute::AttributePrefix load_prefix_file(const std::filesystem::path& path,
                                            std::string label);

// Throws ConfigError if a soft prefix's layer/head/dimension layout or a hard
// prefix's token ids do not fit the model.
void check_prefix(const ModelWeights& model,
                  const attribute::AttributePrefix& prefix);

}  // namespace dtpa::model
