#pragma once

#include <span>
#include <string>
#include <vector>

#include "dtpa/numkernel.hpp"
#include "dtpa/types.hpp"

namespace dtpa::attribute {

enum class PrefixKind { Soft, Hard };

// Steering prefix for one attribute class.
//
// A soft prefix is a set of per-layer key/value activation rows, each tensor of
// shape [n_heads, l_pre, d_head], which pre-populate the attention cache. A hard
// prefix is a token sequence consumed as ordinary positions before the prompt.
class AttributePrefix {
 public:
  static AttributePrefix soft(std::string label, std::vector<num::Tensor> keys,
                              std::vector<num::Tensor> values);
  static AttributePrefix hard(std::string label, std::vector<TokenId> tokens);

  const std::string& label() const { return label_; }
  PrefixKind kind() const { return kind_; }
  std::size_t length() const;

  // Soft only.
  std::size_t n_layers() const { return keys_.size(); }
  const num::Tensor& keys(std::size_t layer) const { return keys_.at(layer); }
  const num::Tensor& values(std::size_t layer) const { return values_.at(layer); }
  num::Tensor& keys(std::size_t layer) { return keys_.at(layer); }
  num::Tensor& values(std::size_t layer) { return values_.at(layer); }

  // Hard only.
  std::span<const TokenId> tokens() const { return tokens_; }

  friend bool operator==(const AttributePrefix&, const AttributePrefix&) = default;

 private:
  AttributePrefix() = default;

  std::string label_;
  PrefixKind kind_ = PrefixKind::Hard;
  std::vector<num::Tensor> keys_;
  std::vector<num::Tensor> values_;
  std::vector<TokenId> tokens_;
};

}  // namespace dtpa::attribute
