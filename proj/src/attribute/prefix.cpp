#include "dtpa/prefix.hpp"

#include "dtpa/errors.hpp"

namespace dtpa::attribute {

AttributePrefix AttributePrefix::soft(std::string label,
                                      std::vector<num::Tensor> keys,
                                      std::vector<num::Tensor> values) {
  if (keys.size() != values.size() || keys.empty()) {
    throw ConfigError("soft prefix needs matching non-empty key/value layers");
  }
  const auto& shape = keys.front().shape();
  if (shape.size() != 3) throw ConfigError("soft prefix tensors must be rank 3");
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (keys[i].shape() != shape || values[i].shape() != shape) {
      throw ConfigError("soft prefix layer " + std::to_string(i) +
                        " has inconsistent shape");
    }
  }
  AttributePrefix p;
  p.label_ = std::move(label);
  p.kind_ = PrefixKind::Soft;
  p.keys_ = std::move(keys);
  p.values_ = std::move(values);
  return p;
}

AttributePrefix AttributePrefix::hard(std::string label,
                                      std::vector<TokenId> tokens) {
  AttributePrefix p;
  p.label_ = std::move(label);
  p.kind_ = PrefixKind::Hard;
  p.tokens_ = std::move(tokens);
  return p;
}

std::size_t AttributePrefix::length() const {
  if (kind_ == PrefixKind::Hard) return tokens_.size();
  return keys_.front().dim(1);
}

}  // namespace dtpa::attribute
