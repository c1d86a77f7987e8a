#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dtpa/types.hpp"

namespace dtpa::model {

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kBos = 2;
  static constexpr TokenId kEos = 3;
  static constexpr std::size_t kReserved = 4;

  // Reserved tokens first, then `words` in order.
  static Vocabulary with_words(std::span<const std::string> words);

  // JSON object mapping token string -> id. Throws FormatError when ids are not
  // dense or reserved ids are missing.
  static Vocabulary from_json(std::string_view text);
  static Vocabulary from_file(const std::string& path);
  std::string to_json() const;

  std::size_t size() const { return tokens_.size(); }
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const;

  static bool is_reserved(TokenId id) { return id >= 0 && id < 4; }
  static std::string_view reserved_name(TokenId id);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// Whitespace split; unknown pieces map to UNK.
std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab);

// Space-joined; reserved ids render as <pad>, <unk>, <bos>, <eos>.
// Throws DomainError on an out-of-range id.
std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab);

}  // namespace dtpa::model
