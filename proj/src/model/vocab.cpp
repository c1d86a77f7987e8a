#include "dtpa/vocab.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "dtpa/errors.hpp"
#include "json.hpp"

namespace dtpa::model {
namespace {
constexpr std::string_view kReservedNames[] = {"<pad>", "<unk>", "<bos>", "<eos>"};
}

Vocabulary Vocabulary::with_words(std::span<const std::string> words) {
  Vocabulary v;
  for (auto name : kReservedNames) v.tokens_.emplace_back(name);
  v.tokens_.insert(v.tokens_.end(), words.begin(), words.end());
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.ids_.emplace(v.tokens_[i], static_cast<TokenId>(i)).second) {
      throw ConfigError("duplicate vocabulary token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

Vocabulary Vocabulary::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("vocabulary: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("vocabulary: expected a JSON object");
  Vocabulary v;
  v.tokens_.assign(j.size(), std::string());
  std::vector<bool> seen(j.size(), false);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number_integer()) {
      throw FormatError("vocabulary: id of '" + it.key() + "' is not an integer");
    }
    const auto id = it.value().get<long long>();
    if (id < 0 || static_cast<std::size_t>(id) >= j.size() || seen[id]) {
      throw FormatError("vocabulary: ids are not dense at '" + it.key() + "'");
    }
    seen[id] = true;
    v.tokens_[id] = it.key();
    v.ids_.emplace(it.key(), static_cast<TokenId>(id));
  }
  if (v.tokens_.size() < kReserved) {
    throw FormatError("vocabulary: reserved ids 0..3 missing");
  }
  return v;
}

Vocabulary Vocabulary::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open vocabulary " + path);
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return from_json(text);
}

std::string Vocabulary::to_json() const {
  // Emit in id order so files diff cleanly.
  std::ostringstream out;
  out << "{";
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (i) out << ",";
    out << "\n  " << nlohmann::json(tokens_[i]).dump() << ": " << i;
  }
  out << "\n}\n";
  return out.str();
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DomainError("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[id];
}

std::string_view Vocabulary::reserved_name(TokenId id) {
  return kReservedNames[id];
}

std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  std::size_t i = 0;
  auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) ids.push_back(vocab.find(text.substr(i, j - i)).value_or(Vocabulary::kUnk));
    i = j;
  }
  return ids;
}

std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::string& tok = vocab.token(ids[i]);
    if (i) out += ' ';
    if (Vocabulary::is_reserved(ids[i])) {
      out += Vocabulary::reserved_name(ids[i]);
    } else {
      out += tok;
    }
  }
  return out;
}

}  // namespace dtpa::model
