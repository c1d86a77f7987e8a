#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtpa/intervene.hpp"
#include "dtpa/model.hpp"
#include "dtpa/types.hpp"
#include "json.hpp"

namespace dtpa::eval {

// Mean over texts of distinct / total n-grams. Texts shorter than n are
// skipped; throws DomainError if every text is skipped or n == 0.
template <typename Token>
double dist_n(std::span<const std::vector<Token>> texts, std::size_t n);

extern template double dist_n<std::string>(std::span<const std::vector<std::string>>,
                                           std::size_t);
extern template double dist_n<TokenId>(std::span<const std::vector<TokenId>>,
                                       std::size_t);

struct LabeledText {
  std::size_t label = 0;
  std::vector<TokenId> tokens;
};

// Multinomial bag-of-words classifier with add-one smoothing.
class ToyClassifier {
 public:
  std::size_t n_classes() const { return log_probs_.size(); }
  std::size_t vocab_size() const {
    return log_probs_.empty() ? 0 : log_probs_.front().size();
  }
  double log_prob(std::size_t cls, TokenId token) const {
    return log_probs_.at(cls).at(static_cast<std::size_t>(token));
  }
  const std::vector<std::string>& labels() const { return labels_; }

  // Summed token log-likelihood per class plus log_priors (if given).
  std::vector<double> scores(std::span<const TokenId> tokens,
                             std::span<const double> log_priors = {}) const;
  // Argmax of scores; ties go to the lower class index.
  std::size_t predict(std::span<const TokenId> tokens,
                      std::span<const double> log_priors = {}) const;

  friend ToyClassifier fit_classifier(std::span<const LabeledText>,
                                      std::vector<std::string>, std::size_t);

 private:
  std::vector<std::string> labels_;
  std::vector<std::vector<double>> log_probs_;
};

// One table per class label over `vocab_size` tokens. Throws DomainError if
// a class has no texts or fewer than two classes are named.
ToyClassifier fit_classifier(std::span<const LabeledText> corpus,
                             std::vector<std::string> labels,
                             std::size_t vocab_size);

double classify_accuracy(const ToyClassifier& classifier,
                         std::span<const LabeledText> texts,
                         std::span<const double> log_priors = {});

// Mean per-token negative log-likelihood of `texts` under the raw model, each
// text scored like a prompt-free continuation (first token after BOS).
double self_nll(const model::ModelWeights& model,
                std::span<const std::vector<TokenId>> texts);

// Header "step,l_gen,stream,region,mean_attention", LF line endings,
// mean_attention printed with 9 significant digits. Throws DomainError unless
// records are sorted by (stream, step).
std::string export_trace(std::span<const intervene::AttentionTraceRecord> records);
std::vector<intervene::AttentionTraceRecord> parse_trace(std::string_view csv);

struct EvalReport {
  double dist1 = 0.0, dist2 = 0.0, dist3 = 0.0;
  double accuracy = 0.0;
  std::optional<double> self_nll;
  std::size_t n_texts = 0;
};

nlohmann::json to_json(const EvalReport& report);

}  // namespace dtpa::eval
