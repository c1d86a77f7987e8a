#include "dtpa/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "dtpa/errors.hpp"
#include "dtpa/numkernel.hpp"
#include "dtpa/session.hpp"
#include "dtpa/vocab.hpp"

namespace dtpa::eval {

template <typename Token>
double dist_n(std::span<const std::vector<Token>> texts, std::size_t n) {
  if (n == 0) throw DomainError("dist_n: n must be >= 1");
  double total = 0.0;
  std::size_t contributing = 0;
  for (const auto& text : texts) {
    if (text.size() < n) continue;
    std::set<std::vector<Token>> distinct;
    const std::size_t count = text.size() - n + 1;
    for (std::size_t i = 0; i < count; ++i) {
      distinct.emplace(text.begin() + static_cast<std::ptrdiff_t>(i),
                       text.begin() + static_cast<std::ptrdiff_t>(i + n));
    }
    total += static_cast<double>(distinct.size()) / static_cast<double>(count);
    ++contributing;
  }
  if (contributing == 0) throw DomainError("dist_n: every text is shorter than n");
  return total / static_cast<double>(contributing);
}

template double dist_n<std::string>(std::span<const std::vector<std::string>>,
                                    std::size_t);
template double dist_n<TokenId>(std::span<const std::vector<TokenId>>, std::size_t);

ToyClassifier fit_classifier(std::span<const LabeledText> corpus,
                             std::vector<std::string> labels,
                             std::size_t vocab_size) {
  if (labels.size() < 2) throw DomainError("classifier needs at least two classes");
  if (vocab_size == 0) throw DomainError("classifier needs a non-empty vocabulary");
  std::vector<std::vector<double>> counts(labels.size(),
                                          std::vector<double>(vocab_size, 1.0));
  std::vector<std::size_t> docs(labels.size(), 0);
  for (const auto& t : corpus) {
    if (t.label >= labels.size()) throw DomainError("text label out of range");
    ++docs[t.label];
    for (TokenId tok : t.tokens) {
      if (tok < 0 || static_cast<std::size_t>(tok) >= vocab_size) {
        throw DomainError("classifier token out of range");
      }
      counts[t.label][static_cast<std::size_t>(tok)] += 1.0;
    }
  }
  ToyClassifier c;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (docs[k] == 0) throw DomainError("class '" + labels[k] + "' has no texts");
    double total = 0.0;
    for (double v : counts[k]) total += v;
    for (double& v : counts[k]) v = std::log(v / total);
  }
  c.labels_ = std::move(labels);
  c.log_probs_ = std::move(counts);
  return c;
}

std::vector<double> ToyClassifier::scores(std::span<const TokenId> tokens,
                                          std::span<const double> log_priors) const {
  std::vector<double> s(n_classes(), 0.0);
  for (std::size_t k = 0; k < n_classes(); ++k) {
    if (!log_priors.empty()) s[k] = log_priors[k];
    for (TokenId t : tokens) s[k] += log_prob(k, t);
  }
  return s;
}

std::size_t ToyClassifier::predict(std::span<const TokenId> tokens,
                                   std::span<const double> log_priors) const {
  const auto s = scores(tokens, log_priors);
  // max_element returns the first maximum, i.e. the lower index on ties.
  return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

double classify_accuracy(const ToyClassifier& classifier,
                         std::span<const LabeledText> texts,
                         std::span<const double> log_priors) {
  if (texts.empty()) throw DomainError("classify_accuracy over no texts");
  std::size_t hits = 0;
  for (const auto& t : texts) hits += classifier.predict(t.tokens, log_priors) == t.label;
  return static_cast<double>(hits) / static_cast<double>(texts.size());
}

double self_nll(const model::ModelWeights& model,
                std::span<const std::vector<TokenId>> texts) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& text : texts) {
    if (text.empty()) continue;
    auto s = model::GenerationSession::open(model, nullptr, std::nullopt);
    auto out = s.step(model::Vocabulary::kBos, model::TokenRole::Prompt);
    for (std::size_t i = 0; i < text.size(); ++i) {
      total += num::log_sum_exp(out.logits) - out.logits[static_cast<std::size_t>(text[i])];
      ++count;
      if (i + 1 < text.size()) out = s.step(text[i], model::TokenRole::Generated);
    }
  }
  if (count == 0) throw DomainError("self_nll over no tokens");
  return total / static_cast<double>(count);
}

std::string export_trace(std::span<const intervene::AttentionTraceRecord> records) {
  const bool sorted = std::is_sorted(records.begin(), records.end(),
                                     [](const auto& a, const auto& b) {
                                       return a.stream != b.stream ? a.stream < b.stream
                                                                   : a.step < b.step;
                                     });
  if (!sorted) throw DomainError("trace records are not sorted by (stream, step)");
  std::string out = "step,l_gen,stream,region,mean_attention\n";
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.9g", r.mean_attention);
    out += std::to_string(r.step) + "," + std::to_string(r.l_gen) + "," + r.stream + "," +
           r.region + "," + buf + "\n";
  }
  return out;
}

std::vector<intervene::AttentionTraceRecord> parse_trace(std::string_view csv) {
  std::vector<intervene::AttentionTraceRecord> out;
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line != "step,l_gen,stream,region,mean_attention") {
    throw FormatError("trace CSV: bad header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (fields.size() != 5) throw FormatError("trace CSV: expected 5 fields in '" + line + "'");
    try {
      out.push_back({std::stoul(fields[0]), std::stoul(fields[1]), fields[2], fields[3],
                     std::stod(fields[4])});
    } catch (const std::exception&) {
      throw FormatError("trace CSV: unparsable row '" + line + "'");
    }
  }
  return out;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j{{"dist", {{"1", report.dist1}, {"2", report.dist2}, {"3", report.dist3}}},
                   {"accuracy", report.accuracy},
                   {"n_texts", report.n_texts}};
  j["self_nll"] = report.self_nll ? nlohmann::json(*report.self_nll) : nlohmann::json(nullptr);
  return j;
}

}  // namespace dtpa::eval
