#include "dtpa/decode.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "dtpa/errors.hpp"
#include "dtpa/numkernel.hpp"
#include "dtpa/session.hpp"

namespace dtpa::decode {
namespace {

std::string_view denom_name(intervene::DenomMode m) {
  return m == intervene::DenomMode::Region ? "region" : "region+prompt";
}

struct ClassStream {
  const attribute::AttributePrefix* prefix;
  model::GenerationSession session;
  attribute::AttributeStreamState state;
  std::vector<double> probs;
};

}  // namespace

void DecodeConfig::validate() const {
  if (!std::isfinite(omega) || omega < 0.0) throw ConfigError("omega must be finite and >= 0");
  if (!std::isfinite(alpha) || alpha < 0.0) throw ConfigError("alpha must be finite and >= 0");
  if (top_k == 0) throw ConfigError("top_k must be >= 1");
  if (max_new_tokens == 0) throw ConfigError("max_new_tokens must be >= 1");
}

nlohmann::json DecodeConfig::to_json() const {
  return {{"omega", omega},
          {"alpha", alpha},
          {"denom", denom_name(denom)},
          {"top_k", top_k},
          {"max_new_tokens", max_new_tokens},
          {"reconstruction", reconstruction},
          {"prompt_augmentation", prompt_augmentation},
          {"prefix_kind", prefix_kind == attribute::PrefixKind::Hard ? "hard" : "soft"},
          {"seed", seed},
          {"target", target}};
}

nlohmann::json to_json(const GenerationResult& result) {
  return {{"tokens", result.tokens},
          {"text", result.text},
          {"per_step_probability", result.per_step_probability},
          {"per_step_attribute_weight", result.per_step_attribute_weight}};
}

std::vector<double> top_k_filter(std::span<const double> probs, std::size_t k) {
  if (k == 0) throw DomainError("top_k_filter: k must be >= 1");
  if (k >= probs.size()) return {probs.begin(), probs.end()};
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      return probs[a] != probs[b] ? probs[a] > probs[b] : a < b;
                    });
  std::vector<double> out(probs.size(), 0.0);
  double kept = 0.0;
  for (std::size_t i = 0; i < k; ++i) kept += probs[order[i]];
  if (!(kept > 0.0)) throw DomainError("top_k_filter: no mass among the top k");
  for (std::size_t i = 0; i < k; ++i) out[order[i]] = probs[order[i]] / kept;
  return out;
}

TokenId sample(std::span<const double> probs, double u) {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("sample: invalid probability");
    total += p;
  }
  if (!(total > 0.0)) throw DomainError("sample: distribution has no mass");
  const double target = u * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    acc += probs[i];
    if (acc > target) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(last_positive);
}

TokenId sample(std::span<const double> probs, Rng& rng) {
  return sample(probs, rng.uniform());
}

GenerationResult generate(const model::ModelWeights& model,
                          std::span<const attribute::AttributePrefix> prefixes,
                          const model::Vocabulary& vocab, std::string_view prompt,
                          const DecodeConfig& config,
                          const GenerateOptions& options) {
  config.validate();
  if (prefixes.size() < 2) throw ConfigError("generate needs at least two class prefixes");
  if (vocab.size() != model.config.vocab_size) {
    throw ConfigError("vocabulary size does not match the model");
  }
  std::optional<std::size_t> target;
  for (std::size_t i = 0; i < prefixes.size(); ++i) {
    if (prefixes[i].kind() != config.prefix_kind) {
      throw ConfigError("prefix '" + prefixes[i].label() + "' is not of the configured kind");
    }
    if (prefixes[i].label() == config.target) target = i;
  }
  if (!target) throw ConfigError("target attribute '" + config.target + "' has no prefix");

  const std::vector<TokenId> prompt_ids = model::tokenize(prompt, vocab);
  if (prompt_ids.empty()) throw DomainError("prompt is empty after tokenization");

  const std::size_t steps = options.forced_tokens.empty()
                                ? config.max_new_tokens
                                : options.forced_tokens.size();
  std::size_t longest_prefix = 0;
  for (const auto& p : prefixes) longest_prefix = std::max(longest_prefix, p.length());
  if (longest_prefix + prompt_ids.size() + steps - 1 > model.config.max_positions) {
    throw CapacityError("prefix + prompt + generation exceed max_positions");
  }

  const intervene::InterventionSpec prefix_aug{intervene::RegionKind::Prefix,
                                               config.alpha, config.denom};
  std::vector<ClassStream> streams;
  streams.reserve(prefixes.size());
  for (const auto& p : prefixes) {
    streams.push_back({&p, model::new_session(model, &p, prompt_ids, prefix_aug),
                       {p.label(), 0.0, 0.0}, {}});
  }
  std::optional<intervene::InterventionSpec> prompt_aug;
  if (config.prompt_augmentation) {
    prompt_aug = intervene::InterventionSpec{intervene::RegionKind::Prompt, config.alpha,
                                             intervene::DenomMode::Region};
  }
  model::GenerationSession raw = model::new_session(model, nullptr, prompt_ids, prompt_aug);

  Rng rng(config.seed);
  GenerationResult result;
  std::vector<attribute::ClassCandidates> candidates(streams.size());

  for (std::size_t step = 0; step < steps; ++step) {
    const std::vector<double> raw_probs = num::softmax(raw.last().logits);
    for (std::size_t c = 0; c < streams.size(); ++c) {
      auto& s = streams[c];
      s.probs = num::softmax(s.session.last().logits);
      candidates[c] = {s.state.cumulative_log, s.state.log_prior, s.probs};
    }
    const auto weights = attribute::attribute_weights(candidates, config.reconstruction);
    std::vector<double> combined =
        attribute::combine(raw_probs, weights.weights(*target), config.omega);
    for (TokenId r : {model::Vocabulary::kPad, model::Vocabulary::kUnk,
                      model::Vocabulary::kBos}) {
      combined[static_cast<std::size_t>(r)] = 0.0;
    }
    const double mass = std::accumulate(combined.begin(), combined.end(), 0.0);
    if (!(mass > 0.0)) {
      throw DegenerateDistributionError("all mass on reserved tokens");
    }
    for (double& p : combined) p /= mass;
    const std::vector<double> final = top_k_filter(combined, config.top_k);
    const TokenId chosen =
        options.forced_tokens.empty() ? sample(final, rng) : options.forced_tokens[step];

    for (const auto& s : streams) {
      if (s.session.regions().l_pre == 0) continue;
      result.trace.push_back(
          {step, s.session.regions().l_gen, s.state.label, "prefix",
           intervene::mean_region_attention(s.session.last().attention,
                                            {0, s.session.regions().l_pre})});
    }
    result.trace.push_back(
        {step, raw.regions().l_gen, std::string(kRawStreamLabel), "prompt",
         intervene::mean_region_attention(raw.last().attention,
                                          {0, raw.regions().l_pro})});

    result.tokens.push_back(chosen);
    result.per_step_probability.push_back(final[static_cast<std::size_t>(chosen)]);
    result.per_step_attribute_weight.push_back(
        weights.at(*target, static_cast<std::size_t>(chosen)));
    if (options.observer) {
      options.observer({step, raw_probs, &weights, combined, final, chosen});
    }
    if (chosen == model::Vocabulary::kEos || step + 1 == steps) break;

    raw.step(chosen, model::TokenRole::Generated);
    for (auto& s : streams) {
      attribute::advance(s.state, s.probs[static_cast<std::size_t>(chosen)],
                         config.reconstruction);
      s.session.step(chosen, model::TokenRole::Generated);
    }
  }

  std::span<const TokenId> shown(result.tokens);
  if (!shown.empty() && shown.back() == model::Vocabulary::kEos) {
    shown = shown.first(shown.size() - 1);
  }
  result.text = model::detokenize(shown, vocab);
  std::stable_sort(result.trace.begin(), result.trace.end(),
                   [](const auto& a, const auto& b) {
                     return a.stream != b.stream ? a.stream < b.stream : a.step < b.step;
                   });
  return result;
}

}  // namespace dtpa::decode
