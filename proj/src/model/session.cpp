#include "dtpa/session.hpp"

#include <cmath>
#include <string>

#include "dtpa/errors.hpp"

namespace dtpa::model {

GenerationSession::GenerationSession(
    const ModelWeights& model,
    std::optional<intervene::InterventionSpec> intervention)
    : model_(&model),
      intervention_(intervention),
      keys_(model.config.n_layers),
      values_(model.config.n_layers) {
  if (intervention_) intervention_->validate();
}

GenerationSession GenerationSession::open(
    const ModelWeights& model, const attribute::AttributePrefix* prefix,
    std::optional<intervene::InterventionSpec> intervention) {
  GenerationSession s(model, intervention);
  if (!prefix) return s;
  check_prefix(model, *prefix);
  const auto& c = model.config;
  if (prefix->length() > c.max_positions) {
    throw CapacityError("prefix longer than max_positions");
  }
  if (prefix->kind() == attribute::PrefixKind::Soft) {
    const std::size_t n = prefix->length();
    const std::size_t dh = c.d_head();
    for (std::size_t layer = 0; layer < c.n_layers; ++layer) {
      auto& k = s.keys_[layer];
      auto& v = s.values_[layer];
      k.assign(n * c.d_model, 0.0);
      v.assign(n * c.d_model, 0.0);
      const auto& pk = prefix->keys(layer);
      const auto& pv = prefix->values(layer);
      for (std::size_t h = 0; h < c.n_heads; ++h) {
        for (std::size_t p = 0; p < n; ++p) {
          for (std::size_t e = 0; e < dh; ++e) {
            const std::size_t src = (h * n + p) * dh + e;
            k[p * c.d_model + h * dh + e] = pk[src];
            v[p * c.d_model + h * dh + e] = pv[src];
          }
        }
      }
    }
    s.position_ = n;
    s.regions_.l_pre = n;
  } else {
    for (TokenId t : prefix->tokens()) {
      ++s.regions_.l_pre;
      s.last_ = s.forward(t);
    }
  }
  return s;
}

std::size_t GenerationSession::cache_length(std::size_t layer) const {
  return keys_.at(layer).size() / model_->config.d_model;
}

StepOutput GenerationSession::step(TokenId token, TokenRole role) {
  if (role == TokenRole::Prompt) {
    ++regions_.l_pro;
  } else {
    ++regions_.l_gen;
  }
  try {
    last_ = forward(token);
  } catch (...) {
    if (role == TokenRole::Prompt) {
      --regions_.l_pro;
    } else {
      --regions_.l_gen;
    }
    throw;
  }
  return last_;
}

// Consumes `token` at position_ under the current region map, which already
// counts the token.
StepOutput GenerationSession::forward(TokenId token) {
  const auto& c = model_->config;
  const auto& m = *model_;
  if (token < 0 || static_cast<std::size_t>(token) >= c.vocab_size) {
    throw DomainError("token id " + std::to_string(token) + " out of range");
  }
  if (position_ + 1 > c.max_positions) {
    throw CapacityError("session capacity " + std::to_string(c.max_positions) +
                        " exceeded");
  }
  const std::size_t d = c.d_model;
  const std::size_t dh = c.d_head();
  const std::size_t len = position_ + 1;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto resolved = intervention_
                            ? intervene::resolve(*intervention_, regions_)
                            : std::nullopt;

  std::vector<double> x(d);
  auto te = m.token_embedding.row(static_cast<std::size_t>(token));
  auto pe = m.position_embedding.row(position_);
  for (std::size_t i = 0; i < d; ++i) x[i] = te[i] + pe[i];

  StepOutput out;
  out.attention = intervene::AttentionRows(c.n_layers, c.n_heads, len);
  std::vector<double> h(d), qkv(3 * d), attn(d), proj(d);
  std::vector<double> ff(c.ff_width());
  std::vector<double> scores(len);

  for (std::size_t layer = 0; layer < c.n_layers; ++layer) {
    const auto& L = m.layers[layer];
    num::layer_norm(x, L.ln1_weight.data(), L.ln1_bias.data(), h);
    num::matvec(L.qkv_weight, h, L.qkv_bias.data(), qkv);

    auto& kc = keys_[layer];
    auto& vc = values_[layer];
    kc.insert(kc.end(), qkv.begin() + d, qkv.begin() + 2 * d);
    vc.insert(vc.end(), qkv.begin() + 2 * d, qkv.end());

    std::fill(attn.begin(), attn.end(), 0.0);
    for (std::size_t head = 0; head < c.n_heads; ++head) {
      std::span<const double> q(qkv.data() + head * dh, dh);
      for (std::size_t j = 0; j < len; ++j) {
        scores[j] = num::dot(q, std::span<const double>(kc.data() + j * d + head * dh, dh)) * scale;
      }
      intervene::normalize_row(scores, resolved);
      auto row = out.attention.row(layer, head);
      std::copy(scores.begin(), scores.end(), row.begin());
      std::span<double> o(attn.data() + head * dh, dh);
      for (std::size_t j = 0; j < len; ++j) {
        num::axpy(scores[j], std::span<const double>(vc.data() + j * d + head * dh, dh), o);
      }
    }
    num::matvec(L.proj_weight, attn, L.proj_bias.data(), proj);
    for (std::size_t i = 0; i < d; ++i) x[i] += proj[i];

    num::layer_norm(x, L.ln2_weight.data(), L.ln2_bias.data(), h);
    num::matvec(L.fc_weight, h, L.fc_bias.data(), ff);
    for (double& v : ff) v = num::gelu(v);
    num::matvec(L.out_weight, ff, L.out_bias.data(), proj);
    for (std::size_t i = 0; i < d; ++i) x[i] += proj[i];
  }

  num::layer_norm(x, m.final_norm_weight.data(), m.final_norm_bias.data(), h);
  out.logits.assign(c.vocab_size, 0.0);
  num::matvec(m.output_head(), h, {}, out.logits);
  ++position_;
  return out;
}

GenerationSession new_session(
    const ModelWeights& model, const attribute::AttributePrefix* prefix,
    std::span<const TokenId> prompt,
    std::optional<intervene::InterventionSpec> intervention) {
  const std::size_t l_pre = prefix ? prefix->length() : 0;
  if (l_pre + prompt.size() > model.config.max_positions) {
    throw CapacityError("prefix + prompt exceed max_positions");
  }
  GenerationSession s = GenerationSession::open(model, prefix, intervention);
  for (TokenId t : prompt) s.step(t, TokenRole::Prompt);
  return s;
}

}  // namespace dtpa::model
