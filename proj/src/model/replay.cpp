#include <cmath>

#include "dtpa/errors.hpp"
#include "dtpa/kernels.hpp"
#include "dtpa/session.hpp"

namespace dtpa::model {
namespace {

namespace sk = num::kernels::scalar;

using Matrix = std::vector<std::vector<double>>;

// Region map in force when position `i` (0-based over hard prefix + history)
// was consumed.
RegionMap regions_at(std::size_t i, std::size_t soft_len, std::size_t hard_len,
                     std::size_t prompt_length) {
  RegionMap r;
  const std::size_t consumed = i + 1;
  if (consumed <= hard_len) {
    r.l_pre = consumed;
    return r;
  }
  r.l_pre = soft_len + hard_len;
  const std::size_t tail = consumed - hard_len;
  r.l_pro = std::min(tail, prompt_length);
  r.l_gen = tail - r.l_pro;
  return r;
}

// Attention weights for one row: exp(z - max) with the region terms scaled by
// (l / den)^alpha, normalized.
void weight_row(std::vector<double>& z, const RegionMap& regions,
                const std::optional<intervene::InterventionSpec>& spec) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  std::size_t begin = 0, end = 0;
  double factor = 1.0;
  if (spec && spec->alpha != 0.0) {
    double den = 0.0;
    if (spec->region == intervene::RegionKind::Prefix) {
      begin = 0;
      end = regions.l_pre;
      den = spec->denom == intervene::DenomMode::Region
                ? static_cast<double>(regions.l_pre)
                : static_cast<double>(regions.l_pre + regions.l_pro);
    } else {
      begin = regions.l_pre;
      end = regions.l_pre + regions.l_pro;
      den = static_cast<double>(regions.l_pro);
    }
    if (end > begin) {
      factor = std::pow(static_cast<double>(z.size()) / den, spec->alpha);
    }
  }
  double total = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    z[j] = std::exp(z[j] - mx) * (j >= begin && j < end ? factor : 1.0);
    total += z[j];
  }
  for (double& v : z) v /= total;
}

void norm_rows(const Matrix& in, const num::Tensor& g, const num::Tensor& b,
               Matrix& out) {
  out.assign(in.size(), std::vector<double>(in.front().size()));
  for (std::size_t i = 0; i < in.size(); ++i) {
    num::layer_norm(in[i], g.data(), b.data(), out[i]);
  }
}

void linear(const num::Tensor& w, const num::Tensor* bias,
            const std::vector<double>& x, std::vector<double>& y) {
  y.assign(w.dim(0), 0.0);
  sk::matvec(w.raw(), x.data(), bias ? bias->raw() : nullptr, y.data(), w.dim(0),
             w.dim(1));
}

// Logits of the last position of `tokens` after the full cache-free forward.
std::vector<double> full_forward(const ModelWeights& m,
                                 const attribute::AttributePrefix* prefix,
                                 const std::vector<TokenId>& tokens,
                                 std::size_t hard_len, std::size_t prompt_length,
                                 const std::optional<intervene::InterventionSpec>& spec) {
  const auto& c = m.config;
  const std::size_t d = c.d_model;
  const std::size_t dh = c.d_head();
  const bool soft = prefix && prefix->kind() == attribute::PrefixKind::Soft;
  const std::size_t soft_len = soft ? prefix->length() : 0;
  const std::size_t n = tokens.size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix x(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t e = 0; e < d; ++e) {
      x[i][e] = m.token_embedding.row(tokens[i])[e] +
                m.position_embedding.row(soft_len + i)[e];
    }
  }

  Matrix h;
  for (std::size_t layer = 0; layer < c.n_layers; ++layer) {
    const auto& L = m.layers[layer];
    norm_rows(x, L.ln1_weight, L.ln1_bias, h);
    Matrix qkv(n);
    for (std::size_t i = 0; i < n; ++i) linear(L.qkv_weight, &L.qkv_bias, h[i], qkv[i]);

    for (std::size_t i = 0; i < n; ++i) {
      const RegionMap regions = regions_at(i, soft_len, hard_len, prompt_length);
      const std::size_t len = soft_len + i + 1;
      std::vector<double> attn(d, 0.0);
      for (std::size_t head = 0; head < c.n_heads; ++head) {
        auto key = [&](std::size_t j) -> const double* {
          if (j < soft_len) return prefix->keys(layer).raw() + (head * soft_len + j) * dh;
          return qkv[j - soft_len].data() + d + head * dh;
        };
        auto value = [&](std::size_t j) -> const double* {
          if (j < soft_len) return prefix->values(layer).raw() + (head * soft_len + j) * dh;
          return qkv[j - soft_len].data() + 2 * d + head * dh;
        };
        std::vector<double> z(len);
        const double* q = qkv[i].data() + head * dh;
        for (std::size_t j = 0; j < len; ++j) z[j] = sk::dot(q, key(j), dh) * scale;
        weight_row(z, regions, spec);
        for (std::size_t j = 0; j < len; ++j) sk::axpy(z[j], value(j), attn.data() + head * dh, dh);
      }
      std::vector<double> proj;
      linear(L.proj_weight, &L.proj_bias, attn, proj);
      for (std::size_t e = 0; e < d; ++e) x[i][e] += proj[e];
    }

    norm_rows(x, L.ln2_weight, L.ln2_bias, h);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> ff, out;
      linear(L.fc_weight, &L.fc_bias, h[i], ff);
      for (double& v : ff) v = num::gelu(v);
      linear(L.out_weight, &L.out_bias, ff, out);
      for (std::size_t e = 0; e < d; ++e) x[i][e] += out[e];
    }
  }

  std::vector<double> last(d), logits;
  num::layer_norm(x.back(), m.final_norm_weight.data(), m.final_norm_bias.data(), last);
  linear(m.output_head(), nullptr, last, logits);
  return logits;
}

}  // namespace

std::vector<std::vector<double>> replay_oracle(
    const ModelWeights& model, const attribute::AttributePrefix* prefix,
    std::span<const TokenId> history, std::size_t prompt_length,
    std::optional<intervene::InterventionSpec> intervention) {
  if (intervention) intervention->validate();
  if (prefix) check_prefix(model, *prefix);
  std::vector<TokenId> tokens;
  std::size_t hard_len = 0;
  if (prefix && prefix->kind() == attribute::PrefixKind::Hard) {
    tokens.assign(prefix->tokens().begin(), prefix->tokens().end());
    hard_len = tokens.size();
  }
  const std::size_t l_pre = prefix ? prefix->length() : 0;
  if (l_pre + history.size() > model.config.max_positions) {
    throw CapacityError("history exceeds max_positions");
  }
  std::vector<std::vector<double>> out;
  for (TokenId t : history) {
    if (t < 0 || static_cast<std::size_t>(t) >= model.config.vocab_size) {
      throw DomainError("token id " + std::to_string(t) + " out of range");
    }
    tokens.push_back(t);
    out.push_back(full_forward(model, prefix, tokens, hard_len, prompt_length,
                               intervention));
  }
  return out;
}

}  // namespace dtpa::model
