#include "dtpa/prefixtrain.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "dtpa/errors.hpp"
#include "dtpa/numkernel.hpp"
#include "dtpa/vocab.hpp"

namespace dtpa::prefixtrain {
namespace {

using Rows = std::vector<std::vector<double>>;

Rows zeros(std::size_t n, std::size_t width) {
  return Rows(n, std::vector<double>(width, 0.0));
}

struct LayerTape {
  Rows x_in, h1, qkv, attn, x_mid, h2, u;
  std::vector<num::NormStats> ln1, ln2;
  // probs[head][i] has soft_len + i + 1 entries
  std::vector<Rows> probs;
};

struct Tape {
  std::vector<LayerTape> layers;
  Rows x_final, h_final, probs_out;
  std::vector<num::NormStats> ln_f;
  std::vector<TokenId> targets;
  double loss = 0.0;
};

void check_batch(const model::ModelWeights& model,
                 const attribute::AttributePrefix& prefix, Batch batch) {
  if (batch.empty()) throw DomainError("prefix loss over an empty batch");
  if (prefix.kind() != attribute::PrefixKind::Soft) {
    throw ConfigError("prefix training needs a soft prefix");
  }
  model::check_prefix(model, prefix);
  for (const auto& seq : batch) {
    if (seq.empty()) throw DomainError("empty training sequence");
    if (seq.size() + prefix.length() > model.config.max_positions) {
      throw DomainError("training sequence longer than max_positions - l_pre");
    }
    for (TokenId t : seq) {
      if (t < 0 || static_cast<std::size_t>(t) >= model.config.vocab_size) {
        throw DomainError("training token id out of range");
      }
    }
  }
}

Tape forward(const model::ModelWeights& m, const attribute::AttributePrefix& prefix,
             const std::vector<TokenId>& seq) {
  const auto& c = m.config;
  const std::size_t d = c.d_model;
  const std::size_t dh = c.d_head();
  const std::size_t P = prefix.length();
  const std::size_t n = seq.size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tape t;
  t.targets = seq;
  Rows x = zeros(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const TokenId input = i == 0 ? model::Vocabulary::kBos : seq[i - 1];
    auto te = m.token_embedding.row(static_cast<std::size_t>(input));
    auto pe = m.position_embedding.row(P + i);
    for (std::size_t e = 0; e < d; ++e) x[i][e] = te[e] + pe[e];
  }

  t.layers.resize(c.n_layers);
  for (std::size_t layer = 0; layer < c.n_layers; ++layer) {
    const auto& L = m.layers[layer];
    auto& T = t.layers[layer];
    T.x_in = x;
    T.h1 = zeros(n, d);
    T.qkv = zeros(n, 3 * d);
    T.ln1.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      T.ln1[i] = num::layer_norm(x[i], L.ln1_weight.data(), L.ln1_bias.data(), T.h1[i]);
      num::matvec(L.qkv_weight, T.h1[i], L.qkv_bias.data(), T.qkv[i]);
    }
    T.attn = zeros(n, d);
    T.probs.assign(c.n_heads, Rows(n));
    const auto& pk = prefix.keys(layer);
    const auto& pv = prefix.values(layer);
    for (std::size_t head = 0; head < c.n_heads; ++head) {
      for (std::size_t i = 0; i < n; ++i) {
        std::span<const double> q(T.qkv[i].data() + head * dh, dh);
        auto& row = T.probs[head][i];
        row.resize(P + i + 1);
        for (std::size_t j = 0; j < P; ++j) {
          row[j] = num::dot(q, pk.data().subspan((head * P + j) * dh, dh)) * scale;
        }
        for (std::size_t j = 0; j <= i; ++j) {
          row[P + j] = num::dot(q, std::span<const double>(T.qkv[j].data() + d + head * dh, dh)) * scale;
        }
        num::softmax_inplace(row);
        std::span<double> o(T.attn[i].data() + head * dh, dh);
        for (std::size_t j = 0; j < P; ++j) {
          num::axpy(row[j], pv.data().subspan((head * P + j) * dh, dh), o);
        }
        for (std::size_t j = 0; j <= i; ++j) {
          num::axpy(row[P + j], std::span<const double>(T.qkv[j].data() + 2 * d + head * dh, dh), o);
        }
      }
    }
    T.x_mid = x;
    std::vector<double> tmp(d);
    for (std::size_t i = 0; i < n; ++i) {
      num::matvec(L.proj_weight, T.attn[i], L.proj_bias.data(), tmp);
      for (std::size_t e = 0; e < d; ++e) T.x_mid[i][e] += tmp[e];
    }
    T.h2 = zeros(n, d);
    T.u = zeros(n, c.ff_width());
    T.ln2.resize(n);
    x = T.x_mid;
    std::vector<double> g(c.ff_width());
    for (std::size_t i = 0; i < n; ++i) {
      T.ln2[i] = num::layer_norm(T.x_mid[i], L.ln2_weight.data(), L.ln2_bias.data(), T.h2[i]);
      num::matvec(L.fc_weight, T.h2[i], L.fc_bias.data(), T.u[i]);
      for (std::size_t f = 0; f < g.size(); ++f) g[f] = num::gelu(T.u[i][f]);
      num::matvec(L.out_weight, g, L.out_bias.data(), tmp);
      for (std::size_t e = 0; e < d; ++e) x[i][e] += tmp[e];
    }
  }

  t.x_final = x;
  t.h_final = zeros(n, d);
  t.probs_out = zeros(n, c.vocab_size);
  t.ln_f.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.ln_f[i] = num::layer_norm(x[i], m.final_norm_weight.data(), m.final_norm_bias.data(),
                                t.h_final[i]);
    num::matvec(m.output_head(), t.h_final[i], {}, t.probs_out[i]);
    const double lse = num::log_sum_exp(t.probs_out[i]);
    t.loss += lse - t.probs_out[i][static_cast<std::size_t>(seq[i])];
    num::softmax_inplace(t.probs_out[i]);
  }
  return t;
}

// Accumulates weight * d(loss of this sequence)/d(prefix) into grad.
void backward(const model::ModelWeights& m, const attribute::AttributePrefix& prefix,
              const Tape& t, double weight, PrefixGradient& grad) {
  const auto& c = m.config;
  const std::size_t d = c.d_model;
  const std::size_t dh = c.d_head();
  const std::size_t P = prefix.length();
  const std::size_t n = t.targets.size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Rows dx = zeros(n, d);
  {
    std::vector<double> dlogits(c.vocab_size), dh_f(d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t v = 0; v < c.vocab_size; ++v) dlogits[v] = weight * t.probs_out[i][v];
      dlogits[static_cast<std::size_t>(t.targets[i])] -= weight;
      std::fill(dh_f.begin(), dh_f.end(), 0.0);
      num::matvec_t_acc(m.output_head(), dlogits, dh_f);
      num::layer_norm_backward(t.x_final[i], t.ln_f[i], m.final_norm_weight.data(), dh_f, dx[i]);
    }
  }

  std::vector<double> tmp_d(d), tmp_ff(c.ff_width()), dln(d);
  for (std::size_t layer = c.n_layers; layer-- > 0;) {
    const auto& L = m.layers[layer];
    const auto& T = t.layers[layer];

    // Feed-forward residual branch.
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(tmp_ff.begin(), tmp_ff.end(), 0.0);
      num::matvec_t_acc(L.out_weight, dx[i], tmp_ff);
      for (std::size_t f = 0; f < tmp_ff.size(); ++f) tmp_ff[f] *= num::gelu_grad(T.u[i][f]);
      std::fill(tmp_d.begin(), tmp_d.end(), 0.0);
      num::matvec_t_acc(L.fc_weight, tmp_ff, tmp_d);
      num::layer_norm_backward(T.x_mid[i], T.ln2[i], L.ln2_weight.data(), tmp_d, dln);
      for (std::size_t e = 0; e < d; ++e) dx[i][e] += dln[e];
    }

    // Attention residual branch.
    Rows dattn = zeros(n, d);
    for (std::size_t i = 0; i < n; ++i) num::matvec_t_acc(L.proj_weight, dx[i], dattn[i]);
    Rows dqkv = zeros(n, 3 * d);
    const auto& pk = prefix.keys(layer);
    const auto& pv = prefix.values(layer);
    auto& gk = grad.keys[layer];
    auto& gv = grad.values[layer];
    std::vector<double> da;
    for (std::size_t head = 0; head < c.n_heads; ++head) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto& a = T.probs[head][i];
        std::span<const double> dout(dattn[i].data() + head * dh, dh);
        da.assign(a.size(), 0.0);
        double dot_a_da = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) {
          const bool pre = j < P;
          std::span<const double> vj =
              pre ? pv.data().subspan((head * P + j) * dh, dh)
                  : std::span<const double>(T.qkv[j - P].data() + 2 * d + head * dh, dh);
          da[j] = num::dot(dout, vj);
          dot_a_da += a[j] * da[j];
          std::span<double> dvj =
              pre ? gv.data().subspan((head * P + j) * dh, dh)
                  : std::span<double>(dqkv[j - P].data() + 2 * d + head * dh, dh);
          num::axpy(a[j], dout, dvj);
        }
        std::span<const double> qi(T.qkv[i].data() + head * dh, dh);
        std::span<double> dqi(dqkv[i].data() + head * dh, dh);
        for (std::size_t j = 0; j < a.size(); ++j) {
          const double ds = a[j] * (da[j] - dot_a_da) * scale;
          if (ds == 0.0) continue;
          const bool pre = j < P;
          std::span<const double> kj =
              pre ? pk.data().subspan((head * P + j) * dh, dh)
                  : std::span<const double>(T.qkv[j - P].data() + d + head * dh, dh);
          num::axpy(ds, kj, dqi);
          std::span<double> dkj =
              pre ? gk.data().subspan((head * P + j) * dh, dh)
                  : std::span<double>(dqkv[j - P].data() + d + head * dh, dh);
          num::axpy(ds, qi, dkj);
        }
      }
    }
    if (layer == 0) break;  // nothing below the first layer depends on the prefix
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(tmp_d.begin(), tmp_d.end(), 0.0);
      num::matvec_t_acc(L.qkv_weight, dqkv[i], tmp_d);
      num::layer_norm_backward(T.x_in[i], T.ln1[i], L.ln1_weight.data(), tmp_d, dln);
      for (std::size_t e = 0; e < d; ++e) dx[i][e] += dln[e];
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (prefix_length == 0) throw ConfigError("prefix length must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be finite and >= 0");
  }
  if (steps == 0 || batch_size == 0) throw ConfigError("steps and batch size must be >= 1");
  if (clip_norm && !(*clip_norm > 0.0)) throw ConfigError("clip norm must be > 0");
  if (!(init_std >= 0.0)) throw ConfigError("init std must be >= 0");
}

double PrefixGradient::norm() const {
  double s = 0.0;
  for (const auto* group : {&keys, &values}) {
    for (const auto& t : *group) {
      for (double v : t.data()) s += v * v;
    }
  }
  return std::sqrt(s);
}

double prefix_loss(const model::ModelWeights& model,
                   const attribute::AttributePrefix& prefix, Batch batch) {
  check_batch(model, prefix, batch);
  double total = 0.0;
  for (const auto& seq : batch) total += forward(model, prefix, seq).loss;
  return total / static_cast<double>(batch.size());
}

PrefixGradient prefix_grad(const model::ModelWeights& model,
                           const attribute::AttributePrefix& prefix, Batch batch) {
  check_batch(model, prefix, batch);
  PrefixGradient g;
  for (std::size_t l = 0; l < prefix.n_layers(); ++l) {
    g.keys.emplace_back(prefix.keys(l).shape());
    g.values.emplace_back(prefix.values(l).shape());
  }
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const auto& seq : batch) {
    const Tape t = forward(model, prefix, seq);
    g.loss += w * t.loss;
    backward(model, prefix, t, w, g);
  }
  return g;
}

attribute::AttributePrefix init_prefix(const model::ModelConfig& config,
                                       std::string label, std::size_t length,
                                       double std_dev, std::uint64_t seed) {
  if (length == 0) throw ConfigError("soft prefix length must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std_dev);
  std::vector<num::Tensor> keys, values;
  const std::vector<std::size_t> shape{config.n_heads, length, config.d_head()};
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    num::Tensor k(shape), v(shape);
    for (double& x : k.data()) x = std_dev == 0.0 ? 0.0 : normal(rng);
    for (double& x : v.data()) x = std_dev == 0.0 ? 0.0 : normal(rng);
    keys.push_back(std::move(k));
    values.push_back(std::move(v));
  }
  return attribute::AttributePrefix::soft(std::move(label), std::move(keys),
                                          std::move(values));
}

TrainResult train_soft_prefix(const model::ModelWeights& model,
                              const Corpus& corpus, const TrainConfig& config) {
  config.validate();
  if (corpus.sequences.empty()) throw DomainError("empty training corpus");
  TrainResult r{init_prefix(model.config, corpus.label, config.prefix_length,
                            config.init_std, config.seed),
                {}};
  const std::size_t n = corpus.sequences.size();
  const std::size_t b = std::min(config.batch_size, n);
  std::vector<std::vector<TokenId>> batch(b);
  for (std::size_t step = 0; step < config.steps; ++step) {
    for (std::size_t i = 0; i < b; ++i) batch[i] = corpus.sequences[(step * b + i) % n];
    PrefixGradient g = prefix_grad(model, r.prefix, batch);
    if (!std::isfinite(g.loss)) {
      throw TrainingError("loss became non-finite at step " + std::to_string(step));
    }
    r.losses.push_back(g.loss);
    double factor = config.learning_rate;
    if (config.clip_norm) {
      const double norm = g.norm();
      if (norm > *config.clip_norm) factor *= *config.clip_norm / norm;
    }
    if (factor == 0.0) continue;
    for (std::size_t l = 0; l < r.prefix.n_layers(); ++l) {
      num::axpy(-factor, g.keys[l].data(), r.prefix.keys(l).data());
      num::axpy(-factor, g.values[l].data(), r.prefix.values(l).data());
    }
  }
  return r;
}

std::string loss_log_csv(std::span<const double> losses) {
  std::string out = "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i, losses[i]);
    out += buf;
  }
  return out;
}

}  // namespace dtpa::prefixtrain
