#include <random>
#include <type_traits>
#include <string>

#include "dtpa/errors.hpp"
#include "dtpa/model.hpp"

namespace dtpa::model {
namespace {

using Shape = std::vector<std::size_t>;

template <typename T>
struct Slot {
  std::string name;
  Shape shape;
  T* tensor;
};

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Canonical tensor names and shapes, in file order. lm_head is appended only
// when the head is untied.
template <typename Model>
auto slots(Model& m, bool with_head) {
  using T = std::remove_reference_t<decltype((m.token_embedding))>;
  const auto& c = m.config;
  const std::size_t d = c.d_model;
  const std::size_t ff = c.ff_width();
  std::vector<Slot<T>> s;
  s.push_back({"wte", {c.vocab_size, d}, &m.token_embedding});
  s.push_back({"wpe", {c.max_positions, d}, &m.position_embedding});
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    auto& L = m.layers[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    s.push_back({p + "ln1.weight", {d}, &L.ln1_weight});
    s.push_back({p + "ln1.bias", {d}, &L.ln1_bias});
    s.push_back({p + "attn.qkv.weight", {3 * d, d}, &L.qkv_weight});
    s.push_back({p + "attn.qkv.bias", {3 * d}, &L.qkv_bias});
    s.push_back({p + "attn.proj.weight", {d, d}, &L.proj_weight});
    s.push_back({p + "attn.proj.bias", {d}, &L.proj_bias});
    s.push_back({p + "ln2.weight", {d}, &L.ln2_weight});
    s.push_back({p + "ln2.bias", {d}, &L.ln2_bias});
    s.push_back({p + "mlp.fc.weight", {ff, d}, &L.fc_weight});
    s.push_back({p + "mlp.fc.bias", {ff}, &L.fc_bias});
    s.push_back({p + "mlp.proj.weight", {d, ff}, &L.out_weight});
    s.push_back({p + "mlp.proj.bias", {d}, &L.out_bias});
  }
  s.push_back({"ln_f.weight", {d}, &m.final_norm_weight});
  s.push_back({"ln_f.bias", {d}, &m.final_norm_bias});
  if (with_head) s.push_back({"lm_head.weight", {c.vocab_size, d}, &m.lm_head});
  return s;
}

}  // namespace

void ModelConfig::validate() const {
  if (n_layers == 0 || n_heads == 0 || d_model == 0 || vocab_size < 4 ||
      max_positions == 0) {
    throw ConfigError("model config: every dimension must be positive (vocab >= 4)");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("model config: d_model must be divisible by n_heads");
  }
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j{{"n_layers", n_layers},
                   {"n_heads", n_heads},
                   {"d_model", d_model},
                   {"vocab_size", vocab_size},
                   {"max_positions", max_positions}};
  if (d_ff != 0) j["d_ff"] = d_ff;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.max_positions = j.at("max_positions").get<std::size_t>();
    c.d_ff = j.value("d_ff", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  return c;
}

ModelWeights zero_model(const ModelConfig& config, bool tied_head) {
  config.validate();
  ModelWeights m;
  m.config = config;
  m.layers.resize(config.n_layers);
  for (auto& slot : slots(m, !tied_head)) *slot.tensor = num::Tensor(slot.shape);
  for (auto& L : m.layers) {
    L.ln1_weight.fill(1.0);
    L.ln2_weight.fill(1.0);
  }
  m.final_norm_weight.fill(1.0);
  return m;
}

ModelWeights random_model(const ModelConfig& config, std::uint64_t seed,
                          double scale, bool tied_head) {
  ModelWeights m = zero_model(config, tied_head);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& slot : slots(m, !tied_head)) {
    const bool is_gain = slot.name.find("ln") != std::string::npos &&
                         slot.name.ends_with(".weight");
    for (double& v : slot.tensor->data()) {
      const double x = normal(rng);
      v = static_cast<float>(is_gain ? 1.0 + 0.5 * x : x);
    }
  }
  return m;
}

std::vector<std::uint8_t> save_model(const ModelWeights& model) {
  stwb::Container c;
  c.config = model.config.to_json();
  for (const auto& slot : slots(model, !model.lm_head.empty())) {
    c.tensors.push_back({slot.name, *slot.tensor});
  }
  return stwb::encode(c);
}

ModelWeights load_model(std::span<const std::uint8_t> bytes) {
  const stwb::Container c = stwb::decode(bytes);
  ModelWeights m;
  m.config = ModelConfig::from_json(c.config);
  m.layers.resize(m.config.n_layers);
  const bool with_head = c.find("lm_head.weight") != nullptr;
  for (auto& slot : slots(m, with_head)) {
    const num::Tensor* t = c.find(slot.name);
    if (!t) throw FormatError("missing tensor '" + slot.name + "'");
    if (t->shape() != slot.shape) {
      throw FormatError("shape mismatch for tensor '" + slot.name +
                        "': expected " + shape_str(slot.shape) + ", found " +
                        shape_str(t->shape()));
    }
    *slot.tensor = *t;
  }
  return m;
}

ModelWeights load_model_file(const std::filesystem::path& path) {
  return load_model(stwb::read_file(path));
}

void save_model_file(const ModelWeights& model,
                     const std::filesystem::path& path) {
  stwb::write_file(path, save_model(model));
}

std::vector<std::uint8_t> save_prefix(const attribute::AttributePrefix& prefix) {
  if (prefix.kind() != attribute::PrefixKind::Soft) {
    throw ConfigError("only soft prefixes have a checkpoint format");
  }
  stwb::Container c;
  const auto& shape = prefix.keys(0).shape();
  c.config = {{"n_layers", prefix.n_layers()},
              {"n_heads", shape[0]},
              {"l_pre", shape[1]},
              {"d_head", shape[2]},
              {"label", prefix.label()}};
  for (std::size_t i = 0; i < prefix.n_layers(); ++i) {
    const std::string p = "prefix.layer" + std::to_string(i) + ".";
    c.tensors.push_back({p + "key", prefix.keys(i)});
    c.tensors.push_back({p + "value", prefix.values(i)});
  }
  return stwb::encode(c);
}

attribute::AttributePrefix load_prefix(std::span<const std::uint8_t> bytes,
                                       std::string label) {
  const stwb::Container c = stwb::decode(bytes);
  std::vector<num::Tensor> keys;
  std::vector<num::Tensor> values;
  for (std::size_t i = 0;; ++i) {
    const std::string p = "prefix.layer" + std::to_string(i) + ".";
    const num::Tensor* k = c.find(p + "key");
    const num::Tensor* v = c.find(p + "value");
    if (!k && !v) break;
    if (!k || !v) throw FormatError("prefix checkpoint: layer " + std::to_string(i) +
                                    " lacks a key or value tensor");
    if (k->rank() != 3 || k->shape() != v->shape()) {
      throw FormatError("prefix checkpoint: tensor '" + p +
                        "key' must match its value tensor and be [n_heads, l_pre, d_head]");
    }
    keys.push_back(*k);
    values.push_back(*v);
  }
  if (keys.empty()) throw FormatError("prefix checkpoint: no prefix tensors");
  try {
    return attribute::AttributePrefix::soft(std::move(label), std::move(keys),
                                            std::move(values));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("prefix checkpoint: ") + e.what());
  }
}

attribute::AttributePrefix load_prefix_file(const std::filesystem::path& path,
                                            std::string label) {
  return load_prefix(stwb::read_file(path), std::move(label));
}

void check_prefix(const ModelWeights& model,
                  const attribute::AttributePrefix& prefix) {
  const auto& c = model.config;
  if (prefix.kind() == attribute::PrefixKind::Hard) {
    for (TokenId t : prefix.tokens()) {
      if (t < 0 || static_cast<std::size_t>(t) >= c.vocab_size) {
        throw ConfigError("hard prefix '" + prefix.label() + "' has out-of-vocabulary id " +
                          std::to_string(t));
      }
    }
    return;
  }
  if (prefix.n_layers() != c.n_layers) {
    throw ConfigError("soft prefix '" + prefix.label() + "' has " +
                      std::to_string(prefix.n_layers()) + " layers, model has " +
                      std::to_string(c.n_layers));
  }
  const auto& shape = prefix.keys(0).shape();
  if (shape[0] != c.n_heads || shape[2] != c.d_head()) {
    throw ConfigError("soft prefix '" + prefix.label() + "' shape " + shape_str(shape) +
                      " does not match model heads/d_head " +
                      std::to_string(c.n_heads) + "/" + std::to_string(c.d_head()));
  }
}

}  // namespace dtpa::model
