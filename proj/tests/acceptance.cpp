// Runs every acceptance criterion at its stated tolerance and time budget and
// prints one PASS/FAIL line per criterion. Exit status is nonzero if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "dtpa/attribute.hpp"
#include "dtpa/cli.hpp"
#include "dtpa/decode.hpp"
#include "dtpa/evalkit.hpp"
#include "dtpa/intervene.hpp"
#include "dtpa/kernels.hpp"
#include "dtpa/model.hpp"
#include "dtpa/prefixtrain.hpp"
#include "dtpa/session.hpp"
#include "dtpa/vocab.hpp"
#include "toy_models.hpp"

namespace fs = std::filesystem;
using namespace dtpa;
using attribute::AttributePrefix;
using intervene::DenomMode;
using intervene::InterventionSpec;
using intervene::RegionKind;

namespace {

// Failed checks append a line here; a criterion passes when it stays empty.
struct Report {
  std::vector<std::string> failures;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok && failures.size() == 5) failures.push_back("...");
  }
  void within(double got, double want, double tol, const std::string& what) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s: got %.17g want %.17g (tol %.1e)", what.c_str(), got, want, tol);
    check(std::abs(got - want) <= tol, buf);
  }
};

std::string fmt(const char* f, double v) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// 1. Golden reconstruction and weight values.
void golden(Report& r) {
  using attribute::reconstruct;
  r.within(reconstruct(0.15), 0.527, 5e-4, "reconstruct(0.15)");
  r.within(reconstruct(0.01), 0.217, 5e-4, "reconstruct(0.01)");
  r.within(reconstruct(0.02), 0.256, 5e-4, "reconstruct(0.02)");
  r.within(reconstruct(0.07), 0.376, 5e-4, "reconstruct(0.07)");
  for (double p : {0.15, 0.01, 0.02, 0.07}) r.within(reconstruct(p), -1.0 / std::log(p), 1e-12, "exact reconstruct");

  auto weight = [](double pa, double pb, bool recon) {
    const std::vector<double> a{pa}, b{pb};
    const std::vector<attribute::ClassCandidates> c{{0, 0, a}, {0, 0, b}};
    return attribute::attribute_weights(c, recon).at(0, 0);
  };
  r.within(weight(0.15, 0.01, false), 0.938, 5e-4, "weight off (0.15 vs 0.01)");
  r.within(weight(0.02, 0.07, false), 0.222, 5e-4, "weight off (0.02 vs 0.07)");
  r.within(weight(0.15, 0.01, true), 0.708, 5e-4, "weight on (0.15 vs 0.01)");
  r.within(weight(0.02, 0.07, true), 0.405, 5e-4, "weight on (0.02 vs 0.07)");
  r.within(weight(0.15, 0.01, false), 0.15 / 0.16, 1e-12, "exact weight off");
  r.within(weight(0.02, 0.07, false), 0.02 / 0.09, 1e-12, "exact weight off 2");
  const auto f = [](double p) { return -1.0 / std::log(p); };
  r.within(weight(0.15, 0.01, true), f(0.15) / (f(0.15) + f(0.01)), 1e-12, "exact weight on");
  r.within(weight(0.02, 0.07, true), f(0.02) / (f(0.02) + f(0.07)), 1e-12, "exact weight on 2");
}

// 2. Bias-then-softmax equals the closed form.
void closed_form(Report& r) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 4.0);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t l = 1 + rng() % 64;
    std::vector<double> raw(l);
    for (auto& v : raw) v = n(rng);
    const std::size_t len = 1 + rng() % l;
    const std::size_t begin = rng() % (l - len + 1);
    const bool plus = rng() % 2 == 0 && begin + len < l;
    const std::size_t prompt = plus ? 1 + rng() % (l - begin - len) : 0;
    const DenomMode mode = plus ? DenomMode::RegionPlusPrompt : DenomMode::Region;
    const double alpha = trial % 10 == 0 ? 0.0 : u(rng);
    const auto a = intervene::scaled_row(raw, {begin, begin + len}, alpha, mode, prompt);
    const auto b = intervene::closed_form_row(raw, {begin, begin + len}, alpha, mode, prompt);
    worst = std::max(worst, max_abs_diff(a, b));
  }
  r.check(worst <= 1e-12, "max deviation " + fmt("%.3g", worst));
  const std::vector<double> zero(4, 0.0);
  const auto hand = intervene::scaled_row(zero, {0, 2}, 1.0, DenomMode::Region);
  const double want[] = {1.0 / 3, 1.0 / 3, 1.0 / 6, 1.0 / 6};
  for (int i = 0; i < 4; ++i) r.within(hand[i], want[i], 1e-12, "hand case");
  r.detail = "max |bias route - closed form| = " + fmt("%.3g", worst);
}

// 3. With alpha = 0 and no prompt augmentation the decoder is the baseline.
void alpha_zero(Report& r) {
  const auto cfg = toy::small_config();
  const auto vocab = toy::numbered_vocab(64);
  double worst = 0.0;
  std::size_t steps = 0;
  for (std::uint64_t run = 0; run < 20; ++run) {
    const auto m = model::random_model(cfg, 100 + run);
    const std::vector<AttributePrefix> prefixes{toy::random_soft_prefix(cfg, "pos", 5, 200 + run),
                                                toy::random_soft_prefix(cfg, "neg", 5, 300 + run)};
    decode::DecodeConfig c;
    c.alpha = 0.0;
    c.prompt_augmentation = false;
    c.prefix_kind = attribute::PrefixKind::Soft;
    c.target = run % 2 ? "neg" : "pos";
    c.max_new_tokens = 16;
    c.seed = run;
    c.top_k = run % 3 == 0 ? 200 : 10;
    c.reconstruction = run % 4 != 1;
    c.omega = run % 5 == 0 ? 1.0 : 140.0;
    std::vector<std::vector<double>> finals;
    decode::GenerateOptions opt;
    opt.observer = [&](const decode::StepView& v) { finals.emplace_back(v.final.begin(), v.final.end()); };
    const auto prompt = toy::random_tokens(3, 64, 400 + run);
    const auto res = decode::generate(m, prefixes, vocab, model::detokenize(prompt, vocab), c, opt);
    const auto ref = toy::reference_loop(m, prefixes, run % 2, prompt, res.tokens, c.omega, c.top_k, c.reconstruction);
    r.check(ref.size() == finals.size(), "step count mismatch");
    for (std::size_t t = 0; t < std::min(ref.size(), finals.size()); ++t) {
      worst = std::max(worst, max_abs_diff(ref[t], finals[t]));
      ++steps;
    }
  }
  r.check(worst <= 1e-10, "max deviation " + fmt("%.3g", worst));
  r.detail = std::to_string(steps) + " steps, max deviation " + fmt("%.3g", worst);
}

// 4. KV cache versus cache-free replay.
void cache_soundness(Report& r) {
  std::mt19937_64 rng(4242);
  double worst = 0.0;
  int active = 0;
  for (int trial = 0; trial < 50; ++trial) {
    model::ModelConfig cfg{1 + rng() % 2, 1 + rng() % 2, 0, 8 + rng() % 57, 64, 0};
    cfg.d_model = cfg.n_heads * (2 + rng() % (32 / cfg.n_heads - 1));
    const auto m = model::random_model(cfg, rng(), 0.3, rng() % 2 == 0);
    const std::size_t len = 1 + rng() % 16;
    const auto history = toy::random_tokens(len, cfg.vocab_size, rng(), 0);
    const std::size_t prompt_len = 1 + rng() % len;
    const int kind = static_cast<int>(rng() % 3);
    const AttributePrefix prefix =
        kind == 0 ? toy::random_soft_prefix(cfg, "a", 1 + rng() % 8, rng())
                  : AttributePrefix::hard("a", toy::random_tokens(1 + rng() % 4, cfg.vocab_size, rng(), 0));
    const AttributePrefix* pp = kind == 2 ? nullptr : &prefix;
    std::optional<InterventionSpec> spec;
    switch (trial % 4) {
      case 1: spec = InterventionSpec{RegionKind::Prefix, 0.5, DenomMode::Region}; break;
      case 2: spec = InterventionSpec{RegionKind::Prefix, 1.3, DenomMode::RegionPlusPrompt}; break;
      case 3: spec = InterventionSpec{RegionKind::Prompt, 1.0 / 3.0, DenomMode::Region}; break;
      default: break;
    }
    if (spec) ++active;
    const auto rows = model::replay_oracle(m, pp, history, prompt_len, spec);
    auto s = model::GenerationSession::open(m, pp, spec);
    for (std::size_t t = 0; t < len; ++t) {
      const auto out = s.step(history[t], t < prompt_len ? model::TokenRole::Prompt : model::TokenRole::Generated);
      worst = std::max(worst, max_abs_diff(out.logits, rows[t]));
    }
  }
  r.check(worst <= 1e-10, "max logit deviation " + fmt("%.3g", worst));
  r.detail = "50 configs (" + std::to_string(active) + " with interventions), max deviation " + fmt("%.3g", worst);
}

// 5. Attribute weights against brute-force Bayes enumeration.
void exact_bayes(Report& r) {
  double worst = 0.0;
  std::size_t instances = 0;
  std::uint64_t seed = 1;
  for (std::size_t V = 1; V <= 8; ++V) {
    for (std::size_t K = 2; K <= 4; ++K) {
      for (bool recon : {false, true}) {
        toy::TableBank bank(V, seed++);
        toy::ConditionalTable table = std::ref(bank);
        std::vector<double> priors(K);
        std::mt19937_64 rng(seed * 31);
        double z = 0.0;
        for (auto& p : priors) z += p = 0.2 + std::uniform_real_distribution<double>(0, 1)(rng);
        for (auto& p : priors) p /= z;
        for (std::size_t length = 1; length <= 4; ++length) {
          const auto post = toy::brute_force_posterior(K, V, length, table, priors, recon);
          std::size_t n_hist = 1;
          for (std::size_t i = 1; i < length; ++i) n_hist *= V;
          std::vector<TokenId> hist(length - 1);
          for (std::size_t h = 0; h < n_hist; ++h) {
            std::size_t code = h;
            for (std::size_t i = length - 1; i-- > 0;) {
              hist[i] = static_cast<TokenId>(code % V);
              code /= V;
            }
            std::vector<attribute::AttributeStreamState> st(K);
            for (std::size_t a = 0; a < K; ++a) st[a].log_prior = std::log(priors[a]);
            std::vector<TokenId> seen;
            for (TokenId x : hist) {
              for (std::size_t a = 0; a < K; ++a) attribute::advance(st[a], bank(a, seen)[static_cast<std::size_t>(x)], recon);
              seen.push_back(x);
            }
            std::vector<attribute::ClassCandidates> c;
            for (std::size_t a = 0; a < K; ++a) c.push_back({st[a].cumulative_log, st[a].log_prior, bank(a, seen)});
            const auto w = attribute::attribute_weights(c, recon);
            for (std::size_t x = 0; x < V; ++x)
              for (std::size_t a = 0; a < K; ++a) worst = std::max(worst, std::abs(w.at(a, x) - post[h * V + x][a]));
            ++instances;
          }
        }
      }
    }
  }
  r.check(worst <= 1e-10, "max deviation " + fmt("%.3g", worst));
  r.detail = std::to_string(instances) + " histories, max deviation " + fmt("%.3g", worst);
}

// 6. Prefix gradient versus central differences.
void gradient_check(Report& r) {
  std::mt19937_64 rng(606);
  constexpr double kGradFloor = 1e-4;
  double worst = 0.0;
  std::size_t probes = 0, floored = 0;
  for (int config = 0; config < 5; ++config) {
    model::ModelConfig cfg{1 + rng() % 2, 1 + rng() % 2, 0, 16 + rng() % 49, 64, 0};
    cfg.d_model = cfg.n_heads * (4 + rng() % 5);
    const auto m = model::random_model(cfg, rng(), 0.4);
    const auto prefix = toy::random_soft_prefix(cfg, "a", 2 + rng() % 5, rng(), 0.8);
    std::vector<std::vector<TokenId>> batch;
    for (int b = 0; b < 3; ++b) batch.push_back(toy::random_tokens(2 + rng() % 4, cfg.vocab_size, rng(), 0));
    const auto g = prefixtrain::prefix_grad(m, prefix, batch);
    const std::size_t per_tensor = prefix.keys(0).size();
    for (int k = 0; k < 24; ++k) {
      const std::size_t layer = rng() % cfg.n_layers;
      const bool value = rng() % 2 == 0;
      const std::size_t idx = rng() % per_tensor;
      auto p = prefix;
      auto& t = value ? p.values(layer) : p.keys(layer);
      const double h = 1e-5, x = t[idx];
      t[idx] = x + h;
      const double up = prefixtrain::prefix_loss(m, p, batch);
      t[idx] = x - h;
      const double down = prefixtrain::prefix_loss(m, p, batch);
      const double fd = (up - down) / (2 * h);
      const double an = (value ? g.values : g.keys)[layer][idx];
      const double scale = std::max(std::abs(an), std::abs(fd));
      // With h = 1e-5 the difference quotient carries ~1e-10 absolute rounding
      // noise, so the denominator is floored at 1e-4.
      const double rel = std::abs(an - fd) / std::max(scale, kGradFloor);
      if (scale < kGradFloor) ++floored;
      worst = std::max(worst, rel);
      ++probes;
    }
  }
  r.check(worst <= 1e-6, "max relative error " + fmt("%.3g", worst));
  r.detail = std::to_string(probes) + " probes over 5 configs (" + std::to_string(floored) +
             " below the 1e-4 floor), max relative error " + fmt("%.3g", worst);
}

// 7. Prefix attention decay on the equal-logit model.
void decay_law(Report& r) {
  const auto cfg = toy::small_config();
  const auto m = toy::equal_logit_model(cfg, 77);
  const auto vocab = toy::numbered_vocab(64);
  const std::size_t l_pre = 20, l_pro = 10;
  const std::vector<AttributePrefix> prefixes{toy::random_soft_prefix(cfg, "pos", l_pre, 1),
                                              toy::random_soft_prefix(cfg, "neg", l_pre, 2)};
  const auto prompt = toy::random_tokens(l_pro, 64, 3);
  const auto forced = toy::random_tokens(101, 64, 4);

  auto trace = [&](double alpha, DenomMode mode) {
    decode::DecodeConfig c;
    c.alpha = alpha;
    c.denom = mode;
    c.prefix_kind = attribute::PrefixKind::Soft;
    c.target = "pos";
    decode::GenerateOptions opt;
    opt.forced_tokens = forced;
    const auto res = decode::generate(m, prefixes, vocab, model::detokenize(prompt, vocab), c, opt);
    std::vector<double> out;
    for (const auto& rec : res.trace)
      if (rec.stream == "pos") out.push_back(rec.mean_attention);
    return out;
  };
  double worst_plain = 0.0, worst_aug = 0.0;
  const auto plain = trace(0.0, DenomMode::Region);
  const auto aug = trace(0.5, DenomMode::Region);
  const auto aug_pp = trace(0.5, DenomMode::RegionPlusPrompt);
  r.check(plain.size() == 101 && aug.size() == 101 && aug_pp.size() == 101, "trace length");
  for (std::size_t s = 0; s < std::min({plain.size(), aug.size(), aug_pp.size()}); ++s) {
    const double l = static_cast<double>(l_pre + l_pro + s);
    worst_plain = std::max(worst_plain, std::abs(plain[s] - intervene::uniform_prefix_attention(l_pre, l_pro, s)));
    const double f = std::pow(l / l_pre, 0.5);
    worst_aug = std::max(worst_aug, std::abs(aug[s] - f * l_pre / (f * l_pre + (l - l_pre))));
    const double g = std::pow(l / (l_pre + l_pro), 0.5);
    worst_aug = std::max(worst_aug, std::abs(aug_pp[s] - g * l_pre / (g * l_pre + (l - l_pre))));
  }
  r.check(worst_plain <= 1e-12, "plain trace deviation " + fmt("%.3g", worst_plain));
  r.check(worst_aug <= 1e-12, "augmented trace deviation " + fmt("%.3g", worst_aug));
  if (plain.size() == 101 && aug.size() == 101) {
    const double ratio_plain = plain[100] / plain[1], ratio_aug = aug[100] / aug[1];
    r.check(ratio_aug > ratio_plain, "ratio not larger with alpha");
    r.detail = "trace(100)/trace(1): alpha=0 " + fmt("%.4f", ratio_plain) + ", alpha=1/2 " + fmt("%.4f", ratio_aug) +
               "; max deviation " + fmt("%.2g", std::max(worst_plain, worst_aug));
  }
}

// 8. Steering on the constructed toy model.
void steering(Report& r) {
  const auto toy = toy::steering_toy();
  const std::size_t length = 20;

  auto mean_marker = [&](double omega, const std::string& target, TokenId marker, std::uint64_t seed,
                         std::vector<TokenId>* tokens) {
    decode::DecodeConfig c;
    c.omega = omega;
    c.alpha = 0.5;
    c.target = target;
    c.max_new_tokens = length;
    c.seed = seed;
    double total = 0.0;
    std::size_t n = 0;
    decode::GenerateOptions opt;
    opt.observer = [&](const decode::StepView& v) {
      total += v.combined[static_cast<std::size_t>(marker)];
      ++n;
    };
    auto res = decode::generate(toy.model, toy.prefixes, toy.vocab, "The child", c, opt);
    if (tokens) *tokens = std::move(res.tokens);
    return total / static_cast<double>(n);
  };

  // Classifier trained on marker-bearing texts with shared filler words.
  std::vector<eval::LabeledText> train;
  for (int i = 0; i < 16; ++i) {
    const auto f1 = *toy.vocab.find("f" + std::to_string(i));
    const auto f2 = *toy.vocab.find("f" + std::to_string((i + 1) % 16));
    train.push_back({0, {toy.good, f1, f2}});
    train.push_back({1, {toy.bad, f1, f2}});
  }
  const auto classifier = eval::fit_classifier(train, {"positive", "negative"}, toy.vocab.size());

  double lift_pos = 0.0, lift_neg = 0.0;
  std::vector<eval::LabeledText> generated, uncontrolled;
  bool all_lifted = true;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (std::size_t cls = 0; cls < 2; ++cls) {
      const std::string target = cls == 0 ? "positive" : "negative";
      const TokenId marker = cls == 0 ? toy.good : toy.bad;
      std::vector<TokenId> tokens, plain;
      const double on = mean_marker(5.0, target, marker, seed, &tokens);
      const double off = mean_marker(0.0, target, marker, seed, &plain);
      uncontrolled.push_back({cls, plain});
      all_lifted = all_lifted && on > off;
      (cls == 0 ? lift_pos : lift_neg) += (on - off) / 50.0;
      generated.push_back({cls, tokens});
    }
  }
  const double acc = eval::classify_accuracy(classifier, generated);
  r.check(all_lifted, "marker probability not lifted in every run");
  r.check(acc >= 0.9, "accuracy " + fmt("%.3f", acc));
  const double acc_plain = eval::classify_accuracy(classifier, uncontrolled);
  r.detail = "accuracy " + fmt("%.3f", acc) + " over 100 generations (omega=0: " + fmt("%.3f", acc_plain) +
             "); mean marker lift " + fmt("%.3f", lift_pos) +
             " / " + fmt("%.3f", lift_neg);
}

// 9. Metric hand values.
void metrics(Report& r) {
  using W = std::vector<std::vector<std::string>>;
  const W abab{{"a", "b", "a", "b"}};
  r.within(eval::dist_n<std::string>(abab, 1), 0.5, 0.0, "dist-1 abab");
  r.within(eval::dist_n<std::string>(abab, 2), 2.0 / 3.0, 1e-15, "dist-2 abab");
  r.within(eval::dist_n<std::string>(W{{"x", "y", "z", "w"}}, 1), 1.0, 0.0, "dist-1 distinct");
  r.within(eval::dist_n<std::string>(W{{"q", "q", "q", "q"}}, 1), 0.25, 0.0, "dist-1 repeated");
  const std::vector<double> p{0.4, 0.3, 0.3};
  const auto f = decode::top_k_filter(p, 2);
  r.within(f[0], 4.0 / 7.0, 1e-12, "top-k [0]");
  r.within(f[1], 3.0 / 7.0, 1e-12, "top-k [1]");
  r.within(f[2], 0.0, 1e-12, "top-k [2]");
  const std::vector<double> q{0.05, 0.15, 0.3, 0.5};
  decode::Rng rng(2718);
  std::vector<int> count(4, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++count[static_cast<std::size_t>(decode::sample(q, rng))];
  double worst = 0.0;
  for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(count[i] / double(n) - q[i]));
  r.check(worst <= 0.01, "sampler frequency deviation " + fmt("%.4f", worst));
  r.detail = "sampler max frequency deviation " + fmt("%.4f", worst) + " at 100000 draws";
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 10. Deterministic CLI output; lossless round trips.
void formats(Report& r) {
  const fs::path dir = fs::temp_directory_path() / ("dtpa_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::vector<std::string> words{"Very", "positive", "negative", ":", "The", "child"};
  for (int i = 0; i < 54; ++i) words.push_back("w" + std::to_string(i));
  const auto vocab = model::Vocabulary::with_words(words);
  std::ofstream(dir / "vocab.json") << vocab.to_json();
  const auto m = model::random_model(toy::small_config(), 10);
  model::save_model_file(m, dir / "toy.stwb");

  auto run = [&](const std::string& tag) {
    const std::vector<std::string> gen{"generate", "--model", (dir / "toy.stwb").string(), "--vocab",
                                       (dir / "vocab.json").string(), "--preset", "sentiment", "--attribute",
                                       "positive", "--prompt", "The child", "--seed", "7", "--max-len", "50",
                                       "--json", (dir / (tag + ".json")).string(), "--trace",
                                       (dir / (tag + ".csv")).string()};
    const std::vector<std::string> tr{"trace", "--model", (dir / "toy.stwb").string(), "--vocab",
                                      (dir / "vocab.json").string(), "--preset", "sentiment", "--attribute",
                                      "negative", "--prompt", "The child", "--max-len", "20", "--out-on",
                                      (dir / (tag + "_on.csv")).string(), "--out-off",
                                      (dir / (tag + "_off.csv")).string()};
    std::ostringstream out, err;
    const int a = cli::run(gen, out, err);
    const int b = cli::run(tr, out, err);
    return std::make_pair(a == 0 && b == 0, out.str());
  };
  const auto first = run("a");
  const auto second = run("b");
  r.check(first.first && second.first, "CLI run failed");
  r.check(first.second == second.second, "stdout differs");
  for (const char* suffix : {".json", ".csv", "_on.csv", "_off.csv"}) {
    const std::string a = slurp(dir / ("a" + std::string(suffix)));
    r.check(!a.empty() && a == slurp(dir / ("b" + std::string(suffix))), std::string("output differs: ") + suffix);
  }

  const auto loaded = model::load_model_file(dir / "toy.stwb");
  r.check(loaded == m, "STWB round trip");
  auto unrounded = m;
  unrounded.token_embedding[0] = 0.1;  // not representable in 32 bits
  const auto back = model::load_model(model::save_model(unrounded));
  r.check(back.token_embedding[0] == static_cast<double>(0.1f), "STWB stores 32-bit values");
  r.check(model::Vocabulary::from_file((dir / "vocab.json").string()) == vocab, "vocabulary round trip");
  fs::remove_all(dir);
  r.detail = "two identical runs, 4 output files byte-identical";
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<void(Report&)> body;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "golden reconstruction and attribute weights", 1.0, golden},
      {2, "closed-form attention scaling equivalence", 5.0, closed_form},
      {3, "alpha=0 reduction to the baseline decoder", 30.0, alpha_zero},
      {4, "KV-cache soundness against replay", 60.0, cache_soundness},
      {5, "exact Bayes oracle for attribute weights", 30.0, exact_bayes},
      {6, "prefix gradient check", 60.0, gradient_check},
      {7, "prefix attention decay law", 10.0, decay_law},
      {8, "steering sanity end-to-end", 120.0, steering},
      {9, "metric hand values", 5.0, metrics},
      {10, "determinism and formats", 30.0, formats},
  };
  std::printf("kernel backend: %s\n", std::string(num::kernels::name(num::kernels::active_backend())).c_str());
  int failed = 0;
  for (const auto& c : criteria) {
    Report r;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(r);
    } catch (const std::exception& e) {
      r.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_s) r.failures.push_back("runtime " + fmt("%.2f", secs) + " s over budget");
    const bool ok = r.failures.empty();
    failed += ok ? 0 : 1;
    std::printf("%s [%2d] %s (%.2f s / %.0f s)%s%s\n", ok ? "PASS" : "FAIL", c.id, c.name, secs, c.budget_s,
                r.detail.empty() ? "" : ": ", r.detail.c_str());
    for (const auto& f : r.failures) std::printf("       %s\n", f.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
