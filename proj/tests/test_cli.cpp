#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dtpa/cli.hpp"
#include "dtpa/evalkit.hpp"
#include "dtpa/model.hpp"
#include "dtpa/vocab.hpp"
#include "json.hpp"
#include "toy_models.hpp"

namespace fs = std::filesystem;
using namespace dtpa;

namespace {

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("dtpa_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    std::vector<std::string> words{"Very", "positive", "negative", ":", "nontoxic", "toxic",
                                   "The", "child", "good", "bad"};
    for (std::size_t i = words.size(); i < 60; ++i) words.push_back("w" + std::to_string(i));
    const auto vocab = model::Vocabulary::with_words(words);
    std::ofstream(dir / "vocab.json") << vocab.to_json();
    const auto cfg = toy::small_config();
    model::save_model_file(model::random_model(cfg, 5), dir / "toy.stwb");
    for (const char* label : {"nontoxic", "toxic"}) {
      const auto p = toy::random_soft_prefix(cfg, label, 4, label[0] == 'n' ? 1 : 2);
      std::ofstream(dir / (std::string(label) + ".stwb"), std::ios::binary).write(
          reinterpret_cast<const char*>(model::save_prefix(p).data()),
          static_cast<std::streamsize>(model::save_prefix(p).size()));
    }
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("presets") {
  const auto* s = cli::find_preset("sentiment");
  REQUIRE(s);
  CHECK(s->omega == 140.0);
  CHECK(s->alpha == 0.5);
  CHECK(s->prefix_kind == attribute::PrefixKind::Hard);
  const auto* t = cli::find_preset("topic");
  REQUIRE(t);
  CHECK(t->omega == 60.0);
  CHECK(t->labels.size() == 4);
  const auto* d = cli::find_preset("detox");
  REQUIRE(d);
  CHECK(d->omega == 120.0);
  CHECK(std::abs(d->alpha - 1.0 / 3.0) < 1e-15);
  CHECK_FALSE(d->prompt_augmentation);
  CHECK(cli::find_preset("poetry") == nullptr);
}

TEST_CASE("generate with the sentiment preset") {
  Workspace ws;
  const std::vector<std::string> args{"generate", "--model", ws.path("toy.stwb"), "--vocab", ws.path("vocab.json"),
                                      "--preset", "sentiment", "--attribute", "positive", "--prompt", "The child",
                                      "--seed", "7", "--max-len", "50", "--json", ws.path("a.json"),
                                      "--trace", ws.path("a.csv")};
  const auto r = run(args);
  REQUIRE(r.code == 0);
  CHECK(!r.out.empty());
  CHECK(r.err.empty());
  const auto j = nlohmann::json::parse(slurp(ws.path("a.json")));
  CHECK(j["config"]["omega"] == 140.0);
  CHECK(j["config"]["alpha"] == 0.5);
  CHECK(j["config"]["prefixes"][0]["text"] == "Very positive :");
  CHECK(j["config"]["prefixes"][0]["l_pre"] == 3);
  CHECK(j["text"].get<std::string>() + "\n" == r.out);

  auto again = args;
  again[again.size() - 3] = ws.path("b.json");
  again[again.size() - 1] = ws.path("b.csv");
  const auto r2 = run(again);
  REQUIRE(r2.code == 0);
  CHECK(r2.out == r.out);
  CHECK(slurp(ws.path("a.json")) == slurp(ws.path("b.json")));
  CHECK(slurp(ws.path("a.csv")) == slurp(ws.path("b.csv")));
  CHECK(!eval::parse_trace(slurp(ws.path("a.csv"))).empty());
}

TEST_CASE("flags override presets") {
  Workspace ws;
  const auto r = run({"generate", "--model", ws.path("toy.stwb"), "--vocab", ws.path("vocab.json"), "--preset",
                      "sentiment", "--attribute", "negative", "--prompt", "The child", "--omega", "3", "--alpha",
                      "0", "--denom", "region+prompt", "--k", "5", "--max-len", "4", "--no-reconstruct",
                      "--json", ws.path("o.json")});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(ws.path("o.json")));
  CHECK(j["config"]["omega"] == 3.0);
  CHECK(j["config"]["alpha"] == 0.0);
  CHECK(j["config"]["denom"] == "region+prompt");
  CHECK(j["config"]["top_k"] == 5);
  CHECK(j["config"]["reconstruction"] == false);
  CHECK(j["tokens"].size() <= 4);
}

TEST_CASE("detox preset turns prompt augmentation off") {
  Workspace ws;
  const auto r = run({"generate", "--model", ws.path("toy.stwb"), "--vocab", ws.path("vocab.json"), "--preset",
                      "detox", "--attribute", "nontoxic", "--prompt", "The child", "--prefix",
                      "nontoxic=" + ws.path("nontoxic.stwb"), "--prefix", "toxic=" + ws.path("toxic.stwb"),
                      "--max-len", "5", "--json", ws.path("d.json")});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(ws.path("d.json")));
  CHECK(j["config"]["prompt_augmentation"] == false);
  CHECK(j["config"]["prefix_kind"] == "soft");
  CHECK(std::abs(j["config"]["alpha"].get<double>() - 1.0 / 3.0) < 1e-15);
}

TEST_CASE("hard prefixes given as text") {
  Workspace ws;
  const auto r = run({"generate", "--model", ws.path("toy.stwb"), "--vocab", ws.path("vocab.json"), "--attribute",
                      "good", "--prompt", "The", "--prefix", "good=text:Very positive :", "--prefix",
                      "bad=text:Very negative :", "--max-len", "3"});
  CHECK(r.code == 0);
}

TEST_CASE("usage errors exit 2 and name the flag or file") {
  Workspace ws;
  const auto banana = run({"generate", "--model", ws.path("toy.stwb"), "--vocab", ws.path("vocab.json"),
                           "--preset", "sentiment", "--attribute", "positive", "--prompt", "x", "--alpha", "banana"});
  CHECK(banana.code == 2);
  CHECK(banana.err.find("--alpha") != std::string::npos);

  const auto missing = run({"generate", "--model", ws.path("nope.stwb"), "--vocab", ws.path("vocab.json"),
                            "--preset", "sentiment", "--attribute", "positive", "--prompt", "x"});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("nope.stwb") != std::string::npos);

  CHECK(run({"generate", "--bogus"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"--help"}).code == 0);

  const auto noprefix = run({"generate", "--model", ws.path("toy.stwb"), "--vocab", ws.path("vocab.json"),
                             "--attribute", "positive", "--prompt", "x"});
  CHECK(noprefix.code == 2);
  CHECK(noprefix.err.find("--prefix") != std::string::npos);
}

TEST_CASE("runtime errors exit 1") {
  Workspace ws;
  std::ofstream(ws.path("junk.stwb")) << "not a model";
  const auto r = run({"generate", "--model", ws.path("junk.stwb"), "--vocab", ws.path("vocab.json"), "--preset",
                      "sentiment", "--attribute", "positive", "--prompt", "x"});
  CHECK(r.code == 1);
  CHECK(!r.err.empty());
  const auto target = run({"generate", "--model", ws.path("toy.stwb"), "--vocab", ws.path("vocab.json"),
                           "--preset", "sentiment", "--attribute", "neutral", "--prompt", "x"});
  CHECK(target.code == 1);
}

TEST_CASE("trace subcommand writes paired CSVs") {
  Workspace ws;
  const auto r = run({"trace", "--model", ws.path("toy.stwb"), "--vocab", ws.path("vocab.json"), "--preset",
                      "sentiment", "--attribute", "positive", "--prompt", "The child", "--max-len", "10",
                      "--out-on", ws.path("on.csv"), "--out-off", ws.path("off.csv")});
  REQUIRE(r.code == 0);
  const auto on = eval::parse_trace(slurp(ws.path("on.csv")));
  const auto off = eval::parse_trace(slurp(ws.path("off.csv")));
  REQUIRE(on.size() == off.size());
  bool any_higher = false;
  for (std::size_t i = 0; i < on.size(); ++i) {
    CHECK(on[i].step == off[i].step);
    CHECK(on[i].stream == off[i].stream);
    if (on[i].region == "prefix" && on[i].l_gen > 0 && on[i].mean_attention > off[i].mean_attention) any_higher = true;
  }
  CHECK(any_higher);
}

TEST_CASE("train-prefix and eval subcommands") {
  Workspace ws;
  std::ofstream(ws.path("corpus.txt")) << "good good w20\ngood w21 good\nw22 good good\n";
  const auto t = run({"train-prefix", "--model", ws.path("toy.stwb"), "--vocab", ws.path("vocab.json"), "--corpus",
                      ws.path("corpus.txt"), "--label", "positive", "--out", ws.path("p.stwb"), "--prefix-len", "3",
                      "--steps", "5", "--batch", "2", "--log", ws.path("loss.csv")});
  REQUIRE(t.code == 0);
  const auto p = model::load_prefix_file(ws.path("p.stwb"), "positive");
  CHECK(p.length() == 3);
  CHECK(slurp(ws.path("loss.csv")).rfind("step,loss\n0,", 0) == 0);

  std::ofstream(ws.path("train.tsv")) << "pos\tgood good w20\nneg\tbad bad w20\n";
  std::ofstream(ws.path("texts.tsv")) << "pos\tgood w21 good\nneg\tbad w22\n";
  const auto e = run({"eval", "--texts", ws.path("texts.tsv"), "--train", ws.path("train.tsv"), "--vocab",
                      ws.path("vocab.json"), "--model", ws.path("toy.stwb")});
  REQUIRE(e.code == 0);
  const auto j = nlohmann::json::parse(e.out);
  CHECK(j["accuracy"] == 1.0);
  CHECK(j["n_texts"] == 2);
  CHECK(j["self_nll"].is_number());
  CHECK(j["dist"]["1"] == doctest::Approx((2.0 / 3.0 + 1.0) / 2.0));
}
