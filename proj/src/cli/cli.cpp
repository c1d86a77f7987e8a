#include "dtpa/cli.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "dtpa/decode.hpp"
#include "dtpa/errors.hpp"
#include "dtpa/evalkit.hpp"
#include "dtpa/model.hpp"
#include "dtpa/prefixtrain.hpp"
#include "dtpa/vocab.hpp"
#include "json.hpp"

namespace dtpa::cli {
namespace {

using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenerateFlags {
  std::string model_path;
  std::string vocab_path;
  std::vector<std::string> prefixes;
  std::string preset;
  std::string attribute;
  std::string prompt;
  std::optional<double> omega;
  std::optional<double> alpha;
  std::string denom = "region";
  std::size_t k = 200;
  std::size_t max_len = 50;
  std::uint64_t seed = 0;
  bool no_reconstruct = false;
  bool no_prompt_aug = false;
  std::string trace_path;
  std::string json_path;
  std::string trace_off_path;
  std::string trace_on_path;
};

struct PrefixSource {
  std::string label;
  std::string text;  // hard
  std::string path;  // soft
};

void add_generation_flags(CLI::App* cmd, GenerateFlags& f) {
  cmd->add_option("--model", f.model_path, "STWB model weights")
      ->required()->check(CLI::ExistingFile);
  cmd->add_option("--vocab", f.vocab_path, "Vocabulary JSON")
      ->required()->check(CLI::ExistingFile);
  cmd->add_option("--prefix", f.prefixes,
                  "Class prefix: label=path (soft) or label=text:... (hard); repeatable");
  cmd->add_option("--preset", f.preset, "Task preset")
      ->check(CLI::IsMember({"sentiment", "topic", "detox"}));
  cmd->add_option("--attribute", f.attribute, "Target attribute label")->required();
  cmd->add_option("--prompt", f.prompt, "Prompt text")->required();
  cmd->add_option("--omega", f.omega, "Control strength exponent");
  cmd->add_option("--alpha", f.alpha, "Attention scaling exponent");
  cmd->add_option("--denom", f.denom, "Prefix bias denominator")
      ->check(CLI::IsMember({"region", "region+prompt"}));
  cmd->add_option("--k", f.k, "Top-k")->check(CLI::PositiveNumber);
  cmd->add_option("--max-len", f.max_len, "Maximum new tokens")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Sampling seed");
  cmd->add_flag("--no-reconstruct", f.no_reconstruct, "Disable inverse-log reconstruction");
  cmd->add_flag("--no-prompt-aug", f.no_prompt_aug, "Disable prompt augmentation");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << text;
}

std::vector<PrefixSource> parse_prefixes(const std::vector<std::string>& specs) {
  std::vector<PrefixSource> out;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw UsageError("--prefix: expected label=path or label=text:..., got '" + s + "'");
    }
    PrefixSource p;
    p.label = s.substr(0, eq);
    const std::string rest = s.substr(eq + 1);
    if (rest.rfind("text:", 0) == 0) {
      p.text = rest.substr(5);
    } else {
      p.path = rest;
    }
    out.push_back(std::move(p));
  }
  return out;
}

struct Prepared {
  model::ModelWeights model;
  model::Vocabulary vocab;
  std::vector<attribute::AttributePrefix> prefixes;
  decode::DecodeConfig config;
  json echo;
};

Prepared prepare(const GenerateFlags& f) {
  Prepared p;
  p.model = model::load_model_file(f.model_path);
  p.vocab = model::Vocabulary::from_file(f.vocab_path);

  const TaskPreset* preset = f.preset.empty() ? nullptr : find_preset(f.preset);
  auto& c = p.config;
  if (preset) {
    c.omega = preset->omega;
    c.alpha = preset->alpha;
    c.prefix_kind = preset->prefix_kind;
    c.prompt_augmentation = preset->prompt_augmentation;
  }
  if (f.omega) c.omega = *f.omega;
  if (f.alpha) c.alpha = *f.alpha;
  if (f.no_prompt_aug) c.prompt_augmentation = false;
  c.reconstruction = !f.no_reconstruct;
  c.denom = f.denom == "region" ? intervene::DenomMode::Region
                                : intervene::DenomMode::RegionPlusPrompt;
  c.top_k = f.k;
  c.max_new_tokens = f.max_len;
  c.seed = f.seed;
  c.target = f.attribute;

  std::vector<PrefixSource> sources = parse_prefixes(f.prefixes);
  if (sources.empty()) {
    if (!preset) throw UsageError("--prefix: at least two class prefixes (or a --preset) required");
    if (preset->prefix_kind == attribute::PrefixKind::Soft) {
      throw UsageError("--prefix: preset '" + preset->name +
                       "' uses soft prefixes; pass label=path for every class");
    }
    for (std::size_t i = 0; i < preset->labels.size(); ++i) {
      sources.push_back({preset->labels[i], preset->hard_prefixes[i], ""});
    }
  }

  json prefix_echo = json::array();
  for (const auto& s : sources) {
    if (s.path.empty()) {
      p.prefixes.push_back(attribute::AttributePrefix::hard(s.label, model::tokenize(s.text, p.vocab)));
      prefix_echo.push_back({{"label", s.label}, {"kind", "hard"}, {"text", s.text},
                             {"l_pre", p.prefixes.back().length()}});
    } else {
      p.prefixes.push_back(model::load_prefix_file(s.path, s.label));
      prefix_echo.push_back({{"label", s.label}, {"kind", "soft"}, {"path", s.path},
                             {"l_pre", p.prefixes.back().length()}});
    }
  }
  // The supplied prefixes decide the kind; a mixed set is rejected by generate.
  c.prefix_kind = p.prefixes.front().kind();

  p.echo = c.to_json();
  p.echo["preset"] = preset ? json(preset->name) : json(nullptr);
  p.echo["prefixes"] = std::move(prefix_echo);
  p.echo["prompt"] = f.prompt;
  return p;
}

void cmd_generate(const GenerateFlags& f, std::ostream& out) {
  Prepared p = prepare(f);
  const auto result = decode::generate(p.model, p.prefixes, p.vocab, f.prompt, p.config);
  out << result.text << "\n";
  if (!f.json_path.empty()) {
    json j = decode::to_json(result);
    j["config"] = p.echo;
    write_text(f.json_path, j.dump(2) + "\n");
  }
  if (!f.trace_path.empty()) write_text(f.trace_path, eval::export_trace(result.trace));
}

void cmd_trace(const GenerateFlags& f, std::ostream& out) {
  Prepared p = prepare(f);
  const auto on = decode::generate(p.model, p.prefixes, p.vocab, f.prompt, p.config);
  decode::DecodeConfig off_config = p.config;
  off_config.alpha = 0.0;
  decode::GenerateOptions forced;
  forced.forced_tokens = on.tokens;
  const auto off = decode::generate(p.model, p.prefixes, p.vocab, f.prompt, off_config, forced);
  write_text(f.trace_on_path, eval::export_trace(on.trace));
  write_text(f.trace_off_path, eval::export_trace(off.trace));
  out << on.text << "\n";
}

struct TrainFlags {
  std::string model_path, vocab_path, corpus_path, label = "attribute", out_path, log_path;
  std::size_t prefix_len = 20;
  double lr = 0.1;
  std::size_t steps = 100;
  std::size_t batch = 8;
  std::uint64_t seed = 0;
  std::optional<double> clip;
};

std::vector<std::string> read_lines(const std::string& path) {
  std::istringstream in(read_text(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

void cmd_train(const TrainFlags& f, std::ostream& out) {
  const auto model = model::load_model_file(f.model_path);
  const auto vocab = model::Vocabulary::from_file(f.vocab_path);
  prefixtrain::Corpus corpus{f.label, {}};
  for (const auto& line : read_lines(f.corpus_path)) {
    auto ids = model::tokenize(line, vocab);
    if (!ids.empty()) corpus.sequences.push_back(std::move(ids));
  }
  prefixtrain::TrainConfig config;
  config.prefix_length = f.prefix_len;
  config.learning_rate = f.lr;
  config.steps = f.steps;
  config.batch_size = f.batch;
  config.seed = f.seed;
  config.clip_norm = f.clip;
  const auto result = prefixtrain::train_soft_prefix(model, corpus, config);
  model::stwb::write_file(f.out_path, model::save_prefix(result.prefix));
  if (!f.log_path.empty()) write_text(f.log_path, prefixtrain::loss_log_csv(result.losses));
  out << "trained prefix '" << f.label << "' (" << result.losses.size()
      << " steps, final batch loss " << result.losses.back() << ")\n";
}

struct EvalFlags {
  std::string texts_path, train_path, vocab_path, model_path, json_path;
};

struct LabeledLines {
  std::vector<std::string> labels;
  std::vector<std::pair<std::string, std::string>> rows;  // label, text
};

LabeledLines read_labeled(const std::string& path) {
  LabeledLines out;
  for (const auto& line : read_lines(path)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError(path + ": expected label<TAB>text lines");
    out.rows.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

void cmd_eval(const EvalFlags& f, std::ostream& out) {
  const auto vocab = model::Vocabulary::from_file(f.vocab_path);
  const LabeledLines train = read_labeled(f.train_path);
  const LabeledLines texts = read_labeled(f.texts_path);

  std::vector<std::string> labels;
  std::map<std::string, std::size_t> index;
  for (const auto& [label, text] : train.rows) {
    if (index.emplace(label, labels.size()).second) labels.push_back(label);
  }
  auto to_labeled = [&](const LabeledLines& src) {
    std::vector<eval::LabeledText> v;
    for (const auto& [label, text] : src.rows) {
      auto it = index.find(label);
      if (it == index.end()) throw FormatError("label '" + label + "' absent from training file");
      v.push_back({it->second, model::tokenize(text, vocab)});
    }
    return v;
  };
  const auto train_set = to_labeled(train);
  const auto eval_set = to_labeled(texts);
  const auto classifier = eval::fit_classifier(train_set, labels, vocab.size());

  std::vector<std::vector<std::string>> pieces;
  std::vector<std::vector<TokenId>> ids;
  for (const auto& [label, text] : texts.rows) {
    std::istringstream s(text);
    std::vector<std::string> words{std::istream_iterator<std::string>(s),
                                   std::istream_iterator<std::string>()};
    pieces.push_back(std::move(words));
  }
  for (const auto& t : eval_set) ids.push_back(t.tokens);

  eval::EvalReport report;
  report.dist1 = eval::dist_n<std::string>(pieces, 1);
  report.dist2 = eval::dist_n<std::string>(pieces, 2);
  report.dist3 = eval::dist_n<std::string>(pieces, 3);
  report.accuracy = eval::classify_accuracy(classifier, eval_set);
  report.n_texts = eval_set.size();
  if (!f.model_path.empty()) {
    report.self_nll = eval::self_nll(model::load_model_file(f.model_path), ids);
  }
  const std::string text = eval::to_json(report).dump(2) + "\n";
  if (f.json_path.empty()) {
    out << text;
  } else {
    write_text(f.json_path, text);
  }
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attribute-controlled text generation with prefix attention scaling", "dtpa"};
  app.require_subcommand(1);

  GenerateFlags gen;
  auto* generate = app.add_subcommand("generate", "Generate attribute-controlled text");
  add_generation_flags(generate, gen);
  generate->add_option("--trace", gen.trace_path, "Write attention trace CSV");
  generate->add_option("--json", gen.json_path, "Write generation result JSON");

  GenerateFlags tr;
  auto* trace = app.add_subcommand("trace", "Teacher-forced attention traces with alpha on/off");
  add_generation_flags(trace, tr);
  trace->add_option("--out-on", tr.trace_on_path, "Trace CSV with the configured alpha")->required();
  trace->add_option("--out-off", tr.trace_off_path, "Trace CSV with alpha = 0")->required();

  TrainFlags tf;
  auto* train = app.add_subcommand("train-prefix", "Train a soft prefix on an attribute corpus");
  train->add_option("--model", tf.model_path)->required()->check(CLI::ExistingFile);
  train->add_option("--vocab", tf.vocab_path)->required()->check(CLI::ExistingFile);
  train->add_option("--corpus", tf.corpus_path, "One text per line")->required()->check(CLI::ExistingFile);
  train->add_option("--label", tf.label);
  train->add_option("--out", tf.out_path, "Prefix checkpoint path")->required();
  train->add_option("--prefix-len", tf.prefix_len)->check(CLI::PositiveNumber);
  train->add_option("--lr", tf.lr);
  train->add_option("--steps", tf.steps)->check(CLI::PositiveNumber);
  train->add_option("--batch", tf.batch)->check(CLI::PositiveNumber);
  train->add_option("--seed", tf.seed);
  train->add_option("--clip", tf.clip);
  train->add_option("--log", tf.log_path, "Write step,loss CSV");

  EvalFlags ef;
  auto* evaluate = app.add_subcommand("eval", "Evaluate generated texts");
  evaluate->add_option("--texts", ef.texts_path, "label<TAB>text per line")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--train", ef.train_path, "Classifier training texts, label<TAB>text")
      ->required()->check(CLI::ExistingFile);
  evaluate->add_option("--vocab", ef.vocab_path)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--model", ef.model_path, "Raw model for self-NLL")->check(CLI::ExistingFile);
  evaluate->add_option("--json", ef.json_path, "Write report here instead of stdout");

  std::vector<const char*> argv{"dtpa"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (generate->parsed()) cmd_generate(gen, out);
    if (trace->parsed()) cmd_trace(tr, out);
    if (train->parsed()) cmd_train(tf, out);
    if (evaluate->parsed()) cmd_eval(ef, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace dtpa::cli
