// Writes a seeded random toy model and a matching vocabulary.
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dtpa/model.hpp"
#include "dtpa/vocab.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write a random toy model and vocabulary", "make_toy"};
  std::string model_path = "toy.stwb";
  std::string vocab_path = "vocab.json";
  dtpa::model::ModelConfig config;
  std::uint64_t seed = 0;
  double scale = 0.2;
  app.add_option("--model", model_path);
  app.add_option("--vocab", vocab_path);
  app.add_option("--layers", config.n_layers)->check(CLI::PositiveNumber);
  app.add_option("--heads", config.n_heads)->check(CLI::PositiveNumber);
  app.add_option("--d-model", config.d_model)->check(CLI::PositiveNumber);
  app.add_option("--vocab-size", config.vocab_size)->check(CLI::Range(8, 1 << 20));
  app.add_option("--max-positions", config.max_positions)->check(CLI::PositiveNumber);
  app.add_option("--seed", seed);
  app.add_option("--scale", scale);
  CLI11_PARSE(app, argc, argv);

  try {
    config.validate();
    // A few readable words first so hard prefixes tokenize; the rest are w<i>.
    std::vector<std::string> words = {"Very", "positive", "negative", ":", "nontoxic", "toxic",
                                      "The", "child", "good", "bad"};
    const std::size_t n_words = config.vocab_size - dtpa::model::Vocabulary::kReserved;
    words.resize(std::min(words.size(), n_words));
    for (std::size_t i = words.size(); i < n_words; ++i) words.push_back("w" + std::to_string(i));
    const auto vocab = dtpa::model::Vocabulary::with_words(words);
    const auto model = dtpa::model::random_model(config, seed, scale);
    dtpa::model::save_model_file(model, model_path);
    std::ofstream(vocab_path, std::ios::binary) << vocab.to_json();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
