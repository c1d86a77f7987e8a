#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtpa/prefix.hpp"

namespace dtpa::cli {

// Per-task defaults for omega, alpha, prefix type and prompt augmentation.
struct TaskPreset {
  std::string name;
  double omega;
  double alpha;
  attribute::PrefixKind prefix_kind;
  bool prompt_augmentation;
  std::vector<std::string> labels;
  // Hard prefix text per label, whitespace-tokenizable (punctuation split off).
  std::vector<std::string> hard_prefixes;
};

std::span<const TaskPreset> presets();
// nullptr if unknown.
const TaskPreset* find_preset(std::string_view name);

// Subcommands: generate | train-prefix | trace | eval.
// Returns 0 on success, 2 on usage errors, 1 on runtime errors.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace dtpa::cli
