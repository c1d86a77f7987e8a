#include "dtpa/cli.hpp"

namespace dtpa::cli {
namespace {

using attribute::PrefixKind;

const std::vector<TaskPreset>& table() {
  static const std::vector<TaskPreset> kPresets{
      {"sentiment", 140.0, 1.0 / 2.0, PrefixKind::Hard, true,
       {"positive", "negative"},
       {"Very positive :", "Very negative :"}},
      {"topic", 60.0, 1.0 / 2.0, PrefixKind::Soft, true,
       {"world", "sports", "business", "science"},
       {"World-related :", "Sports-related :", "Business-related :", "Science-related :"}},
      {"detox", 120.0, 1.0 / 3.0, PrefixKind::Soft, false,
       {"nontoxic", "toxic"},
       {"Very nontoxic :", "Very toxic :"}},
  };
  return kPresets;
}

}  // namespace

std::span<const TaskPreset> presets() { return table(); }

const TaskPreset* find_preset(std::string_view name) {
  for (const auto& p : table()) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

}  // namespace dtpa::cli
