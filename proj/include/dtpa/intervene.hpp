#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtpa/types.hpp"

namespace dtpa::intervene {

enum class RegionKind { Prefix, Prompt };

// Region: bias denominator is the region's own length.
// RegionPlusPrompt: prefix length plus prompt length; prefix region only.
enum class DenomMode { Region, RegionPlusPrompt };

struct InterventionSpec {
  RegionKind region = RegionKind::Prefix;
  double alpha = 0.0;
  DenomMode denom = DenomMode::Region;

  // Throws ConfigError on a non-finite or negative alpha, or on
  // RegionPlusPrompt paired with the prompt region.
  void validate() const;
};

// Half-open index interval [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return end == begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
};

// alpha * ln(l / l_region). Throws DomainError if l_region == 0 or l < l_region.
double bias(double l, double l_region, double alpha);

// softmax(raw + bias on region) for a row of length l = raw.size(). The bias
// denominator is region.size() (Region) or region.size() + prompt_length
// (RegionPlusPrompt). Masked entries stay at exactly 0.
std::vector<double> scaled_row(std::span<const double> raw, IndexRange region,
                               double alpha, DenomMode mode,
                               std::size_t prompt_length = 0);

// Same quantity evaluated as (l/den)^a e^z / ((l/den)^a sum_region e^z + sum_rest e^z).
// Kept as an independent route for cross-checking scaled_row.
std::vector<double> closed_form_row(std::span<const double> raw,
                                    IndexRange region, double alpha,
                                    DenomMode mode,
                                    std::size_t prompt_length = 0);

// An intervention resolved against the region map of one attention row.
struct ResolvedIntervention {
  IndexRange region;
  double denominator = 0.0;
  double alpha = 0.0;
};

// Region positions and denominator for a row covering `regions.total()`
// positions. Only the part of the region already consumed counts (prompt
// prefill grows it token by token). nullopt when there is nothing to bias.
std::optional<ResolvedIntervention> resolve(const InterventionSpec& spec,
                                            const RegionMap& regions);

// Biases `logits` in place per `resolved` (if any), then normalizes it.
void normalize_row(std::span<double> logits,
                   const std::optional<ResolvedIntervention>& resolved);

// Prefix attention when the last token attends equally to every position.
double uniform_prefix_attention(std::size_t l_pre, std::size_t l_pro,
                                std::size_t l_gen);

// Last-token attention probabilities of every layer and head for one step.
class AttentionRows {
 public:
  AttentionRows() = default;
  AttentionRows(std::size_t n_layers, std::size_t n_heads, std::size_t length);

  std::size_t n_layers() const { return n_layers_; }
  std::size_t n_heads() const { return n_heads_; }
  std::size_t length() const { return length_; }

  std::span<double> row(std::size_t layer, std::size_t head);
  std::span<const double> row(std::size_t layer, std::size_t head) const;

 private:
  std::size_t n_layers_ = 0;
  std::size_t n_heads_ = 0;
  std::size_t length_ = 0;
  std::vector<double> data_;
};

// Unweighted mean over layers and heads of the probability mass on `region`.
double mean_region_attention(const AttentionRows& rows, IndexRange region);

struct AttentionTraceRecord {
  std::size_t step = 0;
  std::size_t l_gen = 0;
  std::string stream;
  std::string region;
  double mean_attention = 0.0;

  friend bool operator==(const AttentionTraceRecord&,
                         const AttentionTraceRecord&) = default;
};

std::string_view region_name(RegionKind kind);

}  // namespace dtpa::intervene
