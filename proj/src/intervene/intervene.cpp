#include "dtpa/intervene.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dtpa/errors.hpp"
#include "dtpa/numkernel.hpp"

namespace dtpa::intervene {
namespace {

double denominator_for(IndexRange region, DenomMode mode,
                       std::size_t prompt_length) {
  return mode == DenomMode::Region
             ? static_cast<double>(region.size())
             : static_cast<double>(region.size() + prompt_length);
}

void check_region(std::span<const double> raw, IndexRange region,
                  double alpha) {
  if (region.begin > region.end || region.end > raw.size()) {
    throw DomainError("intervention region out of bounds");
  }
  if (region.empty() && alpha != 0.0) {
    throw DomainError("empty intervention region with nonzero alpha");
  }
}

}  // namespace

void InterventionSpec::validate() const {
  if (!std::isfinite(alpha) || alpha < 0.0) {
    throw ConfigError("intervention alpha must be finite and >= 0");
  }
  if (denom == DenomMode::RegionPlusPrompt && region != RegionKind::Prefix) {
    throw ConfigError("region+prompt denominator is only valid for the prefix region");
  }
}

double bias(double l, double l_region, double alpha) {
  if (l_region <= 0.0) throw DomainError("bias: region length is zero");
  if (l < l_region) throw DomainError("bias: total length below region length");
  if (alpha == 0.0) return 0.0;
  return alpha * std::log(l / l_region);
}

std::vector<double> scaled_row(std::span<const double> raw, IndexRange region,
                               double alpha, DenomMode mode,
                               std::size_t prompt_length) {
  check_region(raw, region, alpha);
  std::vector<double> out(raw.begin(), raw.end());
  if (alpha == 0.0) {
    num::softmax_inplace(out);
    return out;
  }
  normalize_row(out, ResolvedIntervention{
                         region, denominator_for(region, mode, prompt_length),
                         alpha});
  return out;
}

std::vector<double> closed_form_row(std::span<const double> raw,
                                    IndexRange region, double alpha,
                                    DenomMode mode, std::size_t prompt_length) {
  check_region(raw, region, alpha);
  if (raw.empty()) throw DomainError("closed_form_row of empty sequence");
  const double l = static_cast<double>(raw.size());
  const double factor =
      alpha == 0.0
          ? 1.0
          : std::pow(l / denominator_for(region, mode, prompt_length), alpha);
  double mx = num::kMasked;
  for (double z : raw) mx = std::max(mx, z);
  if (num::is_masked(mx)) throw DomainError("closed_form_row: all entries masked");

  double region_sum = 0.0;
  double rest_sum = 0.0;
  std::vector<double> e(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    e[i] = num::is_masked(raw[i]) ? 0.0 : std::exp(raw[i] - mx);
    (region.contains(i) ? region_sum : rest_sum) += e[i];
  }
  const double denom = factor * region_sum + rest_sum;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    e[i] = (region.contains(i) ? factor * e[i] : e[i]) / denom;
  }
  return e;
}

std::optional<ResolvedIntervention> resolve(const InterventionSpec& spec,
                                            const RegionMap& regions) {
  if (spec.alpha == 0.0) return std::nullopt;
  ResolvedIntervention r;
  r.alpha = spec.alpha;
  if (spec.region == RegionKind::Prefix) {
    r.region = {0, regions.l_pre};
    r.denominator = spec.denom == DenomMode::Region
                        ? static_cast<double>(regions.l_pre)
                        : static_cast<double>(regions.l_pre + regions.l_pro);
  } else {
    r.region = {regions.l_pre, regions.l_pre + regions.l_pro};
    r.denominator = static_cast<double>(regions.l_pro);
  }
  if (r.region.empty()) return std::nullopt;
  return r;
}

void normalize_row(std::span<double> logits,
                   const std::optional<ResolvedIntervention>& resolved) {
  if (resolved) {
    const double b = bias(static_cast<double>(logits.size()),
                          resolved->denominator, resolved->alpha);
    for (std::size_t i = resolved->region.begin; i < resolved->region.end; ++i) {
      logits[i] += b;
    }
  }
  num::softmax_inplace(logits);
}

double uniform_prefix_attention(std::size_t l_pre, std::size_t l_pro,
                                std::size_t l_gen) {
  return static_cast<double>(l_pre) / static_cast<double>(l_pre + l_pro + l_gen);
}

AttentionRows::AttentionRows(std::size_t n_layers, std::size_t n_heads,
                             std::size_t length)
    : n_layers_(n_layers),
      n_heads_(n_heads),
      length_(length),
      data_(n_layers * n_heads * length, 0.0) {}

std::span<double> AttentionRows::row(std::size_t layer, std::size_t head) {
  return std::span<double>(data_).subspan((layer * n_heads_ + head) * length_,
                                          length_);
}

std::span<const double> AttentionRows::row(std::size_t layer,
                                           std::size_t head) const {
  return std::span<const double>(data_).subspan(
      (layer * n_heads_ + head) * length_, length_);
}

double mean_region_attention(const AttentionRows& rows, IndexRange region) {
  if (region.begin > region.end || region.end > rows.length()) {
    throw DomainError("mean_region_attention: region out of bounds");
  }
  const std::size_t count = rows.n_layers() * rows.n_heads();
  if (count == 0) throw DomainError("mean_region_attention: no rows");
  double total = 0.0;
  for (std::size_t l = 0; l < rows.n_layers(); ++l) {
    for (std::size_t h = 0; h < rows.n_heads(); ++h) {
      auto r = rows.row(l, h);
      double mass = 0.0;
      for (std::size_t i = region.begin; i < region.end; ++i) mass += r[i];
      total += mass;
    }
  }
  return total / static_cast<double>(count);
}

std::string_view region_name(RegionKind kind) {
  return kind == RegionKind::Prefix ? "prefix" : "prompt";
}

}  // namespace dtpa::intervene
