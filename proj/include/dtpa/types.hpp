#pragma once

#include <cstddef>
#include <cstdint>

namespace dtpa {

using TokenId = std::int32_t;

// Positions of one stream split into attribute prefix, prompt and generated
// continuation, in that order.
struct RegionMap {
  std::size_t l_pre = 0;
  std::size_t l_pro = 0;
  std::size_t l_gen = 0;

  std::size_t total() const { return l_pre + l_pro + l_gen; }

  friend bool operator==(const RegionMap&, const RegionMap&) = default;
};

}  // namespace dtpa
