#pragma once

// STWB tensor container:
//   "STWB" | u32 version (=1) | u32 header length | UTF-8 JSON header | payload
// The header is {"config": {...}, "tensors": [{name, shape, dtype: "f32",
// offset}]}; offsets are byte offsets into the payload, which holds
// little-endian f32 values in row-major order.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dtpa/numkernel.hpp"
#include "json.hpp"

namespace dtpa::model::stwb {

inline constexpr std::uint32_t kVersion = 1;

struct NamedTensor {
  std::string name;
  num::Tensor tensor;
};

struct Container {
  nlohmann::json config = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  // nullptr if absent.
  const num::Tensor* find(std::string_view name) const;
};

// Values are narrowed to f32 on write.
std::vector<std::uint8_t> encode(const Container& container);

// Throws FormatError (bad magic, unsupported version, malformed header,
// truncated payload, non-finite value); messages name the tensor involved.
Container decode(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes);

}  // namespace dtpa::model::stwb
