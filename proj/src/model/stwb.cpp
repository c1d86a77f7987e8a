#include "dtpa/stwb.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dtpa/errors.hpp"

namespace dtpa::model::stwb {
namespace {

constexpr char kMagic[4] = {'S', 'T', 'W', 'B'};

std::uint32_t load_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

const num::Tensor* Container::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.tensor;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode(const Container& container) {
  nlohmann::json header;
  header["config"] = container.config;
  header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : container.tensors) {
    header["tensors"].push_back({{"name", t.name},
                                 {"shape", t.tensor.shape()},
                                 {"dtype", "f32"},
                                 {"offset", offset}});
    offset += t.tensor.size() * sizeof(float);
  }
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(12 + text.size() + offset);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  store_u32(out, kVersion);
  store_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& t : container.tensors) {
    for (double v : t.tensor.data()) {
      store_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  return out;
}

Container decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("STWB: bad magic");
  }
  const std::uint32_t version = load_u32(bytes.data() + 4);
  if (version != kVersion) {
    throw FormatError("STWB: unsupported version " + std::to_string(version));
  }
  const std::uint32_t header_len = load_u32(bytes.data() + 8);
  if (bytes.size() - 12 < header_len) throw FormatError("STWB: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 12,
                                   bytes.begin() + 12 + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("STWB: malformed header: ") + e.what());
  }
  if (!header.is_object() || !header.contains("tensors") ||
      !header["tensors"].is_array()) {
    throw FormatError("STWB: header lacks a tensors array");
  }

  const auto payload = bytes.subspan(12 + header_len);
  Container c;
  c.config = header.value("config", nlohmann::json::object());
  for (const auto& entry : header["tensors"]) {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    try {
      name = entry.at("name").get<std::string>();
      shape = entry.at("shape").get<std::vector<std::size_t>>();
      offset = entry.at("offset").get<std::size_t>();
      if (entry.at("dtype").get<std::string>() != "f32") {
        throw FormatError("STWB: tensor '" + name + "' has unsupported dtype");
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("STWB: malformed tensor entry '" + name + "': " + e.what());
    }
    const std::size_t count = num::shape_size(shape);
    if (offset > payload.size() || payload.size() - offset < count * 4) {
      throw FormatError("STWB: truncated payload in tensor '" + name + "'");
    }
    std::vector<double> data(count);
    const std::uint8_t* p = payload.data() + offset;
    for (std::size_t i = 0; i < count; ++i) {
      const float f = std::bit_cast<float>(load_u32(p + 4 * i));
      if (!std::isfinite(f)) {
        throw FormatError("STWB: non-finite value in tensor '" + name + "'");
      }
      data[i] = f;
    }
    c.tensors.push_back({name, num::Tensor(std::move(shape), std::move(data))});
  }
  return c;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace dtpa::model::stwb
