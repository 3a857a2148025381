#pragma once

// Named-tensor container shared by checkpoints, datasets and pair sets.
//
// Layout (all integers little-endian):
//   "LCLB"                       4-byte magic
//   u32 version                  kContainerVersion
//   u32 record_count
//   record_count x {
//     u32 name_length, name (UTF-8)
//     u32 rank, u32 dims[rank]
//     f64 payload[prod(dims)]
//   }
//   u64 metadata_length, metadata (UTF-8 JSON object)

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lcl/tensor.hpp"

namespace lcl {

inline constexpr char kContainerMagic[4] = {'L', 'C', 'L', 'B'};
inline constexpr std::uint32_t kContainerVersion = 1;

struct Container {
  std::vector<std::pair<std::string, Tensor>> records;
  nlohmann::json metadata = nlohmann::json::object();

  const Tensor& record(const std::string& name) const;
};

std::string encode_container(const Container& c);
/// Throws FormatError naming the offending section on any structural defect.
Container decode_container(std::string_view bytes);

void write_file(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

}  // namespace lcl
