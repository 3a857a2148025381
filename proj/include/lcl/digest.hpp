#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lcl/tensor.hpp"

namespace lcl {

/// Lowercase hex SHA-256 of raw bytes.
std::string sha256_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);

/// Canonical parameter serialization: for each entry in ParamSet order,
/// u32 name length, UTF-8 name, u32 rank, u32 dims, little-endian f64 payload.
/// The trainable flag is not part of the identity of the weights.
std::string canonical_bytes(const ParamSet& params);

/// 64 hex characters; equal params <=> equal digests.
std::string params_digest(const ParamSet& params);

}  // namespace lcl
