#include "lcl/digest.hpp"

#include <openssl/sha.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lcl/errors.hpp"

namespace lcl {

static_assert(std::endian::native == std::endian::little, "serialization assumes little-endian host");

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), md);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char c : md) {
    out.push_back(hex[c >> 4]);
    out.push_back(hex[c & 0xf]);
  }
  return out;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

}  // namespace

std::string canonical_bytes(const ParamSet& params) {
  std::string out;
  for (const auto& e : params) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put_u32(out, static_cast<std::uint32_t>(e.value.rank()));
    for (auto d : e.value.dims) put_u32(out, static_cast<std::uint32_t>(d));
    const auto* p = reinterpret_cast<const char*>(e.value.data.data());
    out.append(p, e.value.data.size() * sizeof(double));
  }
  return out;
}

std::string params_digest(const ParamSet& params) { return sha256_hex(canonical_bytes(params)); }

}  // namespace lcl
