#include "lcl/container.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "lcl/errors.hpp"

namespace lcl {

namespace {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const std::string& section) {
    need(sizeof(T), section);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n, const std::string& section) {
    need(n, section);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const std::string& section) const {
    if (n > bytes_.size() - pos_) throw FormatError("container truncated in " + section);
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor& Container::record(const std::string& name) const {
  for (const auto& [n, t] : records) {
    if (n == name) return t;
  }
  throw FormatError("container has no record '" + name + "'");
}

std::string encode_container(const Container& c) {
  std::string out(kContainerMagic, 4);
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.records.size()));
  for (const auto& [name, t] : c.records) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.dims) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(double));
  }
  const std::string meta = c.metadata.dump();
  put<std::uint64_t>(out, meta.size());
  out += meta;
  return out;
}

Container decode_container(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4, "header (magic)") != std::string_view(kContainerMagic, 4)) {
    throw FormatError("container header: bad magic");
  }
  const auto version = r.get<std::uint32_t>("header (version)");
  if (version != kContainerVersion) {
    throw FormatError("container header: unsupported version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>("header (record count)");
  Container c;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string section = "record " + std::to_string(i);
    const auto name_len = r.get<std::uint32_t>(section + " (name length)");
    std::string name(r.take(name_len, section + " (name)"));
    const auto rank = r.get<std::uint32_t>(section + " (rank)");
    if (rank > 8) throw FormatError(section + " '" + name + "': implausible rank " + std::to_string(rank));
    Shape dims;
    std::uint64_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      dims.push_back(r.get<std::uint32_t>(section + " (dims)"));
      n *= dims.back();
    }
    if (n > r.remaining() / sizeof(double)) throw FormatError("container truncated in " + section + " '" + name + "' payload");
    const auto payload = r.take(n * sizeof(double), section + " (payload)");
    std::vector<double> data(n);
    if (n) std::memcpy(data.data(), payload.data(), payload.size());
    c.records.emplace_back(std::move(name), Tensor(std::move(dims), std::move(data)));
  }
  const auto meta_len = r.get<std::uint64_t>("metadata (length)");
  if (meta_len > r.remaining()) throw FormatError("container truncated in metadata");
  const auto meta = r.take(meta_len, "metadata");
  if (r.remaining() != 0) throw FormatError("container has trailing bytes after metadata");
  try {
    c.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("container metadata: ") + e.what());
  }
  if (!c.metadata.is_object()) throw FormatError("container metadata: not a JSON object");
  return c;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_container(const std::filesystem::path& path, const Container& c) {
  write_file(path, encode_container(c));
}

Container read_container(const std::filesystem::path& path) { return decode_container(read_file(path)); }

}  // namespace lcl
