#include "scflow/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "scflow/error.hpp"

namespace scflow::binio {
namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_container(const std::filesystem::path& path, std::string_view magic,
                     std::string_view manifest, std::span<const float> payload) {
  std::string bytes;
  bytes.reserve(8 + manifest.size() + 4 * payload.size());
  bytes.append(magic);
  put_u32(bytes, static_cast<std::uint32_t>(manifest.size()));
  bytes.append(manifest);
  for (float f : payload) put_u32(bytes, std::bit_cast<std::uint32_t>(f));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Container read_container(const std::filesystem::path& path, std::string_view magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());

  if (bytes.size() < 4 || std::string_view(bytes.data(), 4) != magic) {
    throw FormatError("magic", "expected '" + std::string(magic) + "'");
  }
  if (bytes.size() < 8) throw FormatError("manifest_length", "file truncated before manifest length");
  const std::uint32_t manifest_len = get_u32(data + 4);
  if (bytes.size() < 8 + static_cast<std::size_t>(manifest_len)) {
    throw FormatError("manifest", "file truncated inside manifest (" + std::to_string(manifest_len) +
                                      " bytes declared)");
  }
  Container c;
  c.manifest = bytes.substr(8, manifest_len);
  const std::size_t payload_bytes = bytes.size() - 8 - manifest_len;
  if (payload_bytes % 4 != 0) {
    throw FormatError("payload", "length " + std::to_string(payload_bytes) +
                                     " bytes is not a whole number of float32 values");
  }
  c.payload.resize(payload_bytes / 4);
  const unsigned char* p = data + 8 + manifest_len;
  for (std::size_t k = 0; k < c.payload.size(); ++k) {
    c.payload[k] = std::bit_cast<float>(get_u32(p + 4 * k));
  }
  return c;
}

}  // namespace scflow::binio
