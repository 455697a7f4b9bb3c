#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scflow::binio {

/// On-disk layout shared by grid and checkpoint files:
///   4-byte magic | u32 LE manifest length | UTF-8 JSON manifest | f32 LE payload
struct Container {
  std::string manifest;
  std::vector<float> payload;
};

void write_container(const std::filesystem::path& path, std::string_view magic,
                     std::string_view manifest, std::span<const float> payload);

/// Validates the magic and framing. Payload length is checked by the caller
/// against its manifest. Throws IoError when the file cannot be opened and
/// FormatError for anything structurally wrong.
Container read_container(const std::filesystem::path& path, std::string_view magic);

}  // namespace scflow::binio
