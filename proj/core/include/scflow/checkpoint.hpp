#pragma once

#include <filesystem>
#include <optional>

#include "scflow/flowcore.hpp"
#include "scflow/flownet.hpp"

namespace scflow {

/// SCK1 file: magic, u32 manifest length, JSON manifest (version, arch,
/// optimizer, step, rng_position, train_config, history), then float32 LE
/// sections: every layer's weight (row-major) and bias, then Adam m, then
/// Adam v, in that order.
struct Checkpoint {
  flow::TrainState state;
  flow::TrainConfig train_config;
};

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws FormatError on a bad magic, manifest or payload size. When
/// `expected_arch` is given, a differing architecture is a FormatError that
/// names the differing arch field.
Checkpoint read_checkpoint(const std::filesystem::path& path,
                           const std::optional<net::NetArch>& expected_arch = std::nullopt);

}  // namespace scflow
