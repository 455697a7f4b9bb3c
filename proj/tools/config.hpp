#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "scflow/eval.hpp"
#include "scflow/flowcore.hpp"
#include "scflow/flownet.hpp"
#include "scflow/synthgen.hpp"

namespace scflow::cli {

/// Bad flag value, unknown key or violated constraint (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every tunable of a run. Precedence: built-in defaults, then a flat
/// `key = value` config file, then command-line flags.
struct RunConfig {
  synth::GridSpec grid;
  std::vector<int> hidden{256, 256, 256};
  int time_freqs = 8;
  flow::TrainConfig train;
  int nfe = 1;
  flow::Method method = flow::Method::kEuler;
  int roundtrip_nfe = 64;
  int restarts = 10;
  int recall_splits = 5;
  int merge_triplets = 1000;
  std::string out = ".";

  /// Sets one key from its text form. Unknown keys and unparsable values
  /// throw ConfigError.
  void set(const std::string& key, const std::string& value);
  void load_file(const std::filesystem::path& path);
  void validate() const;

  [[nodiscard]] net::NetArch arch(int embed_dim) const;
  [[nodiscard]] eval::EvalConfig eval_config() const;

  static const std::vector<std::string>& keys();
};

/// "key = value" per line; '#' starts a comment.
std::map<std::string, std::string> parse_config_text(const std::string& text);

std::vector<int> parse_int_list(const std::string& text);

}  // namespace scflow::cli
