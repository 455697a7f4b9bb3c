#include "config.hpp"

#include <algorithm>
#include <charconv>

#include "scflow/error.hpp"
#include "scflow/textio.hpp"

namespace scflow::cli {
namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value) {
  T v{};
  const std::string t = trim(value);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  }
  return v;
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    return textio::parse_number(value);
  } catch (const InvalidArgument&) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    out.push_back(parse_integer<int>("list", text.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k{
      "styles",     "contents",       "views",          "dim",          "factor_dim",     "hidden_dim",
      "noise",      "seed",           "hidden",         "time_freqs",   "epochs",         "batches",
      "batch_size", "lr",             "train_fraction", "heldout_batches", "nfe",         "method",
      "roundtrip_nfe", "restarts",    "recall_splits",  "merge_triplets",
      "out"};
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  try {
    if (key == "styles") grid.n_styles = parse_integer<int>(key, value);
    else if (key == "contents") grid.n_contents = parse_integer<int>(key, value);
    else if (key == "views") grid.n_views = parse_integer<int>(key, value);
    else if (key == "dim") grid.embed_dim = parse_integer<int>(key, value);
    else if (key == "factor_dim") grid.factor_dim = parse_integer<int>(key, value);
    else if (key == "hidden_dim") grid.hidden_dim = parse_integer<int>(key, value);
    else if (key == "noise") grid.noise_sigma = parse_real(key, value);
    else if (key == "seed") grid.seed = train.seed = parse_integer<std::uint64_t>(key, value);
    else if (key == "hidden") hidden = parse_int_list(value);
    else if (key == "time_freqs") time_freqs = parse_integer<int>(key, value);
    else if (key == "epochs") train.epochs = parse_integer<int>(key, value);
    else if (key == "batches") train.batches_per_epoch = parse_integer<int>(key, value);
    else if (key == "batch_size") train.batch_size = parse_integer<int>(key, value);
    else if (key == "lr") train.lr = parse_real(key, value);
    else if (key == "train_fraction") train.train_fraction = parse_real(key, value);
    else if (key == "heldout_batches") train.heldout_batches = parse_integer<int>(key, value);
    else if (key == "nfe") nfe = train.eval_nfe = parse_integer<int>(key, value);
    else if (key == "method") method = flow::method_from_string(trim(value));
    else if (key == "roundtrip_nfe") roundtrip_nfe = parse_integer<int>(key, value);
    else if (key == "restarts") restarts = parse_integer<int>(key, value);
    else if (key == "recall_splits") recall_splits = parse_integer<int>(key, value);
    else if (key == "merge_triplets") merge_triplets = parse_integer<int>(key, value);
    else if (key == "out") out = trim(value);
    else throw ConfigError("unknown config key '" + key + "'");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind("list:", 0) == 0) throw ConfigError(key + msg.substr(4));
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

void RunConfig::load_file(const std::filesystem::path& path) {
  for (const auto& [key, value] : parse_config_text(textio::read_text(path))) set(key, value);
}

void RunConfig::validate() const {
  require(grid.n_styles >= 2, "styles must be >= 2 (got " + std::to_string(grid.n_styles) + ")");
  require(grid.n_contents >= 2, "contents must be >= 2 (got " + std::to_string(grid.n_contents) + ")");
  require(grid.n_views >= 1, "views must be >= 1 (got " + std::to_string(grid.n_views) + ")");
  require(grid.embed_dim >= 1, "dim must be >= 1");
  require(grid.factor_dim >= 2, "factor_dim must be >= 2");
  require(grid.hidden_dim >= 1, "hidden_dim must be >= 1");
  require(grid.noise_sigma >= 0.0, "noise must be >= 0");
  require(!hidden.empty() && std::all_of(hidden.begin(), hidden.end(), [](int w) { return w >= 1; }),
          "hidden must be a non-empty list of positive widths");
  require(time_freqs >= 1, "time_freqs must be >= 1");
  require(train.epochs >= 1, "epochs must be >= 1");
  require(train.batches_per_epoch >= 1, "batches must be >= 1");
  require(train.batch_size >= 1, "batch_size must be >= 1");
  require(train.lr > 0.0, "lr must be > 0");
  require(train.train_fraction > 0.0 && train.train_fraction < 1.0, "train_fraction must lie in (0, 1)");
  require(train.heldout_batches >= 1, "heldout_batches must be >= 1");
  require(nfe >= 1, "nfe must be >= 1 (got " + std::to_string(nfe) + ")");
  require(roundtrip_nfe >= 1, "roundtrip_nfe must be >= 1");
  require(restarts >= 1, "restarts must be >= 1");
  require(recall_splits >= 1, "recall_splits must be >= 1");
  require(merge_triplets >= 1, "merge_triplets must be >= 1");
}

net::NetArch RunConfig::arch(int embed_dim) const {
  net::NetArch a;
  a.embed_dim = embed_dim;
  a.hidden_widths = hidden;
  a.time_freqs = time_freqs;
  return a;
}

eval::EvalConfig RunConfig::eval_config() const {
  eval::EvalConfig e;
  e.nfe = nfe;
  e.method = method;
  e.roundtrip_nfe = roundtrip_nfe;
  e.kmeans_restarts = restarts;
  e.recall_splits = recall_splits;
  e.merge_triplets = merge_triplets;
  e.seed = train.seed;
  return e;
}

}  // namespace scflow::cli
