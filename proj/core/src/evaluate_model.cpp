#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <json.hpp>
#include <numeric>
#include <set>
#include <sstream>

#include "scflow/error.hpp"
#include "scflow/eval.hpp"
#include "scflow/rng.hpp"
#include "scflow/textio.hpp"

namespace scflow::eval {
namespace {

using nlohmann::json;

enum EvalStream : std::uint64_t {
  kStyleClusters = 1,
  kContentClusters = 2,
  kKnnReferences = 3,
  kRecallSplit = 4,
  kMergeTriplets = 5,
};

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string config_hash(const EvalConfig& cfg, const net::NetArch& arch, const synth::EmbeddingGrid& grid) {
  std::ostringstream s;
  s << "nfe=" << cfg.nfe << ";method=" << flow::to_string(cfg.method) << ";roundtrip_nfe=" << cfg.roundtrip_nfe
    << ";restarts=" << cfg.kmeans_restarts << ";max_iter=" << cfg.kmeans_max_iter
    << ";tol=" << textio::format_number(cfg.kmeans_tol) << ";recall_splits=" << cfg.recall_splits
    << ";query_fraction=" << textio::format_number(cfg.query_fraction)
    << ";knn_reference_fraction=" << textio::format_number(cfg.knn_reference_fraction)
    << ";merge_triplets=" << cfg.merge_triplets << ";seed=" << cfg.seed << ";embed_dim=" << arch.embed_dim
    << ";time_freqs=" << arch.time_freqs << ";hidden=";
  for (int w : arch.hidden_widths) s << w << ',';
  s << ";grid=" << grid.n_contents() << 'x' << grid.n_styles() << 'x' << grid.n_views() << 'x' << grid.embed_dim()
    << ";grid_seed=" << grid.seed();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(s.str())));
  return buf;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

std::vector<int> take(const std::vector<int>& v, const std::vector<int>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (int r : rows) out.push_back(v[r]);
  return out;
}

// Per class, a shuffled subset of `fraction` of its members (at least one,
// at most all but one) goes to the first group.
std::pair<std::vector<int>, std::vector<int>> stratified_split(const std::vector<int>& labels, double fraction,
                                                               Rng& rng) {
  std::map<int, std::vector<int>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(static_cast<int>(i));
  std::vector<int> first;
  std::vector<int> second;
  for (auto& [label, idx] : members) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const int n = static_cast<int>(idx.size());
    const int take_n = n < 2 ? n : std::clamp(static_cast<int>(std::lround(fraction * n)), 1, n - 1);
    first.insert(first.end(), idx.begin(), idx.begin() + take_n);
    second.insert(second.end(), idx.begin() + take_n, idx.end());
  }
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {first, second};
}

double cluster_nmi(const Eigen::MatrixXd& points, const std::vector<int>& labels, int k, const EvalConfig& cfg,
                   std::uint64_t stream) {
  KMeansOptions opts{cfg.kmeans_restarts, cfg.kmeans_max_iter, cfg.kmeans_tol, cfg.seed ^ (stream << 56)};
  return nmi(kmeans(points, k, opts).assignment, labels);
}

// Reported metrics carry 9 significant digits, the precision of every text output.
double to_reported_precision(double v) { return textio::parse_number(textio::format_number(v)); }

json metric_value(double v) {
  if (std::isfinite(v)) return v;
  return textio::format_number(v);
}

}  // namespace

const std::vector<std::string>& report_metric_keys() {
  static const std::vector<std::string> keys{
      "style_nmi",     "content_nmi", "style_nmi_raw", "content_nmi_raw",      "style_fdr",
      "content_fdr",   "knn_acc@1",   "knn_acc@5",     "knn_acc@10",           "recall@1",
      "recall@10",     "merge_retrieval_top1",         "equidistance_cv",      "roundtrip_cosine_median"};
  return keys;
}

std::string EvalReport::to_json() const {
  json m = json::object();
  for (const auto& key : report_metric_keys()) {
    const auto it = metrics.find(key);
    if (it == metrics.end()) throw InvalidState("report is missing metric '" + key + "'");
    m[key] = metric_value(it->second);
  }
  for (const auto& [key, value] : metrics) {
    if (!m.contains(key)) throw InvalidState("report has undocumented metric '" + key + "'");
  }
  const json j = {{"config_hash", config_hash}, {"seed", seed}, {"nfe", nfe}, {"timestamp", timestamp}, {"metrics", m}};
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError("report", std::string("invalid JSON: ") + e.what());
  }
  const std::set<std::string> top{"config_hash", "seed", "nfe", "timestamp", "metrics"};
  if (!j.is_object()) throw FormatError("report", "must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!top.count(key)) throw FormatError(key, "unexpected key in report");
  }
  for (const auto& key : top) {
    if (!j.contains(key)) throw FormatError(key, "missing from report");
  }
  EvalReport r;
  try {
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.nfe = j.at("nfe").get<int>();
    r.timestamp = j.at("timestamp").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError("report", e.what());
  }
  const json& m = j.at("metrics");
  if (!m.is_object()) throw FormatError("metrics", "must be an object");
  const auto& keys = report_metric_keys();
  for (const auto& [key, value] : m.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw FormatError("metrics." + key, "unexpected metric");
  }
  for (const auto& key : keys) {
    if (!m.contains(key)) throw FormatError("metrics." + key, "missing from report");
    const json& v = m.at(key);
    if (v.is_number()) {
      r.metrics[key] = v.get<double>();
    } else if (v.is_string()) {
      try {
        r.metrics[key] = textio::parse_number(v.get<std::string>());
      } catch (const InvalidArgument& e) {
        throw FormatError("metrics." + key, e.what());
      }
    } else {
      throw FormatError("metrics." + key, "must be a number");
    }
  }
  return r;
}

TestSpace disentangle_test_cells(const net::NetParams& params, const synth::DatasetSplit& split,
                                 const flow::SolverConfig& cfg) {
  const synth::EmbeddingGrid& g = *split.grid;
  if (split.test_contents.empty()) throw InvalidState("evaluation needs a nonempty test split");
  const auto rows = static_cast<Eigen::Index>(split.test_contents.size() * g.n_styles() * g.n_views());
  TestSpace s;
  s.raw.resize(rows, g.embed_dim());
  Eigen::Index r = 0;
  for (std::size_t c = 0; c < split.test_contents.size(); ++c) {
    const int i = split.test_contents[c];
    for (int j = 0; j < g.n_styles(); ++j) {
      for (int v = 0; v < g.n_views(); ++v) {
        s.raw.row(r++) = g.cell_vector(i, j, v).transpose();
        s.content_labels.push_back(static_cast<int>(c));
        s.content_ids.push_back(i);
        s.style_labels.push_back(j);
      }
    }
  }
  flow::Disentangled d = flow::disentangle_reverse(params, s.raw, cfg);
  s.content_half = std::move(d.content);
  s.style_half = std::move(d.style);
  return s;
}

double roundtrip_cosine_median(const net::NetParams& params, const Eigen::MatrixXd& raw, int nfe, flow::Method method) {
  const flow::Disentangled d =
      flow::disentangle_reverse(params, raw, {flow::Direction::kReverse, nfe, method});
  const Eigen::MatrixXd back = flow::merge_forward(params, d.content, d.style, {flow::Direction::kForward, nfe, method});
  std::vector<double> cos(raw.rows());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) cos[i] = cosine(raw.row(i).transpose(), back.row(i).transpose());
  const auto mid = cos.begin() + static_cast<std::ptrdiff_t>(cos.size() / 2);
  std::nth_element(cos.begin(), mid, cos.end());
  if (cos.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(cos.begin(), mid);
  return 0.5 * (lower + upper);
}

double merge_retrieval_top1(const net::NetParams& params, const synth::DatasetSplit& split, int n_triplets,
                            const flow::SolverConfig& cfg, std::uint64_t seed) {
  const synth::EmbeddingGrid& g = *split.grid;
  const auto& tc = split.test_contents;
  if (tc.empty()) throw InvalidState("merge retrieval needs a nonempty test split");
  if (n_triplets < 1) throw InvalidArgument("merge retrieval needs at least one triplet");

  Rng rng = derive_rng(seed, Stream::kEval, {kMergeTriplets});
  std::uniform_int_distribution<std::size_t> pick_content(0, tc.size() - 1);
  std::uniform_int_distribution<int> pick_style(0, g.n_styles() - 1);
  std::uniform_int_distribution<int> pick_view(0, g.n_views() - 1);
  Eigen::MatrixXd content_refs(n_triplets, g.embed_dim());
  Eigen::MatrixXd style_refs(n_triplets, g.embed_dim());
  std::vector<std::pair<int, int>> truth;
  for (int r = 0; r < n_triplets; ++r) {
    const int i = tc[pick_content(rng)];
    const int j = pick_style(rng);
    const int a = pick_style(rng);
    const int b = tc[pick_content(rng)];
    content_refs.row(r) = g.cell_vector(i, a, pick_view(rng)).transpose();
    style_refs.row(r) = g.cell_vector(b, j, pick_view(rng)).transpose();
    truth.emplace_back(i, j);
  }
  const Eigen::MatrixXd merged = flow::merge_forward(params, content_refs, style_refs, cfg);

  Eigen::MatrixXd cells(static_cast<Eigen::Index>(tc.size()) * g.n_styles(), g.embed_dim());
  std::vector<std::pair<int, int>> cell_ids;
  for (int i : tc) {
    for (int j = 0; j < g.n_styles(); ++j) {
      cells.row(static_cast<Eigen::Index>(cell_ids.size())) = g.cell_mean(i, j).normalized().transpose();
      cell_ids.emplace_back(i, j);
    }
  }
  int hits = 0;
  for (int r = 0; r < n_triplets; ++r) {
    const Eigen::VectorXd q = merged.row(r).transpose().normalized();
    Eigen::Index best = 0;
    (cells * q).maxCoeff(&best);
    hits += cell_ids[best] == truth[r] ? 1 : 0;
  }
  return static_cast<double>(hits) / n_triplets;
}

std::map<std::string, double> raw_baselines(const synth::DatasetSplit& split) {
  const synth::EmbeddingGrid& g = *split.grid;
  // Zero parameters make the reverse flow the identity, so the halves are raw.
  net::NetArch arch;
  arch.embed_dim = g.embed_dim();
  arch.hidden_widths = {1};
  arch.time_freqs = 1;
  const net::NetParams identity = net::init_velocity_net(arch, 0);
  const TestSpace s = disentangle_test_cells(identity, split, {flow::Direction::kReverse, 1, flow::Method::kEuler});
  return {
      {"style_fdr_raw", to_reported_precision(fdr(s.raw, s.style_labels))},
      {"content_fdr_raw", to_reported_precision(fdr(s.raw, s.content_labels))},
      {"equidistance_cv_raw", to_reported_precision(equidistance_cv(s.raw, class_centroids(s.raw, s.style_labels)))},
  };
}

EvalReport evaluate_model(const net::NetParams& params, const synth::DatasetSplit& split, const EvalConfig& cfg) {
  if (!split.grid) throw InvalidState("split has no grid");
  const synth::EmbeddingGrid& g = *split.grid;
  if (params.arch.embed_dim != g.embed_dim()) {
    throw InvalidArgument("model embed_dim " + std::to_string(params.arch.embed_dim) + " does not match grid embed_dim " +
                          std::to_string(g.embed_dim()));
  }
  const TestSpace s = disentangle_test_cells(params, split, {flow::Direction::kReverse, cfg.nfe, cfg.method});
  const int n_test = static_cast<int>(split.test_contents.size());

  EvalReport report;
  report.config_hash = config_hash(cfg, params.arch, g);
  report.seed = cfg.seed;
  report.nfe = cfg.nfe;
  report.timestamp = utc_timestamp();
  auto& m = report.metrics;

  m["style_nmi"] = cluster_nmi(s.style_half, s.style_labels, g.n_styles(), cfg, kStyleClusters);
  m["style_nmi_raw"] = cluster_nmi(s.raw, s.style_labels, g.n_styles(), cfg, kStyleClusters);
  m["content_nmi"] = cluster_nmi(s.content_half, s.content_labels, n_test, cfg, kContentClusters);
  m["content_nmi_raw"] = cluster_nmi(s.raw, s.content_labels, n_test, cfg, kContentClusters);
  m["style_fdr"] = fdr(s.style_half, s.style_labels);
  m["content_fdr"] = fdr(s.content_half, s.content_labels);

  {
    Rng rng = derive_rng(cfg.seed, Stream::kEval, {kKnnReferences});
    const auto [refs, queries] = stratified_split(s.content_labels, cfg.knn_reference_fraction, rng);
    const LabeledPoints train{take_rows(s.content_half, refs), take(s.content_labels, refs)};
    const Eigen::MatrixXd q = take_rows(s.content_half, queries);
    const auto truth = take(s.content_labels, queries);
    // Small grids can hold fewer references than k; vote over all of them then.
    const int n_refs = static_cast<int>(refs.size());
    for (int k : cfg.knn_ks) {
      m["knn_acc@" + std::to_string(k)] = accuracy(knn_classify(train, q, std::min(k, n_refs)), truth);
    }
  }
  for (int k : cfg.recall_ks) m["recall@" + std::to_string(k)] = 0.0;
  for (int split_id = 0; split_id < cfg.recall_splits; ++split_id) {
    Rng rng = derive_rng(cfg.seed, Stream::kEval, {kRecallSplit, static_cast<std::uint64_t>(split_id)});
    const auto [queries, gallery] = stratified_split(s.style_labels, cfg.query_fraction, rng);
    const LabeledPoints q{take_rows(s.style_half, queries), take(s.style_labels, queries)};
    const LabeledPoints gal{take_rows(s.style_half, gallery), take(s.style_labels, gallery)};
    const int n_gallery = static_cast<int>(gallery.size());
    for (int k : cfg.recall_ks) {
      m["recall@" + std::to_string(k)] += recall_at_k(q, gal, std::min(k, n_gallery)) / cfg.recall_splits;
    }
  }

  m["merge_retrieval_top1"] =
      merge_retrieval_top1(params, split, cfg.merge_triplets, {flow::Direction::kForward, cfg.nfe, cfg.method}, cfg.seed);
  m["equidistance_cv"] = equidistance_cv(s.content_half, class_centroids(s.style_half, s.style_labels));
  m["roundtrip_cosine_median"] = roundtrip_cosine_median(params, s.raw, cfg.roundtrip_nfe, cfg.method);
  for (auto& [key, value] : m) value = to_reported_precision(value);
  return report;
}

}  // namespace scflow::eval
