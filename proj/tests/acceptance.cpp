// Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if
// any criterion fails.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "oracles.hpp"
#include "scflow/binio.hpp"
#include "scflow/checkpoint.hpp"
#include "scflow/eval.hpp"
#include "scflow/flowcore.hpp"
#include "scflow/textio.hpp"

using namespace scflow;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kGradRelTol = 1e-5;
constexpr double kGradMinMagnitude = 1e-8;
constexpr double kGradStep = 1e-5;
constexpr double kGradSeconds = 10.0;
constexpr double kNmiTol = 1e-12;
constexpr double kDecayTol = 0.01;
constexpr double kStyleNmiMin = 0.80;
constexpr double kStyleNmiMargin = 0.20;
constexpr double kContentNmiMin = 0.70;
constexpr double kContentNmiMargin = 0.15;
constexpr double kPipelineSeconds = 600.0;
constexpr double kMergeTop1Min = 0.90;
constexpr double kRoundtripMin = 0.98;
constexpr double kEquidistanceMax = 0.15;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) { return textio::format_number(v); }

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(std::vector<std::string> args, std::ostream& log, std::string* err_text = nullptr) {
  args.insert(args.begin(), "scflow");
  std::ostringstream err;
  log << "$ scflow";
  for (std::size_t i = 1; i < args.size(); ++i) log << ' ' << args[i];
  log << '\n';
  const int code = cli::run(args, log, err);
  log << err.str();
  if (err_text) *err_text = err.str();
  return code;
}

Eigen::MatrixXd random_rows(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd x(rows, cols);
  for (auto& v : x.reshaped()) v = n(rng);
  return x;
}

// ---------------------------------------------------------------- 1

Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  net::NetArch arch;
  arch.embed_dim = 8;
  arch.hidden_widths = {16, 16};
  arch.time_freqs = 4;
  auto p = net::init_velocity_net(arch, 2024);
  Rng rng(2025);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& layer : p.layers) {
    for (auto& w : layer.weight.reshaped()) w += n(rng);
    for (auto& b : layer.bias) b = n(rng);
  }
  const auto x0 = random_rows(4, arch.state_dim(), 1);
  const auto x1 = random_rows(4, arch.state_dim(), 2);
  const Eigen::VectorXd t{{0.05, 0.4, 0.7, 0.99}};
  const auto analytic = flow::fm_loss_at(p, x0, x1, t).grads;

  double worst = 0.0;
  long checked = 0;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto probe = [&](double& slot, double g) {
      const double keep = slot;
      slot = keep + kGradStep;
      const double up = oracle::fm_loss(p, x0, x1, t);
      slot = keep - kGradStep;
      const double down = oracle::fm_loss(p, x0, x1, t);
      slot = keep;
      const double fd = (up - down) / (2.0 * kGradStep);
      if (std::abs(g) > kGradMinMagnitude) {
        worst = std::max(worst, std::abs(g - fd) / std::max(std::abs(g), std::abs(fd)));
        ++checked;
      }
    };
    for (Eigen::Index i = 0; i < p.layers[l].weight.size(); ++i) {
      probe(p.layers[l].weight.reshaped()(i), analytic.layers[l].weight.reshaped()(i));
    }
    for (Eigen::Index i = 0; i < p.layers[l].bias.size(); ++i) probe(p.layers[l].bias(i), analytic.layers[l].bias(i));
  }
  const double secs = seconds_since(t0);
  return {worst < kGradRelTol && secs < kGradSeconds,
          "max rel err " + num(worst) + " over " + std::to_string(checked) + " of " +
              std::to_string(p.parameter_count()) + " coords, " + num(secs) + " s"};
}

// ---------------------------------------------------------------- 2

Outcome identity_flow() {
  const auto p = net::init_velocity_net(net::NetArch{}, 1);
  const auto x = random_rows(16, 128, 3);
  bool solve_ok = true;
  for (int nfe : {1, 7, 64}) {
    for (auto d : {flow::Direction::kForward, flow::Direction::kReverse}) {
      solve_ok = solve_ok && flow::ode_solve(p, x, {d, nfe, flow::Method::kEuler}) == x;
    }
  }
  const auto c = random_rows(8, 64, 4), s = random_rows(8, 64, 5);
  const bool merge_ok = flow::merge_forward(p, c, s, {}) == 0.5 * (c + s);

  auto grid = std::make_shared<const synth::EmbeddingGrid>(synth::generate_grid(synth::GridSpec{}));
  const auto split = synth::split_grid(grid, 0.7, 1);
  const auto report = eval::evaluate_model(p, split, eval::EvalConfig{});
  const auto raw = eval::raw_baselines(split);
  const auto& m = report.metrics;
  const bool metrics_ok = m.at("style_nmi") == m.at("style_nmi_raw") && m.at("content_nmi") == m.at("content_nmi_raw") &&
                          m.at("style_fdr") == raw.at("style_fdr_raw") && m.at("content_fdr") == raw.at("content_fdr_raw") &&
                          m.at("equidistance_cv") == raw.at("equidistance_cv_raw");
  return {solve_ok && merge_ok && metrics_ok, std::string("ode_solve identity ") + (solve_ok ? "yes" : "no") +
                                                  ", merge mean " + (merge_ok ? "yes" : "no") +
                                                  ", learned == raw " + (metrics_ok ? "yes" : "no")};
}

// ---------------------------------------------------------------- 3

Outcome solver_oracle() {
  const auto field = oracle::linear_field_net(4, -1.0);
  const auto x = random_rows(6, 8, 6);
  const Eigen::MatrixXd exact = x * std::exp(-1.0);
  auto err = [&](int nfe, flow::Method m) {
    return (flow::ode_solve(field, x, {flow::Direction::kForward, nfe, m}) - exact).norm() / exact.norm();
  };
  bool monotone = true, midpoint_better = true;
  double prev = INFINITY, last = 0.0;
  for (int nfe = 4; nfe <= 512; nfe *= 2) {
    const double e = err(nfe, flow::Method::kEuler);
    monotone = monotone && e < prev;
    midpoint_better = midpoint_better && err(nfe, flow::Method::kMidpoint) < e;
    prev = last = e;
  }
  return {monotone && midpoint_better && last < kDecayTol,
          "euler rel err at nfe 512 " + num(last) + ", monotone " + (monotone ? "yes" : "no") + ", midpoint better " +
              (midpoint_better ? "yes" : "no")};
}

// ---------------------------------------------------------------- 4

Outcome metric_oracles() {
  const bool nmi_ok = std::abs(eval::nmi({0, 0, 1, 1}, {0, 0, 1, 1}) - 1.0) < kNmiTol &&
                      std::abs(eval::nmi({0, 0, 1, 1}, {1, 1, 0, 0}) - 1.0) < kNmiTol &&
                      std::abs(eval::nmi({0, 0, 1, 1}, {0, 1, 0, 1})) < kNmiTol;
  Eigen::MatrixXd x(4, 1);
  x << 0.0, 2.0, 10.0, 12.0;
  const bool fdr_ok = eval::fdr(x, {0, 0, 1, 1}) == 50.0;

  Rng rng(77);
  int agree = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 12)(rng);
    const int nq = std::uniform_int_distribution<int>(1, 6)(rng);
    const int k = std::uniform_int_distribution<int>(1, n)(rng);
    const int dim = std::uniform_int_distribution<int>(2, 5)(rng);
    eval::LabeledPoints gallery{random_rows(n, dim, 1000 + trial), {}};
    for (int i = 0; i < n; ++i) gallery.labels.push_back(std::uniform_int_distribution<int>(0, 3)(rng));
    eval::LabeledPoints queries{random_rows(nq, dim, 2000 + trial), {}};
    for (int i = 0; i < nq; ++i) queries.labels.push_back(std::uniform_int_distribution<int>(0, 3)(rng));
    const bool knn_same =
        eval::knn_classify(gallery, queries.points, k) == oracle::knn(gallery.points, gallery.labels, queries.points, k);
    const bool recall_same = eval::recall_at_k(queries, gallery, k) ==
                             oracle::recall(queries.points, queries.labels, gallery.points, gallery.labels, k);
    agree += knn_same && recall_same ? 1 : 0;
  }
  return {nmi_ok && fdr_ok && agree == 20, std::string("nmi ") + (nmi_ok ? "ok" : "wrong") + ", fdr " +
                                               (fdr_ok ? "50" : "wrong") + ", brute-force agreement " +
                                               std::to_string(agree) + "/20"};
}

// ---------------------------------------------------------------- 5-9

struct Pipeline {
  bool ok = false;
  double seconds = 0.0;
  fs::path dir;
  eval::EvalReport report;
  std::map<std::string, double> baselines;
};

Pipeline run_pipeline(const fs::path& dir) {
  Pipeline p;
  p.dir = dir;
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream log(dir / "pipeline.log");
  const auto t0 = Clock::now();
  const std::string out = dir.string();
  p.ok = run_cli({"gen-data", "--seed", "1", "-o", out}, log) == 0 &&
         run_cli({"train", "--grid", (dir / "grid.scf1").string(), "--seed", "1", "-o", out}, log) == 0 &&
         run_cli({"eval", "--ckpt", (dir / "model.sck1").string(), "--grid", (dir / "grid.scf1").string(), "--nfe", "1",
                  "-o", out},
                 log) == 0;
  p.seconds = seconds_since(t0);
  if (p.ok) {
    p.report = eval::EvalReport::from_json(textio::read_text(dir / "report.json"));
    const auto baselines = nlohmann::json::parse(textio::read_text(dir / "baselines.json"));
    for (const auto& [k, v] : baselines.items()) {
      p.baselines[k] = v.is_number() ? v.get<double>() : textio::parse_number(v.get<std::string>());
    }
  }
  return p;
}

Outcome disentanglement(const Pipeline& p) {
  if (!p.ok) return {false, "pipeline failed, see " + (p.dir / "pipeline.log").string()};
  const auto& m = p.report.metrics;
  const double sn = m.at("style_nmi"), snr = m.at("style_nmi_raw");
  const double cn = m.at("content_nmi"), cnr = m.at("content_nmi_raw");
  const bool pass = sn >= kStyleNmiMin && sn >= snr + kStyleNmiMargin && cn >= kContentNmiMin &&
                    cn >= cnr + kContentNmiMargin && m.at("style_fdr") > p.baselines.at("style_fdr_raw") &&
                    m.at("content_fdr") > p.baselines.at("content_fdr_raw") && p.seconds <= kPipelineSeconds;
  return {pass, "style nmi " + num(sn) + " (raw " + num(snr) + "), content nmi " + num(cn) + " (raw " + num(cnr) +
                    "), style fdr " + num(m.at("style_fdr")) + " (raw " + num(p.baselines.at("style_fdr_raw")) +
                    "), content fdr " + num(m.at("content_fdr")) + " (raw " + num(p.baselines.at("content_fdr_raw")) +
                    "), pipeline " + num(p.seconds) + " s"};
}

Outcome merge_consistency(const Pipeline& p) {
  if (!p.ok) return {false, "pipeline failed"};
  const double top1 = p.report.metrics.at("merge_retrieval_top1");
  return {top1 >= kMergeTop1Min, "top-1 " + num(top1) + " over 1000 test triplets"};
}

Outcome invertibility(const Pipeline& p) {
  if (!p.ok) return {false, "pipeline failed"};
  const auto ck = read_checkpoint(p.dir / "model.sck1");
  auto grid = std::make_shared<const synth::EmbeddingGrid>(synth::read_grid(p.dir / "grid.scf1"));
  const auto split = synth::split_grid(grid, ck.train_config.train_fraction, ck.train_config.seed);
  const auto space = eval::disentangle_test_cells(ck.state.params, split,
                                                  {flow::Direction::kReverse, 1, flow::Method::kEuler});
  std::string curve;
  bool non_increasing = true;
  double prev_err = INFINITY, median64 = 0.0;
  for (int nfe : {1, 4, 16, 64}) {
    const double med = eval::roundtrip_cosine_median(ck.state.params, space.raw, nfe);
    const double err = 1.0 - med;
    non_increasing = non_increasing && err <= prev_err;
    prev_err = err;
    median64 = med;
    curve += (curve.empty() ? "" : ", ") + std::to_string(nfe) + ":" + num(med);
  }
  return {median64 >= kRoundtripMin && non_increasing,
          "median roundtrip cosine by nfe {" + curve + "}, non-increasing error " + (non_increasing ? "yes" : "no")};
}

Outcome equidistance(const Pipeline& p) {
  if (!p.ok) return {false, "pipeline failed"};
  const double cv = p.report.metrics.at("equidistance_cv");
  const double raw = p.baselines.at("equidistance_cv_raw");
  return {cv <= kEquidistanceMax && cv < raw, "mean cv " + num(cv) + " (raw " + num(raw) + ")"};
}

Outcome determinism(const Pipeline& a, const Pipeline& b) {
  if (!a.ok || !b.ok) return {false, "pipeline failed"};
  const auto ga = binio::read_container(a.dir / "grid.scf1", "SCF1");
  const auto gb = binio::read_container(b.dir / "grid.scf1", "SCF1");
  const auto ca = binio::read_container(a.dir / "model.sck1", "SCK1");
  const auto cb = binio::read_container(b.dir / "model.sck1", "SCK1");
  const bool grid_same = ga.payload.size() == gb.payload.size() &&
                         std::memcmp(ga.payload.data(), gb.payload.data(), ga.payload.size() * sizeof(float)) == 0;
  const bool ckpt_same = ca.payload.size() == cb.payload.size() &&
                         std::memcmp(ca.payload.data(), cb.payload.data(), ca.payload.size() * sizeof(float)) == 0;
  const bool metrics_same = a.report.metrics == b.report.metrics;
  return {grid_same && ckpt_same && metrics_same, std::string("SCF1 payload ") + (grid_same ? "identical" : "differs") +
                                                      ", SCK1 payload " + (ckpt_same ? "identical" : "differs") +
                                                      ", metrics " + (metrics_same ? "identical" : "differ")};
}

// ---------------------------------------------------------------- 10

Outcome format_robustness(const Pipeline& p, const fs::path& dir) {
  if (!p.ok) return {false, "pipeline failed"};
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream log(dir / "format.log");
  const fs::path grid = p.dir / "grid.scf1";
  const fs::path ckpt = p.dir / "model.sck1";
  const std::string grid_bytes = bytes_of(grid);
  const std::string ckpt_bytes = bytes_of(ckpt);

  auto write = [&](const std::string& name, const std::string& bytes) {
    textio::write_text(dir / name, bytes);
    return (dir / name).string();
  };
  auto reshaped = [&](const fs::path& src, const char* magic, const std::function<void(nlohmann::json&)>& edit,
                      const std::string& name) {
    const auto c = binio::read_container(src, magic);
    auto m = nlohmann::json::parse(c.manifest);
    edit(m);
    binio::write_container(dir / name, magic, m.dump(), c.payload);
    return (dir / name).string();
  };
  auto corrupt_magic = [](std::string b) {
    b[0] ^= 0x20;
    return b;
  };
  auto truncate = [](std::string b) {
    b.resize(b.size() - 12);
    return b;
  };

  struct Case {
    std::string name;
    std::vector<std::string> args;
    std::string field;
  };
  const std::string gs = grid.string(), cs = ckpt.string(), out = dir.string();
  const std::vector<Case> cases{
      {"SCF1 magic", {"train", "--grid", write("magic.scf1", corrupt_magic(grid_bytes)), "-o", out}, "magic"},
      {"SCF1 truncated", {"train", "--grid", write("short.scf1", truncate(grid_bytes)), "-o", out}, "payload"},
      {"SCF1 shape",
       {"train", "--grid", reshaped(grid, "SCF1", [](auto& m) { m["n_styles"] = 11; }, "shape.scf1"), "-o", out},
       "payload"},
      {"SCK1 magic", {"eval", "--ckpt", write("magic.sck1", corrupt_magic(ckpt_bytes)), "--grid", gs, "-o", out}, "magic"},
      {"SCK1 truncated", {"eval", "--ckpt", write("short.sck1", truncate(ckpt_bytes)), "--grid", gs, "-o", out}, "payload"},
      {"SCK1 shape",
       {"eval", "--ckpt",
        reshaped(ckpt, "SCK1", [](auto& m) { m["arch"]["hidden_widths"] = {256, 256, 128}; }, "shape.sck1"), "--grid", gs,
        "-o", out},
       "payload"},
  };
  int rejected = 0;
  std::string failures;
  for (const auto& c : cases) {
    std::string err;
    const int code = run_cli(c.args, log, &err);
    if (code == cli::kIo && err.find("format error in " + c.field) != std::string::npos) {
      ++rejected;
    } else {
      failures += " [" + c.name + ": exit " + std::to_string(code) + "]";
    }
  }

  const auto g = synth::read_grid(grid);
  synth::write_grid(g, dir / "copy.scf1");
  const auto ck = read_checkpoint(ckpt);
  write_checkpoint(ck, dir / "copy.sck1");
  const bool exact = bytes_of(dir / "copy.scf1") == grid_bytes && bytes_of(dir / "copy.sck1") == ckpt_bytes;
  return {rejected == static_cast<int>(cases.size()) && exact,
          std::to_string(rejected) + "/" + std::to_string(cases.size()) + " corrupt files rejected with exit 3" +
              failures + ", roundtrips " + (exact ? "byte-exact" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scflow acceptance suite"};
  std::string workdir = "acceptance_work";
  std::vector<int> only;
  app.add_option("--workdir", workdir, "Scratch directory for pipeline runs");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  const fs::path work = fs::absolute(workdir);
  fs::create_directories(work);
  auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

  int failed = 0;
  auto report = [&](int id, const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << ": " << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  };
  auto guarded = [](const std::function<Outcome()>& f) -> Outcome {
    try {
      return f();
    } catch (const std::exception& e) {
      return {false, std::string("exception: ") + e.what()};
    }
  };

  if (wanted(1)) report(1, "gradient oracle", guarded(gradient_oracle));
  if (wanted(2)) report(2, "identity flow", guarded(identity_flow));
  if (wanted(3)) report(3, "solver oracle", guarded(solver_oracle));
  if (wanted(4)) report(4, "metric oracles", guarded(metric_oracles));

  const bool need_run = wanted(5) || wanted(6) || wanted(7) || wanted(8) || wanted(9) || wanted(10);
  Pipeline first;
  if (need_run) first = run_pipeline(work / "run1");
  if (wanted(5)) report(5, "disentanglement", guarded([&] { return disentanglement(first); }));
  if (wanted(6)) report(6, "merge consistency", guarded([&] { return merge_consistency(first); }));
  if (wanted(7)) report(7, "invertibility", guarded([&] { return invertibility(first); }));
  if (wanted(8)) report(8, "equidistance", guarded([&] { return equidistance(first); }));
  if (wanted(9)) {
    const Pipeline second = run_pipeline(work / "run2");
    report(9, "determinism", guarded([&] { return determinism(first, second); }));
  }
  if (wanted(10)) report(10, "format robustness", guarded([&] { return format_robustness(first, work / "formats"); }));

  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
