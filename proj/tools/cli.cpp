#include "cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <json.hpp>
#include <ostream>

#include "config.hpp"
#include "scflow/checkpoint.hpp"
#include "scflow/error.hpp"
#include "scflow/eval.hpp"
#include "scflow/svg.hpp"
#include "scflow/textio.hpp"

namespace scflow::cli {
namespace {

namespace fs = std::filesystem;
using textio::format_number;

constexpr const char* kGridFile = "grid.scf1";
constexpr const char* kGridSidecar = "grid.json";
constexpr const char* kCheckpointFile = "model.sck1";
constexpr const char* kLossCsv = "loss.csv";
constexpr const char* kLossSvg = "loss.svg";
constexpr const char* kReportFile = "report.json";
constexpr const char* kBaselinesFile = "baselines.json";
constexpr const char* kLockFile = ".scflow.lock";

/// Exclusive claim on an output directory for the lifetime of a command.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    path_ = dir / kLockFile;
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (errno == EEXIST) {
        throw IoError("output directory '" + dir.string() + "' is locked by another scflow command (" +
                      path_.string() + ")");
      }
      throw IoError("cannot create lock file '" + path_.string() + "': " + std::strerror(errno));
    }
    ::close(fd);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  fs::path path_;
};

std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

/// Config keys exposed as flags on one subcommand, plus the shared --config.
class ConfigFlags {
 public:
  ConfigFlags(CLI::App* app, std::initializer_list<const char*> keys) {
    app->add_option("--config", config_file_, "Flat 'key = value' config file (flags override it)");
    for (const char* key : keys) {
      const std::string k = key;
      const std::string names = k == "out" ? "-o,--out" : flag_name(k);
      options_[k] = app->add_option(names, values_[k], "Config key '" + k + "'");
    }
  }

  [[nodiscard]] bool given(const std::string& key) const {
    const auto it = options_.find(key);
    return it != options_.end() && it->second->count() > 0;
  }

  [[nodiscard]] RunConfig resolve() const {
    RunConfig cfg;
    if (!config_file_.empty()) cfg.load_file(config_file_);
    for (const auto& [key, opt] : options_) {
      if (opt->count() > 0) cfg.set(key, values_.at(key));
    }
    cfg.validate();
    return cfg;
  }

 private:
  std::string config_file_;
  std::map<std::string, std::string> values_;
  std::map<std::string, CLI::Option*> options_;
};

void write_checkpoint_atomic(const Checkpoint& ck, const fs::path& path) {
  const fs::path tmp = path.string() + ".tmp";
  write_checkpoint(ck, tmp);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at '" + path.string() + "': " + ec.message());
}

std::string loss_csv(const flow::LossCurve& curve) {
  std::string s = "epoch,train_loss,heldout_loss\n";
  for (std::size_t e = 0; e < curve.train.size(); ++e) {
    s += std::to_string(e + 1) + "," + format_number(curve.train[e]) + "," + format_number(curve.heldout[e]) + "\n";
  }
  return s;
}

std::string loss_svg(const flow::LossCurve& curve) {
  svg::Series train{"train", {}, curve.train};
  svg::Series held{"held-out", {}, curve.heldout};
  for (std::size_t e = 0; e < curve.train.size(); ++e) {
    train.x.push_back(static_cast<double>(e + 1));
    held.x.push_back(static_cast<double>(e + 1));
  }
  return svg::line_plot("Flow-matching loss", "epoch", "mean squared error", {train, held});
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows, int dim, const std::string& what) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<int>(rows[r].size()) != dim) {
      throw ConfigError(what + " vector " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                        " values, expected " + std::to_string(dim));
    }
    for (int d = 0; d < dim; ++d) m(static_cast<Eigen::Index>(r), d) = rows[r][d];
  }
  return m;
}

std::vector<std::vector<double>> to_rows(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> rows(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) rows[r][c] = m(r, c);
  }
  return rows;
}

std::array<int, 3> parse_cell(const std::string& text) {
  const auto v = parse_int_list(text);
  if (v.size() != 3) throw ConfigError("cell must be 'content,style,view', got '" + text + "'");
  return {v[0], v[1], v[2]};
}

Eigen::VectorXd grid_cell(const synth::EmbeddingGrid& g, const std::string& text) {
  const auto [i, j, v] = parse_cell(text);
  if (i < 0 || i >= g.n_contents() || j < 0 || j >= g.n_styles() || v < 0 || v >= g.n_views()) {
    throw ConfigError("cell '" + text + "' is outside the grid");
  }
  return g.cell_vector(i, j, v);
}

// ---------------------------------------------------------------- gen-data

int cmd_gen_data(const ConfigFlags& flags, std::ostream& out) {
  const RunConfig cfg = flags.resolve();
  const fs::path dir = cfg.out;
  OutputLock lock(dir);
  const synth::EmbeddingGrid grid = synth::generate_grid(cfg.grid);
  synth::write_grid(grid, dir / kGridFile);
  const nlohmann::json sidecar = {
      {"n_contents", cfg.grid.n_contents}, {"n_styles", cfg.grid.n_styles},     {"n_views", cfg.grid.n_views},
      {"embed_dim", cfg.grid.embed_dim},   {"factor_dim", cfg.grid.factor_dim}, {"hidden_dim", cfg.grid.hidden_dim},
      {"noise_sigma", cfg.grid.noise_sigma}, {"seed", cfg.grid.seed},
  };
  textio::write_text(dir / kGridSidecar, sidecar.dump(2) + "\n");
  out << "grid: " << grid.n_contents() << " contents x " << grid.n_styles() << " styles = "
      << grid.n_contents() * grid.n_styles() << " cells, " << grid.n_views() << " views, embed_dim "
      << grid.embed_dim() << " (" << grid.n_embeddings() << " embeddings) -> " << (dir / kGridFile).string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- train

int cmd_train(const ConfigFlags& flags, const std::string& grid_path, const std::string& resume, std::ostream& out) {
  const RunConfig cfg = flags.resolve();
  const auto grid = std::make_shared<const synth::EmbeddingGrid>(synth::read_grid(grid_path));
  const fs::path dir = cfg.out;
  const fs::path ckpt_path = dir / kCheckpointFile;
  if (!resume.empty() && fs::exists(ckpt_path) && fs::equivalent(resume, ckpt_path)) {
    throw ConfigError("--resume " + resume + " would be overwritten; pick another output directory");
  }
  OutputLock lock(dir);

  flow::TrainConfig tc = cfg.train;
  flow::TrainState state;
  if (!resume.empty()) {
    Checkpoint ck = read_checkpoint(resume);
    if (ck.state.params.arch.embed_dim != grid->embed_dim()) {
      throw FormatError("arch.embed_dim", "checkpoint embed_dim " + std::to_string(ck.state.params.arch.embed_dim) +
                                              " does not match grid embed_dim " + std::to_string(grid->embed_dim()));
    }
    tc = ck.train_config;
    if (flags.given("epochs")) tc.epochs = cfg.train.epochs;
    state = std::move(ck.state);
    out << "resuming from " << resume << " at step " << state.rng_position << "\n";
  } else {
    state = flow::fresh_train_state(cfg.arch(grid->embed_dim()), tc);
  }
  const synth::DatasetSplit split = synth::split_grid(grid, tc.train_fraction, tc.seed);
  out << "training on " << split.train_contents.size() << " contents (" << split.test_contents.size()
      << " held out), " << state.params.parameter_count() << " parameters\n";

  flow::TrainHooks hooks;
  hooks.on_epoch = [&](const flow::TrainState& s, int epoch) {
    write_checkpoint_atomic({s, tc}, ckpt_path);
    out << "epoch " << epoch + 1 << "/" << tc.epochs << " train_loss=" << format_number(s.history.train.back())
        << " heldout_loss=" << format_number(s.history.heldout.back()) << "\n";
    out.flush();
    return ckpt_path.string();
  };
  const flow::TrainState final_state = flow::train(std::move(state), split, tc, hooks);
  write_checkpoint_atomic({final_state, tc}, ckpt_path);
  textio::write_text(dir / kLossCsv, loss_csv(final_state.history));
  textio::write_text(dir / kLossSvg, loss_svg(final_state.history));
  out << "wrote " << ckpt_path.string() << ", " << (dir / kLossCsv).string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- infer

struct InferArgs {
  std::string ckpt;
  std::string direction;
  int nfe = 1;
  std::string method = "euler";
  std::string input;
  std::string grid;
  std::string cell;
  std::string style_cell;
  std::string output;
  bool roundtrip = false;
  bool renormalize = false;
};

int cmd_infer(const InferArgs& a, std::ostream& out, std::ostream& err) {
  if (a.nfe < 1) throw ConfigError("nfe must be >= 1 (got " + std::to_string(a.nfe) + ")");
  flow::Direction direction{};
  flow::Method method{};
  try {
    direction = flow::direction_from_string(a.direction);
    method = flow::method_from_string(a.method);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (a.input.empty() == a.cell.empty()) throw ConfigError("give exactly one of --input or --cell");
  if (!a.cell.empty() && a.grid.empty()) throw ConfigError("--cell requires --grid");
  if (direction == flow::Direction::kForward && !a.cell.empty() && a.style_cell.empty()) {
    throw ConfigError("forward inference from a grid needs --cell (content ref) and --style-cell");
  }

  const Checkpoint ck = read_checkpoint(a.ckpt);
  const net::NetParams& params = ck.state.params;
  const int dim = params.arch.embed_dim;

  std::vector<std::vector<double>> inputs;
  if (!a.cell.empty()) {
    const synth::EmbeddingGrid g = synth::read_grid(a.grid);
    auto push = [&](const Eigen::VectorXd& v) { inputs.emplace_back(v.data(), v.data() + v.size()); };
    push(grid_cell(g, a.cell));
    if (direction == flow::Direction::kForward) push(grid_cell(g, a.style_cell));
  } else if (fs::path(a.input).extension() == ".scf1") {
    const synth::EmbeddingGrid g = synth::read_grid(a.input);
    for (std::size_t e = 0; e < g.n_embeddings(); ++e) {
      const auto s = g.data().subspan(e * g.embed_dim(), g.embed_dim());
      inputs.emplace_back(s.begin(), s.end());
    }
  } else {
    try {
      inputs = textio::read_vectors_csv(a.input);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("input: ") + e.what());
    }
  }
  if (inputs.empty()) throw ConfigError("no input vectors");
  const Eigen::MatrixXd x = to_matrix(inputs, dim, "input");

  std::ostream& diag = a.output.empty() ? err : out;
  Eigen::MatrixXd result;
  if (direction == flow::Direction::kForward) {
    if (x.rows() % 2 != 0) throw ConfigError("forward inference reads (content ref, style ref) pairs of rows");
    Eigen::MatrixXd content(x.rows() / 2, dim), style(x.rows() / 2, dim);
    for (Eigen::Index r = 0; r < x.rows() / 2; ++r) {
      content.row(r) = x.row(2 * r);
      style.row(r) = x.row(2 * r + 1);
    }
    result = flow::merge_forward(params, content, style, {direction, a.nfe, method}, a.renormalize);
  } else {
    const flow::Disentangled d = flow::disentangle_reverse(params, x, {direction, a.nfe, method});
    result.resize(2 * x.rows(), dim);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      result.row(2 * r) = d.content.row(r);
      result.row(2 * r + 1) = d.style.row(r);
    }
    if (a.roundtrip) {
      const Eigen::MatrixXd back =
          flow::merge_forward(params, d.content, d.style, {flow::Direction::kForward, a.nfe, method});
      std::vector<double> cos;
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        cos.push_back(eval::cosine(x.row(r).transpose(), back.row(r).transpose()));
        diag << "roundtrip_cosine[" << r << "]=" << format_number(cos.back()) << "\n";
      }
      std::sort(cos.begin(), cos.end());
      const double median = cos.size() % 2 ? cos[cos.size() / 2] : 0.5 * (cos[cos.size() / 2 - 1] + cos[cos.size() / 2]);
      diag << "roundtrip_cosine_median=" << format_number(median) << " (nfe " << a.nfe << ")\n";
    }
  }
  const std::string csv = textio::format_vectors_csv(to_rows(result));
  if (a.output.empty()) {
    out << csv;
  } else {
    textio::write_text(a.output, csv);
    out << "wrote " << result.rows() << " vectors to " << a.output << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------- eval

struct Loaded {
  Checkpoint ck;
  synth::DatasetSplit split;
};

Loaded load_model_and_split(const std::string& ckpt, const std::string& grid_path) {
  Loaded l;
  l.ck = read_checkpoint(ckpt);
  auto grid = std::make_shared<const synth::EmbeddingGrid>(synth::read_grid(grid_path));
  if (grid->embed_dim() != l.ck.state.params.arch.embed_dim) {
    throw FormatError("arch.embed_dim", "checkpoint and grid embedding dimensions differ");
  }
  l.split = synth::split_grid(std::move(grid), l.ck.train_config.train_fraction, l.ck.train_config.seed);
  return l;
}

int cmd_eval(const ConfigFlags& flags, const std::string& ckpt, const std::string& grid_path, std::ostream& out) {
  const RunConfig cfg = flags.resolve();
  const Loaded l = load_model_and_split(ckpt, grid_path);
  const fs::path dir = cfg.out;
  OutputLock lock(dir);

  eval::EvalConfig ec = cfg.eval_config();
  if (!flags.given("seed")) ec.seed = l.ck.train_config.seed;
  const eval::EvalReport report = eval::evaluate_model(l.ck.state.params, l.split, ec);
  textio::write_text(dir / kReportFile, report.to_json());

  nlohmann::json baselines = nlohmann::json::object();
  for (const auto& [k, v] : eval::raw_baselines(l.split)) baselines[k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_number(v));
  textio::write_text(dir / kBaselinesFile, baselines.dump(2) + "\n");

  const eval::TestSpace s =
      eval::disentangle_test_cells(l.ck.state.params, l.split, {flow::Direction::kReverse, ec.nfe, ec.method});
  std::string csv = "x,y,content_id,style_id,space\n";
  const std::vector<std::pair<std::string, const Eigen::MatrixXd*>> spaces{
      {"raw", &s.raw}, {"content_half", &s.content_half}, {"style_half", &s.style_half}};
  for (const auto& [name, m] : spaces) {
    const Eigen::MatrixXd xy = eval::pca_2d(*m);
    for (Eigen::Index r = 0; r < xy.rows(); ++r) {
      csv += format_number(xy(r, 0)) + "," + format_number(xy(r, 1)) + "," + std::to_string(s.content_ids[r]) + "," +
             std::to_string(s.style_labels[r]) + "," + name + "\n";
    }
    const auto& groups = name == "content_half" ? s.content_labels : s.style_labels;
    textio::write_text(dir / ("pca_" + name + ".svg"),
                       svg::scatter_plot("PCA of " + name + " (colour: " +
                                             (name == "content_half" ? "content" : "style") + ")",
                                         xy, groups));
  }
  textio::write_text(dir / "pca.csv", csv);

  for (const auto& key : eval::report_metric_keys()) {
    out << key << " = " << format_number(report.metrics.at(key)) << "\n";
  }
  out << "wrote " << (dir / kReportFile).string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- interp

struct InterpArgs {
  std::string ckpt;
  std::string grid;
  std::string space = "content";
  std::string pair;
  int steps = 11;
};

int cmd_interp(const ConfigFlags& flags, const InterpArgs& a, std::ostream& out) {
  const RunConfig cfg = flags.resolve();
  if (a.space != "content" && a.space != "style") throw ConfigError("space must be 'content' or 'style'");
  if (a.steps < 3) throw ConfigError("steps must be >= 3");
  const auto ids = parse_int_list(a.pair);
  if (ids.size() != 2) throw ConfigError("pair must be 'a,b'");
  const Loaded l = load_model_and_split(a.ckpt, a.grid);
  const synth::EmbeddingGrid& g = *l.split.grid;
  const bool content = a.space == "content";
  const int limit = content ? g.n_contents() : g.n_styles();
  for (int id : ids) {
    if (id < 0 || id >= limit) throw ConfigError(a.space + " id " + std::to_string(id) + " is outside the grid");
  }
  const fs::path dir = cfg.out;
  OutputLock lock(dir);

  // Class means over every cell carrying the class: all styles and views of
  // a content, or all test contents and views of a style.
  auto class_rows = [&](int id) {
    std::vector<Eigen::VectorXd> rows;
    if (content) {
      for (int j = 0; j < g.n_styles(); ++j)
        for (int v = 0; v < g.n_views(); ++v) rows.push_back(g.cell_vector(id, j, v));
    } else {
      for (int i : l.split.test_contents)
        for (int v = 0; v < g.n_views(); ++v) rows.push_back(g.cell_vector(i, id, v));
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), g.embed_dim());
    for (std::size_t r = 0; r < rows.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    return m;
  };
  auto learned_mean = [&](const Eigen::MatrixXd& raw) -> Eigen::VectorXd {
    const flow::Disentangled d =
        flow::disentangle_reverse(l.ck.state.params, raw, {flow::Direction::kReverse, cfg.nfe, cfg.method});
    return (content ? d.content : d.style).colwise().mean().transpose();
  };
  const Eigen::MatrixXd raw_a = class_rows(ids[0]);
  const Eigen::MatrixXd raw_b = class_rows(ids[1]);
  const eval::InterpProbe learned = eval::interp_probe(learned_mean(raw_a), learned_mean(raw_b), a.steps);
  const eval::InterpProbe raw = eval::interp_probe(raw_a.colwise().mean().transpose(), raw_b.colwise().mean().transpose(), a.steps);

  std::string csv = "space,lambda,sim_a,sim_b\n";
  std::vector<svg::Series> series;
  for (const auto& [name, p] : {std::pair<std::string, const eval::InterpProbe*>{"learned", &learned}, {"raw", &raw}}) {
    for (int s = 0; s < a.steps; ++s) {
      csv += name + "," + format_number(p->lambda[s]) + "," + format_number(p->sim_a[s]) + "," + format_number(p->sim_b[s]) + "\n";
    }
    series.push_back({name + " sim_a", p->lambda, p->sim_a});
    series.push_back({name + " sim_b", p->lambda, p->sim_b});
    out << name << ": monotonicity_violations=" << p->monotonicity_violations
        << " max_second_diff=" << format_number(p->max_second_diff) << "\n";
  }
  textio::write_text(dir / "interp.csv", csv);
  textio::write_text(dir / "interp.svg",
                     svg::line_plot(a.space + " interpolation " + std::to_string(ids[0]) + " -> " + std::to_string(ids[1]),
                                    "lambda", "cosine similarity", series));
  out << "wrote " << (dir / "interp.csv").string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- report

int cmd_report(const std::string& dir_text, std::ostream& out) {
  const fs::path dir = dir_text;
  const eval::EvalReport report = eval::EvalReport::from_json(textio::read_text(dir / kReportFile));
  OutputLock lock(dir);
  out << "config_hash " << report.config_hash << "  seed " << report.seed << "  nfe " << report.nfe << "\n";
  for (const auto& key : eval::report_metric_keys()) {
    std::string padded = key;
    padded.resize(std::max<std::size_t>(padded.size(), 26), ' ');
    out << "  " << padded << format_number(report.metrics.at(key)) << "\n";
  }
  if (fs::exists(dir / kBaselinesFile)) {
    const auto b = nlohmann::json::parse(textio::read_text(dir / kBaselinesFile), nullptr, false);
    if (b.is_object()) {
      out << "raw baselines\n";
      for (const auto& [k, v] : b.items()) out << "  " << k << " = " << v.dump() << "\n";
    }
  }
  if (fs::exists(dir / kLossCsv)) {
    flow::LossCurve curve;
    std::string text = textio::read_text(dir / kLossCsv);
    const auto header_end = text.find('\n');
    try {
      for (const auto& row : textio::parse_vectors_csv(header_end == std::string::npos ? "" : text.substr(header_end + 1))) {
        if (row.size() != 3) throw FormatError(kLossCsv, "expected 3 columns");
        curve.train.push_back(row[1]);
        curve.heldout.push_back(row[2]);
      }
    } catch (const InvalidArgument& e) {
      throw FormatError(kLossCsv, e.what());
    }
    textio::write_text(dir / kLossSvg, loss_svg(curve));
    if (!curve.train.empty()) {
      out << "loss: " << curve.train.size() << " epochs, first " << format_number(curve.train.front()) << ", last "
          << format_number(curve.train.back()) << "\n";
    }
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"scflow: invertible flow-matching between (content, style) pairs and merged embeddings"};
  app.name(args.empty() ? "scflow" : args.front());
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic content x style x view embedding grid");
  ConfigFlags gen_flags(gen, {"styles", "contents", "views", "dim", "factor_dim", "hidden_dim", "noise", "seed", "out"});

  auto* tr = app.add_subcommand("train", "Train the velocity field on merge-direction triplets");
  ConfigFlags train_flags(tr, {"epochs", "batches", "batch_size", "lr", "train_fraction", "heldout_batches", "seed",
                               "hidden", "time_freqs", "out"});
  std::string train_grid, resume;
  tr->add_option("--grid", train_grid, "SCF1 grid file")->required();
  tr->add_option("--resume", resume, "SCK1 checkpoint to continue from");

  auto* inf = app.add_subcommand("infer", "Merge (forward) or disentangle (reverse) embeddings");
  InferArgs ia;
  inf->add_option("--ckpt", ia.ckpt, "SCK1 checkpoint")->required();
  inf->add_option("--direction", ia.direction, "forward | reverse")->required();
  inf->add_option("--nfe", ia.nfe, "Number of velocity evaluations per solve");
  inf->add_option("--method", ia.method, "euler | midpoint");
  inf->add_option("--input", ia.input, "CSV of vectors (one per line) or an SCF1 grid");
  inf->add_option("--grid", ia.grid, "SCF1 grid to take --cell vectors from");
  inf->add_option("--cell", ia.cell, "content,style,view of the input (content ref when forward)");
  inf->add_option("--style-cell", ia.style_cell, "content,style,view of the style ref (forward)");
  inf->add_option("-o,--out", ia.output, "Output CSV (default stdout)");
  inf->add_flag("--roundtrip", ia.roundtrip, "After reverse, merge forward again and print cosine to the input");
  inf->add_flag("--renormalize", ia.renormalize, "Unit-normalize merged outputs");

  auto* ev = app.add_subcommand("eval", "Compute the representation-quality report on test contents");
  ConfigFlags eval_flags(ev, {"nfe", "method", "roundtrip_nfe", "restarts", "recall_splits", "merge_triplets", "seed", "out"});
  std::string eval_ckpt, eval_grid;
  ev->add_option("--ckpt", eval_ckpt, "SCK1 checkpoint")->required();
  ev->add_option("--grid", eval_grid, "SCF1 grid")->required();

  auto* ip = app.add_subcommand("interp", "Interpolate between two class means and record similarity curves");
  ConfigFlags interp_flags(ip, {"nfe", "method", "out"});
  InterpArgs pa;
  ip->add_option("--ckpt", pa.ckpt, "SCK1 checkpoint")->required();
  ip->add_option("--grid", pa.grid, "SCF1 grid")->required();
  ip->add_option("--space", pa.space, "content | style");
  ip->add_option("--pair", pa.pair, "Two class ids 'a,b'")->required();
  ip->add_option("--steps", pa.steps, "Points along the path (>= 3)");

  auto* rep = app.add_subcommand("report", "Print a saved report and render the loss curve");
  std::string report_dir = ".";
  rep->add_option("--dir", report_dir, "Directory holding report.json (and optionally loss.csv)");

  try {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_flags, out);
    if (tr->parsed()) return cmd_train(train_flags, train_grid, resume, out);
    if (inf->parsed()) return cmd_infer(ia, out, err);
    if (ev->parsed()) return cmd_eval(eval_flags, eval_ckpt, eval_grid, out);
    if (ip->parsed()) return cmd_interp(interp_flags, pa, out);
    if (rep->parsed()) return cmd_report(report_dir, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    err << "error: numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}

}  // namespace scflow::cli
