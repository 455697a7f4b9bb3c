#include "scflow/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scflow/error.hpp"
#include "scflow/parallel.hpp"

namespace scflow::synth {
namespace {

Eigen::MatrixXd gaussian(int rows, int cols, double scale, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  // Fill row by row so the draw order matches the row-major file layout.
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = scale * normal(rng);
  }
  return m;
}

void normalize_rows(Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r).normalize();
}

}  // namespace

FactorSet generate_factors(int n_contents, int n_styles, int factor_dim, std::uint64_t seed) {
  if (n_contents < 2) throw InvalidArgument("n_contents must be >= 2, got " + std::to_string(n_contents));
  if (n_styles < 2) throw InvalidArgument("n_styles must be >= 2, got " + std::to_string(n_styles));
  if (factor_dim < 2) throw InvalidArgument("factor_dim must be >= 2, got " + std::to_string(factor_dim));

  Rng rng = derive_rng(seed, Stream::kFactors);
  FactorSet f;
  f.seed = seed;
  f.content = gaussian(n_contents, factor_dim, 1.0, rng);
  f.style = gaussian(n_styles, factor_dim, 1.0, rng);
  normalize_rows(f.content);
  normalize_rows(f.style);
  return f;
}

EntanglerParams make_entangler(int factor_dim, int hidden_dim, int embed_dim, std::uint64_t seed) {
  if (factor_dim < 1 || hidden_dim < 1 || embed_dim < 1) {
    throw InvalidArgument("entangler dimensions must be positive");
  }
  Rng rng = derive_rng(seed, Stream::kEntangler);
  const double f_scale = 1.0 / std::sqrt(static_cast<double>(factor_dim));
  const double h_scale = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  EntanglerParams e;
  e.seed = seed;
  e.A = gaussian(hidden_dim, factor_dim, f_scale, rng);
  e.B = gaussian(hidden_dim, factor_dim, f_scale, rng);
  e.P = gaussian(factor_dim, factor_dim, f_scale, rng);
  e.C = gaussian(embed_dim, hidden_dim, h_scale, rng);
  e.D = gaussian(embed_dim, factor_dim, f_scale, rng);
  e.b1 = gaussian(hidden_dim, 1, f_scale, rng);
  e.b2 = gaussian(embed_dim, 1, h_scale, rng);
  return e;
}

Eigen::VectorXd entangle(const EntanglerParams& ent, const Eigen::VectorXd& c,
                         const Eigen::VectorXd& s) {
  if (c.size() != ent.factor_dim() || s.size() != ent.factor_dim()) {
    throw InvalidArgument("entangle: factor vectors must have " + std::to_string(ent.factor_dim()) +
                          " entries, got " + std::to_string(c.size()) + " and " +
                          std::to_string(s.size()));
  }
  const Eigen::VectorXd hidden = (ent.A * c + ent.B * s + ent.b1).array().tanh().matrix();
  const Eigen::VectorXd bilinear = ent.D * c.cwiseProduct(ent.P * s);
  Eigen::VectorXd out = (ent.C * hidden + bilinear + ent.b2).array().tanh().matrix();
  const double norm = out.norm();
  if (!(norm > 1e-12)) throw DegenerateEmbedding("entangle produced a zero vector");
  return out / norm;
}

std::string to_string(Provenance p) {
  return p == Provenance::kSynthetic ? "synthetic" : "imported";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "synthetic") return Provenance::kSynthetic;
  if (s == "imported") return Provenance::kImported;
  throw InvalidArgument("unknown provenance '" + s + "'");
}

EmbeddingGrid::EmbeddingGrid(int n_contents, int n_styles, int n_views, int embed_dim,
                             double noise_sigma, Provenance provenance, std::uint64_t seed,
                             std::vector<float> data)
    : n_contents_(n_contents),
      n_styles_(n_styles),
      n_views_(n_views),
      embed_dim_(embed_dim),
      noise_sigma_(noise_sigma),
      provenance_(provenance),
      seed_(seed),
      data_(std::move(data)) {
  if (n_contents < 1 || n_styles < 1 || n_views < 1 || embed_dim < 1) {
    throw InvalidArgument("grid dimensions must be positive");
  }
  if (data_.size() != n_embeddings() * static_cast<std::size_t>(embed_dim)) {
    throw InvalidArgument("grid data has " + std::to_string(data_.size()) + " values, expected " +
                          std::to_string(n_embeddings() * embed_dim));
  }
}

std::size_t EmbeddingGrid::offset(int content, int style, int view) const {
  if (content < 0 || content >= n_contents_ || style < 0 || style >= n_styles_ || view < 0 ||
      view >= n_views_) {
    throw InvalidArgument("grid index out of range");
  }
  return ((static_cast<std::size_t>(content) * n_styles_ + style) * n_views_ + view) * embed_dim_;
}

std::span<const float> EmbeddingGrid::cell(int content, int style, int view) const {
  return std::span<const float>(data_).subspan(offset(content, style, view), embed_dim_);
}

Eigen::VectorXd EmbeddingGrid::cell_vector(int content, int style, int view) const {
  const auto s = cell(content, style, view);
  return Eigen::Map<const Eigen::VectorXf>(s.data(), embed_dim_).cast<double>();
}

Eigen::VectorXd EmbeddingGrid::cell_mean(int content, int style) const {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(embed_dim_);
  for (int v = 0; v < n_views_; ++v) mean += cell_vector(content, style, v);
  return mean / n_views_;
}

EmbeddingGrid build_grid(const FactorSet& factors, const EntanglerParams& entangler, int n_views,
                         double noise_sigma, std::uint64_t seed) {
  if (n_views < 1) throw InvalidArgument("n_views must be >= 1");
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be >= 0");
  if (factors.factor_dim() != entangler.factor_dim()) {
    throw InvalidArgument("factor_dim of factors and entangler differ");
  }
  const int nc = factors.n_contents();
  const int ns = factors.n_styles();
  const int dim = entangler.embed_dim();
  std::vector<float> data(static_cast<std::size_t>(nc) * ns * n_views * dim);

  parallel_for(static_cast<std::size_t>(nc) * ns, [&](std::size_t cell) {
    const int i = static_cast<int>(cell / ns);
    const int j = static_cast<int>(cell % ns);
    const Eigen::VectorXd clean =
        entangle(entangler, factors.content.row(i).transpose(), factors.style.row(j).transpose());
    Rng rng = derive_rng(seed, Stream::kGridNoise, {static_cast<std::uint64_t>(i),
                                                    static_cast<std::uint64_t>(j)});
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int v = 0; v < n_views; ++v) {
      Eigen::VectorXd z = clean;
      if (noise_sigma > 0.0) {
        for (int d = 0; d < dim; ++d) z(d) += noise_sigma * normal(rng);
      }
      const double norm = z.norm();
      if (!(norm > 1e-12)) throw DegenerateEmbedding("noisy embedding collapsed to zero");
      z /= norm;
      float* dst = data.data() + (cell * n_views + v) * dim;
      for (int d = 0; d < dim; ++d) dst[d] = static_cast<float>(z(d));
    }
  });

  return EmbeddingGrid(nc, ns, n_views, dim, noise_sigma, Provenance::kSynthetic, seed,
                       std::move(data));
}

EmbeddingGrid generate_grid(const GridSpec& spec) {
  const FactorSet factors = generate_factors(spec.n_contents, spec.n_styles, spec.factor_dim, spec.seed);
  const EntanglerParams ent = make_entangler(spec.factor_dim, spec.hidden_dim, spec.embed_dim, spec.seed);
  return build_grid(factors, ent, spec.n_views, spec.noise_sigma, spec.seed);
}

DatasetSplit split_grid(std::shared_ptr<const EmbeddingGrid> grid, double train_fraction,
                        std::uint64_t seed) {
  if (!grid) throw InvalidArgument("split_grid: null grid");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train_fraction must lie in (0, 1)");
  }
  const int n = grid->n_contents();
  if (n < 2) throw InvalidArgument("split_grid needs at least 2 contents");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = derive_rng(seed, Stream::kSplit);
  std::shuffle(order.begin(), order.end(), rng);

  const int n_train = std::clamp(static_cast<int>(std::lround(train_fraction * n)), 1, n - 1);
  DatasetSplit split;
  split.grid = std::move(grid);
  split.train_contents.assign(order.begin(), order.begin() + n_train);
  split.test_contents.assign(order.begin() + n_train, order.end());
  std::sort(split.train_contents.begin(), split.train_contents.end());
  std::sort(split.test_contents.begin(), split.test_contents.end());
  return split;
}

TripletBatch sample_triplet_batch(const DatasetSplit& split, int batch_size, Rng& rng,
                                  Subset subset) {
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (!split.grid) throw InvalidState("split has no grid");
  const auto& contents = subset == Subset::kTrain ? split.train_contents : split.test_contents;
  const EmbeddingGrid& g = *split.grid;
  if (contents.empty() || g.n_styles() < 1) throw InvalidState("cannot sample from an empty split");

  const int dim = g.embed_dim();
  std::uniform_int_distribution<std::size_t> pick_content(0, contents.size() - 1);
  std::uniform_int_distribution<int> pick_style(0, g.n_styles() - 1);
  std::uniform_int_distribution<int> pick_view(0, g.n_views() - 1);

  TripletBatch batch;
  batch.x0.resize(batch_size, 2 * dim);
  batch.x1.resize(batch_size, 2 * dim);
  batch.indices.resize(batch_size);
  for (int r = 0; r < batch_size; ++r) {
    TripletIndex& ix = batch.indices[r];
    ix.content = contents[pick_content(rng)];
    ix.style = pick_style(rng);
    ix.other_style = pick_style(rng);
    ix.other_content = contents[pick_content(rng)];
    ix.view_content_ref = pick_view(rng);
    ix.view_style_ref = pick_view(rng);
    ix.view_target = pick_view(rng);

    const auto content_ref = g.cell(ix.content, ix.other_style, ix.view_content_ref);
    const auto style_ref = g.cell(ix.other_content, ix.style, ix.view_style_ref);
    const auto target = g.cell(ix.content, ix.style, ix.view_target);
    for (int d = 0; d < dim; ++d) {
      batch.x0(r, d) = content_ref[d];
      batch.x0(r, dim + d) = style_ref[d];
      batch.x1(r, d) = target[d];
      batch.x1(r, dim + d) = target[d];
    }
  }
  return batch;
}

}  // namespace scflow::synth
