#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "scflow/rng.hpp"

namespace scflow::synth {

/// Latent identities of contents and styles: one unit-norm row per factor.
struct FactorSet {
  Eigen::MatrixXd content;  // n_contents x factor_dim
  Eigen::MatrixXd style;    // n_styles x factor_dim
  std::uint64_t seed = 0;

  [[nodiscard]] int n_contents() const { return static_cast<int>(content.rows()); }
  [[nodiscard]] int n_styles() const { return static_cast<int>(style.rows()); }
  [[nodiscard]] int factor_dim() const { return static_cast<int>(content.cols()); }
};

FactorSet generate_factors(int n_contents, int n_styles, int factor_dim, std::uint64_t seed);

/// Fixed random nonlinear map from (content factor, style factor) to an
/// embedding. The bilinear term D * (c .* (P s)) mixes the two factors
/// multiplicatively, so no linear projection separates them.
struct EntanglerParams {
  Eigen::MatrixXd A, B;  // hidden x factor
  Eigen::MatrixXd P;     // factor x factor
  Eigen::MatrixXd C;     // embed x hidden
  Eigen::MatrixXd D;     // embed x factor
  Eigen::VectorXd b1;    // hidden
  Eigen::VectorXd b2;    // embed
  std::uint64_t seed = 0;

  [[nodiscard]] int factor_dim() const { return static_cast<int>(A.cols()); }
  [[nodiscard]] int hidden_dim() const { return static_cast<int>(A.rows()); }
  [[nodiscard]] int embed_dim() const { return static_cast<int>(C.rows()); }
};

EntanglerParams make_entangler(int factor_dim, int hidden_dim, int embed_dim, std::uint64_t seed);

/// normalize(tanh(C tanh(A c + B s + b1) + D (c .* (P s)) + b2))
Eigen::VectorXd entangle(const EntanglerParams& ent, const Eigen::VectorXd& c,
                         const Eigen::VectorXd& s);

enum class Provenance { kSynthetic, kImported };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

/// Complete content x style x view tensor of unit-norm float32 embeddings,
/// stored row-major in (content, style, view, dim) order. Labels are the
/// content and style indices.
class EmbeddingGrid {
 public:
  EmbeddingGrid(int n_contents, int n_styles, int n_views, int embed_dim, double noise_sigma,
                Provenance provenance, std::uint64_t seed, std::vector<float> data);

  [[nodiscard]] int n_contents() const { return n_contents_; }
  [[nodiscard]] int n_styles() const { return n_styles_; }
  [[nodiscard]] int n_views() const { return n_views_; }
  [[nodiscard]] int embed_dim() const { return embed_dim_; }
  [[nodiscard]] double noise_sigma() const { return noise_sigma_; }
  [[nodiscard]] Provenance provenance() const { return provenance_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::size_t n_embeddings() const {
    return static_cast<std::size_t>(n_contents_) * n_styles_ * n_views_;
  }

  [[nodiscard]] std::span<const float> cell(int content, int style, int view) const;
  [[nodiscard]] Eigen::VectorXd cell_vector(int content, int style, int view) const;
  /// Mean over views of one (content, style) cell.
  [[nodiscard]] Eigen::VectorXd cell_mean(int content, int style) const;
  [[nodiscard]] std::span<const float> data() const { return data_; }

  friend bool operator==(const EmbeddingGrid&, const EmbeddingGrid&) = default;

 private:
  [[nodiscard]] std::size_t offset(int content, int style, int view) const;

  int n_contents_;
  int n_styles_;
  int n_views_;
  int embed_dim_;
  double noise_sigma_;
  Provenance provenance_;
  std::uint64_t seed_;
  std::vector<float> data_;
};

/// z[i,j,v] = normalize(entangle(c_i, s_j) + eps), eps ~ N(0, sigma^2 I).
/// Cells are independent and filled in parallel; noise for a cell is drawn
/// from a stream keyed by (seed, i, j) so the result is thread-count invariant.
EmbeddingGrid build_grid(const FactorSet& factors, const EntanglerParams& entangler, int n_views,
                         double noise_sigma, std::uint64_t seed);

/// Desk-scale dataset family.
struct GridSpec {
  int n_contents = 64;
  int n_styles = 12;
  int n_views = 8;
  int factor_dim = 16;
  int hidden_dim = 128;
  int embed_dim = 64;
  double noise_sigma = 0.05;
  std::uint64_t seed = 1;
};

/// Factors, entangler and grid from one seed.
EmbeddingGrid generate_grid(const GridSpec& spec);

void write_grid(const EmbeddingGrid& grid, const std::filesystem::path& path);
EmbeddingGrid read_grid(const std::filesystem::path& path);

/// Train/test partition of contents. Every style belongs to both sides.
struct DatasetSplit {
  std::shared_ptr<const EmbeddingGrid> grid;
  std::vector<int> train_contents;  // sorted
  std::vector<int> test_contents;   // sorted
};

DatasetSplit split_grid(std::shared_ptr<const EmbeddingGrid> grid, double train_fraction,
                        std::uint64_t seed);

struct TripletIndex {
  int content = 0;        // i: content of the merged target
  int style = 0;          // j: style of the merged target
  int other_style = 0;    // a: style carried by the content reference
  int other_content = 0;  // b: content carried by the style reference
  int view_content_ref = 0;
  int view_style_ref = 0;
  int view_target = 0;
};

/// x0 = [z(i,a), z(b,j)], x1 = [z(i,j), z(i,j)] row by row.
struct TripletBatch {
  Eigen::MatrixXd x0;
  Eigen::MatrixXd x1;
  std::vector<TripletIndex> indices;

  [[nodiscard]] int size() const { return static_cast<int>(x0.rows()); }
};

enum class Subset { kTrain, kTest };

TripletBatch sample_triplet_batch(const DatasetSplit& split, int batch_size, Rng& rng,
                                  Subset subset = Subset::kTrain);

}  // namespace scflow::synth
