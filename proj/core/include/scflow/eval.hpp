#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scflow/flowcore.hpp"
#include "scflow/flownet.hpp"
#include "scflow/synthgen.hpp"

namespace scflow::eval {

struct LabeledPoints {
  Eigen::MatrixXd points;  // n x dim
  std::vector<int> labels;
};

struct ClusterAssignment {
  std::vector<int> assignment;
  Eigen::MatrixXd centroids;  // k x dim
  double inertia = 0.0;
  /// Inertia after each Lloyd iteration of the winning restart.
  std::vector<double> inertia_trace;
};

struct KMeansOptions {
  int restarts = 10;
  int max_iter = 100;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

/// Lloyd's algorithm with k-means++ seeding on Euclidean distance. Best
/// restart by inertia; ties go to the lowest restart index. An emptied
/// cluster is reseeded with the point farthest from its centroid.
ClusterAssignment kmeans(const Eigen::MatrixXd& points, int k, const KMeansOptions& opts = {});

/// 2 I(A;B) / (H(A) + H(B)), natural logs.
double nmi(const std::vector<int>& a, const std::vector<int>& b);

/// (S_B / (K - 1)) / (S_W / (N - K)); +inf when S_W == 0.
double fdr(const Eigen::MatrixXd& points, const std::vector<int>& labels);

/// Cosine-distance kNN vote. Ties go to the smaller summed distance, then
/// the lower label.
std::vector<int> knn_classify(const LabeledPoints& train, const Eigen::MatrixXd& queries, int k);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Fraction of queries with a same-label item among their k nearest gallery
/// points by cosine distance.
double recall_at_k(const LabeledPoints& queries, const LabeledPoints& gallery, int k);

struct InterpProbe {
  Eigen::MatrixXd path;  // steps x dim, row s = (1 - s/(steps-1)) z_a + s/(steps-1) z_b
  std::vector<double> lambda;
  std::vector<double> sim_a;
  std::vector<double> sim_b;
  int monotonicity_violations = 0;
  double max_second_diff = 0.0;
};

InterpProbe interp_probe(const Eigen::VectorXd& z_a, const Eigen::VectorXd& z_b, int steps);

/// Mean over rows of stddev/mean (population) of distances to every centroid.
/// +inf when some row has zero mean distance.
double equidistance_cv(const Eigen::MatrixXd& content_halves, const Eigen::MatrixXd& style_centroids);

/// Per-label mean rows, ordered by label id 0..max.
Eigen::MatrixXd class_centroids(const Eigen::MatrixXd& points, const std::vector<int>& labels);

/// Projection onto the top two principal components. The sign of each axis
/// is fixed so its largest-magnitude loading is positive.
Eigen::MatrixXd pca_2d(const Eigen::MatrixXd& points);

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Documented metric key set of the report, in serialization order.
const std::vector<std::string>& report_metric_keys();

struct EvalReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  int nfe = 1;
  std::string timestamp;
  std::map<std::string, double> metrics;

  [[nodiscard]] std::string to_json() const;
  static EvalReport from_json(const std::string& text);
};

struct EvalConfig {
  int nfe = 1;
  flow::Method method = flow::Method::kEuler;
  int roundtrip_nfe = 64;
  int kmeans_restarts = 10;
  int kmeans_max_iter = 100;
  double kmeans_tol = 1e-6;
  std::vector<int> knn_ks{1, 5, 10};
  std::vector<int> recall_ks{1, 10};
  int recall_splits = 5;
  double query_fraction = 0.2;
  double knn_reference_fraction = 0.1;
  int merge_triplets = 1000;
  std::uint64_t seed = 1;
};

/// Embeddings of all test cells with their labels and reverse-flow halves.
struct TestSpace {
  Eigen::MatrixXd raw;
  Eigen::MatrixXd content_half;
  Eigen::MatrixXd style_half;
  std::vector<int> content_labels;  // dense 0..n_test-1
  std::vector<int> content_ids;     // grid content index
  std::vector<int> style_labels;
};

TestSpace disentangle_test_cells(const net::NetParams& params, const synth::DatasetSplit& split,
                                 const flow::SolverConfig& cfg);

/// Median cosine between each raw test embedding and merge_forward applied
/// to its own reverse halves, both at `nfe`.
double roundtrip_cosine_median(const net::NetParams& params, const Eigen::MatrixXd& raw, int nfe,
                               flow::Method method = flow::Method::kEuler);

/// Top-1 accuracy of nearest test-cell mean (cosine) for merged test triplets.
double merge_retrieval_top1(const net::NetParams& params, const synth::DatasetSplit& split,
                            int n_triplets, const flow::SolverConfig& cfg, std::uint64_t seed);

/// Separability and equidistance of the untransformed test embeddings:
/// style_fdr_raw, content_fdr_raw, equidistance_cv_raw.
std::map<std::string, double> raw_baselines(const synth::DatasetSplit& split);

/// Full metric battery on the test contents.
EvalReport evaluate_model(const net::NetParams& params, const synth::DatasetSplit& split,
                          const EvalConfig& cfg);

}  // namespace scflow::eval
