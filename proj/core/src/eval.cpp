#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "scflow/error.hpp"
#include "scflow/eval.hpp"
#include "scflow/parallel.hpp"
#include "scflow/rng.hpp"

namespace scflow::eval {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Nearest centroid by squared Euclidean distance; ties to the lower index.
double assign(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centroids, std::vector<int>& out,
              std::vector<double>& dist) {
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int best = 0;
    double best_d = kInf;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = (x.row(i) - centroids.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    out[i] = best;
    dist[i] = best_d;
    inertia += best_d;
  }
  return inertia;
}

Eigen::MatrixXd kmeans_pp(const Eigen::MatrixXd& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd centroids(k, x.cols());
  std::vector<bool> chosen(n, false);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  Eigen::Index pick = first(rng);
  centroids.row(0) = x.row(pick);
  chosen[pick] = true;
  std::vector<double> d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (x.row(i) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        r -= d2[i];
        if (r < 0.0 && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      while (d2[pick] == 0.0 && pick > 0) --pick;
    } else {
      pick = std::find(chosen.begin(), chosen.end(), false) - chosen.begin();
    }
    centroids.row(c) = x.row(pick);
    chosen[pick] = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (x.row(i) - centroids.row(c)).squaredNorm());
    }
  }
  return centroids;
}

ClusterAssignment lloyd(const Eigen::MatrixXd& x, int k, const KMeansOptions& opts, Rng& rng) {
  const Eigen::Index n = x.rows();
  ClusterAssignment out;
  out.centroids = kmeans_pp(x, k, rng);
  out.assignment.assign(n, 0);
  std::vector<double> dist(n);
  for (int it = 0; it < opts.max_iter; ++it) {
    out.inertia_trace.push_back(assign(x, out.centroids, out.assignment, dist));
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<int> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      next.row(out.assignment[i]) += x.row(i);
      ++counts[out.assignment[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        next.row(c) /= counts[c];
        continue;
      }
      // Empty cluster: take over the point worst served by its centroid.
      const auto far = std::max_element(dist.begin(), dist.end()) - dist.begin();
      next.row(c) = x.row(far);
      dist[far] = 0.0;
    }
    const double shift = (next - out.centroids).rowwise().norm().maxCoeff();
    out.centroids = std::move(next);
    if (shift < opts.tol) break;
  }
  out.inertia = assign(x, out.centroids, out.assignment, dist);
  return out;
}

std::vector<int> dense_labels(const std::vector<int>& labels, int& n_classes) {
  std::map<int, int> ids;
  for (int l : labels) ids.emplace(l, 0);
  int next = 0;
  for (auto& [label, id] : ids) id = next++;
  n_classes = next;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = ids[labels[i]];
  return out;
}

double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  }
  return h;
}

Eigen::MatrixXd unit_rows(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out = x;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

// Indices of the k smallest distances, ordered by (distance, index).
std::vector<Eigen::Index> nearest(const Eigen::VectorXd& dist, int k) {
  std::vector<Eigen::Index> idx(dist.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    return dist(a) < dist(b) || (dist(a) == dist(b) && a < b);
  });
  idx.resize(k);
  return idx;
}

}  // namespace

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

ClusterAssignment kmeans(const Eigen::MatrixXd& points, int k, const KMeansOptions& opts) {
  if (k < 1) throw InvalidArgument("kmeans: k must be >= 1");
  if (points.rows() < k) {
    throw InvalidArgument("kmeans: k=" + std::to_string(k) + " exceeds the number of points " +
                          std::to_string(points.rows()));
  }
  if (opts.restarts < 1 || opts.max_iter < 1) throw InvalidArgument("kmeans: restarts and max_iter must be >= 1");

  std::vector<ClusterAssignment> runs(opts.restarts);
  parallel_for(runs.size(), [&](std::size_t r) {
    Rng rng = derive_rng(opts.seed, Stream::kEval, {0x6b6dU, r});
    runs[r] = lloyd(points, k, opts, rng);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].inertia < runs[best].inertia) best = r;
  }
  return std::move(runs[best]);
}

double nmi(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw InvalidArgument("nmi: label sequences differ in length");
  if (a.empty()) throw InvalidArgument("nmi: empty labelings");
  int ka = 0;
  int kb = 0;
  const auto da = dense_labels(a, ka);
  const auto db = dense_labels(b, kb);
  const double n = static_cast<double>(a.size());

  std::vector<double> ca(ka, 0.0);
  std::vector<double> cb(kb, 0.0);
  std::vector<double> joint(static_cast<std::size_t>(ka) * kb, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[da[i]] += 1.0;
    cb[db[i]] += 1.0;
    joint[static_cast<std::size_t>(da[i]) * kb + db[i]] += 1.0;
  }
  const double ha = entropy(ca, n);
  const double hb = entropy(cb, n);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;

  double mi = 0.0;
  for (int i = 0; i < ka; ++i) {
    for (int j = 0; j < kb; ++j) {
      const double nij = joint[static_cast<std::size_t>(i) * kb + j];
      if (nij > 0.0) mi += (nij / n) * std::log(n * nij / (ca[i] * cb[j]));
    }
  }
  return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

Eigen::MatrixXd class_centroids(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != points.rows()) {
    throw InvalidArgument("class_centroids: one label per point required");
  }
  int k = 0;
  const auto dense = dense_labels(labels, k);
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(k, points.cols());
  std::vector<int> counts(k, 0);
  for (std::size_t i = 0; i < dense.size(); ++i) {
    centroids.row(dense[i]) += points.row(static_cast<Eigen::Index>(i));
    ++counts[dense[i]];
  }
  for (int c = 0; c < k; ++c) centroids.row(c) /= counts[c];
  return centroids;
}

double fdr(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != points.rows()) {
    throw InvalidArgument("fdr: one label per point required");
  }
  int k = 0;
  const auto dense = dense_labels(labels, k);
  if (k < 2) throw InvalidArgument("fdr: at least 2 classes required");
  const auto n = static_cast<double>(points.rows());
  const Eigen::MatrixXd centroids = class_centroids(points, labels);
  const Eigen::RowVectorXd mean = points.colwise().mean();

  std::vector<double> counts(k, 0.0);
  double s_w = 0.0;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    counts[dense[i]] += 1.0;
    s_w += (points.row(static_cast<Eigen::Index>(i)) - centroids.row(dense[i])).squaredNorm();
  }
  double s_b = 0.0;
  for (int c = 0; c < k; ++c) s_b += counts[c] * (centroids.row(c) - mean).squaredNorm();
  if (s_w == 0.0) return kInf;
  return (s_b / (k - 1)) / (s_w / (n - k));
}

std::vector<int> knn_classify(const LabeledPoints& train, const Eigen::MatrixXd& queries, int k) {
  const auto n_train = static_cast<int>(train.points.rows());
  if (static_cast<int>(train.labels.size()) != n_train) throw InvalidArgument("knn: one label per training point required");
  if (k < 1 || k > n_train) {
    throw InvalidArgument("knn: k=" + std::to_string(k) + " must lie in [1, " + std::to_string(n_train) + "]");
  }
  if (queries.cols() != train.points.cols()) throw InvalidArgument("knn: query dimension mismatch");

  const Eigen::MatrixXd ref = unit_rows(train.points);
  const Eigen::MatrixXd q = unit_rows(queries);
  std::vector<int> predicted(q.rows());
  parallel_for(static_cast<std::size_t>(q.rows()), [&](std::size_t qi) {
    const Eigen::VectorXd dist = (1.0 - (ref * q.row(static_cast<Eigen::Index>(qi)).transpose()).array()).matrix();
    std::map<int, std::pair<int, double>> votes;  // label -> (count, summed distance)
    for (Eigen::Index i : nearest(dist, k)) {
      auto& v = votes[train.labels[i]];
      v.first += 1;
      v.second += dist(i);
    }
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it) {
      const auto& [count, sum] = it->second;
      if (count > best->second.first || (count == best->second.first && sum < best->second.second)) best = it;
    }
    predicted[qi] = best->first;
  });
  return predicted;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size() || truth.empty()) throw InvalidArgument("accuracy: size mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double recall_at_k(const LabeledPoints& queries, const LabeledPoints& gallery, int k) {
  const auto n_gallery = static_cast<int>(gallery.points.rows());
  if (n_gallery == 0) throw InvalidArgument("recall_at_k: empty gallery");
  if (k < 1 || k > n_gallery) {
    throw InvalidArgument("recall_at_k: k=" + std::to_string(k) + " must lie in [1, " + std::to_string(n_gallery) + "]");
  }
  if (queries.points.rows() == 0) throw InvalidArgument("recall_at_k: no queries");
  const Eigen::MatrixXd g = unit_rows(gallery.points);
  const Eigen::MatrixXd q = unit_rows(queries.points);
  std::vector<int> hit(q.rows(), 0);
  parallel_for(static_cast<std::size_t>(q.rows()), [&](std::size_t qi) {
    const Eigen::VectorXd dist = (1.0 - (g * q.row(static_cast<Eigen::Index>(qi)).transpose()).array()).matrix();
    for (Eigen::Index i : nearest(dist, k)) {
      if (gallery.labels[i] == queries.labels[qi]) {
        hit[qi] = 1;
        break;
      }
    }
  });
  return static_cast<double>(std::accumulate(hit.begin(), hit.end(), 0)) / static_cast<double>(q.rows());
}

InterpProbe interp_probe(const Eigen::VectorXd& z_a, const Eigen::VectorXd& z_b, int steps) {
  if (steps < 3) throw InvalidArgument("interp_probe: steps must be >= 3");
  if (z_a.size() != z_b.size()) throw InvalidArgument("interp_probe: endpoint dimensions differ");
  if (z_a.norm() == 0.0 || z_b.norm() == 0.0) throw InvalidArgument("interp_probe: zero endpoint");
  InterpProbe p;
  p.path.resize(steps, z_a.size());
  for (int s = 0; s < steps; ++s) {
    const double lambda = static_cast<double>(s) / (steps - 1);
    p.path.row(s) = ((1.0 - lambda) * z_a + lambda * z_b).transpose();
    p.lambda.push_back(lambda);
    p.sim_a.push_back(cosine(p.path.row(s).transpose(), z_a));
    p.sim_b.push_back(cosine(p.path.row(s).transpose(), z_b));
  }
  p.sim_a.front() = 1.0;
  p.sim_b.back() = 1.0;
  constexpr double kSlack = 1e-12;
  for (int s = 0; s + 1 < steps; ++s) {
    if (p.sim_a[s + 1] - p.sim_a[s] > kSlack) ++p.monotonicity_violations;
    if (p.sim_b[s + 1] - p.sim_b[s] < -kSlack) ++p.monotonicity_violations;
  }
  for (int s = 1; s + 1 < steps; ++s) {
    p.max_second_diff = std::max({p.max_second_diff, std::abs(p.sim_a[s + 1] - 2 * p.sim_a[s] + p.sim_a[s - 1]),
                                  std::abs(p.sim_b[s + 1] - 2 * p.sim_b[s] + p.sim_b[s - 1])});
  }
  return p;
}

double equidistance_cv(const Eigen::MatrixXd& content_halves, const Eigen::MatrixXd& style_centroids) {
  if (style_centroids.rows() < 2) throw InvalidArgument("equidistance_cv: at least 2 centroids required");
  if (content_halves.cols() != style_centroids.cols()) throw InvalidArgument("equidistance_cv: dimension mismatch");
  if (content_halves.rows() == 0) throw InvalidArgument("equidistance_cv: no vectors");
  const auto k = static_cast<double>(style_centroids.rows());
  double total = 0.0;
  for (Eigen::Index i = 0; i < content_halves.rows(); ++i) {
    const Eigen::VectorXd d = (style_centroids.rowwise() - content_halves.row(i)).rowwise().norm();
    const double mean = d.mean();
    if (mean == 0.0) return kInf;
    const double var = (d.array() - mean).square().sum() / k;
    total += std::sqrt(var) / mean;
  }
  return total / static_cast<double>(content_halves.rows());
}

Eigen::MatrixXd pca_2d(const Eigen::MatrixXd& points) {
  if (points.rows() < 2) throw InvalidArgument("pca_2d: at least 2 points required");
  const Eigen::MatrixXd centered = points.rowwise() - points.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(points.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::Index d = cov.rows();
  Eigen::MatrixXd axes = Eigen::MatrixXd::Zero(d, 2);
  for (Eigen::Index a = 0; a < std::min<Eigen::Index>(2, d); ++a) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - a);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    axes.col(a) = v;
  }
  return centered * axes;
}

}  // namespace scflow::eval
