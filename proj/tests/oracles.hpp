#pragma once

// Reference computations for the tests. Everything here is written with
// plain loops and std:: math so it shares no code path with the library.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "scflow/flownet.hpp"

namespace oracle {

inline double silu(double a) { return a / (1.0 + std::exp(-a)); }

/// Velocity of one row, evaluated layer by layer with scalar loops.
inline std::vector<double> mlp_row(const scflow::net::NetParams& p, const std::vector<double>& x, double t) {
  const int freqs = p.arch.time_freqs;
  std::vector<double> h = x;
  for (int k = 0; k < freqs; ++k) h.push_back(std::sin(2.0 * M_PI * std::pow(2.0, k) * t));
  for (int k = 0; k < freqs; ++k) h.push_back(std::cos(2.0 * M_PI * std::pow(2.0, k) * t));
  const int n_layers = static_cast<int>(p.layers.size());
  for (int l = 0; l < n_layers; ++l) {
    const auto& w = p.layers[l].weight;
    std::vector<double> next(w.rows());
    for (int r = 0; r < w.rows(); ++r) {
      double acc = p.layers[l].bias(r);
      for (int c = 0; c < w.cols(); ++c) acc += w(r, c) * h[c];
      next[r] = l + 1 < n_layers ? silu(acc) : acc;
    }
    h = std::move(next);
  }
  return h;
}

/// Flow-matching loss at fixed times: mean over rows and coordinates of
/// (v(x_t, t) - (x1 - x0))^2.
inline double fm_loss(const scflow::net::NetParams& p, const Eigen::MatrixXd& x0, const Eigen::MatrixXd& x1,
                      const Eigen::VectorXd& t) {
  double total = 0.0;
  for (int r = 0; r < x0.rows(); ++r) {
    std::vector<double> xt(x0.cols());
    for (int c = 0; c < x0.cols(); ++c) xt[c] = (1.0 - t(r)) * x0(r, c) + t(r) * x1(r, c);
    const auto v = mlp_row(p, xt, t(r));
    for (int c = 0; c < x0.cols(); ++c) {
      const double d = v[c] - (x1(r, c) - x0(r, c));
      total += d * d;
    }
  }
  return total / static_cast<double>(x0.rows() * x0.cols());
}

/// Net whose output is scale * x exactly up to rounding, using
/// silu(a) - silu(-a) = a. One hidden layer of width 2 * state_dim.
inline scflow::net::NetParams linear_field_net(int embed_dim, double scale) {
  scflow::net::NetArch arch;
  arch.embed_dim = embed_dim;
  arch.hidden_widths = {4 * embed_dim};
  arch.time_freqs = 1;
  scflow::net::NetParams p = scflow::net::init_velocity_net(arch, 0);
  const int s = arch.state_dim();
  p.layers[0].weight.setZero();
  p.layers[0].weight.topLeftCorner(s, s) = Eigen::MatrixXd::Identity(s, s);
  p.layers[0].weight.block(s, 0, s, s) = -Eigen::MatrixXd::Identity(s, s);
  p.layers[1].weight.leftCols(s) = scale * Eigen::MatrixXd::Identity(s, s);
  p.layers[1].weight.rightCols(s) = -scale * Eigen::MatrixXd::Identity(s, s);
  return p;
}

/// Net with a constant output k (zero final weights, bias k).
inline scflow::net::NetParams constant_field_net(const Eigen::VectorXd& k) {
  scflow::net::NetArch arch;
  arch.embed_dim = static_cast<int>(k.size() / 2);
  arch.hidden_widths = {8};
  arch.time_freqs = 2;
  scflow::net::NetParams p = scflow::net::init_velocity_net(arch, 3);
  p.layers.back().bias = k;
  return p;
}

inline double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return 1.0 - a.dot(b) / (a.norm() * b.norm());
}

/// Rank of gallery point g for a query: how many points are strictly closer,
/// or equally close with a lower index.
inline int rank_of(const std::vector<double>& dist, int g) {
  int rank = 0;
  for (int i = 0; i < static_cast<int>(dist.size()); ++i) {
    if (dist[i] < dist[g] || (dist[i] == dist[g] && i < g)) ++rank;
  }
  return rank;
}

inline std::vector<int> knn(const Eigen::MatrixXd& train, const std::vector<int>& labels, const Eigen::MatrixXd& queries,
                            int k) {
  std::vector<int> out;
  for (int q = 0; q < queries.rows(); ++q) {
    std::vector<double> dist(train.rows());
    for (int i = 0; i < train.rows(); ++i) dist[i] = cosine_distance(train.row(i), queries.row(q));
    std::map<int, int> count;
    std::map<int, double> sum;
    for (int i = 0; i < train.rows(); ++i) {
      if (rank_of(dist, i) < k) {
        count[labels[i]] += 1;
        sum[labels[i]] += dist[i];
      }
    }
    int best = -1;
    for (const auto& [label, c] : count) {
      if (best < 0 || c > count[best] || (c == count[best] && sum[label] < sum[best])) best = label;
    }
    out.push_back(best);
  }
  return out;
}

inline double recall(const Eigen::MatrixXd& queries, const std::vector<int>& qlabels, const Eigen::MatrixXd& gallery,
                     const std::vector<int>& glabels, int k) {
  int hits = 0;
  for (int q = 0; q < queries.rows(); ++q) {
    std::vector<double> dist(gallery.rows());
    for (int i = 0; i < gallery.rows(); ++i) dist[i] = cosine_distance(gallery.row(i), queries.row(q));
    bool hit = false;
    for (int i = 0; i < gallery.rows(); ++i) hit = hit || (glabels[i] == qlabels[q] && rank_of(dist, i) < k);
    hits += hit ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(queries.rows());
}

/// Minimum-inertia 2-partition by exhaustive enumeration.
inline std::pair<std::vector<int>, double> best_two_partition(const Eigen::MatrixXd& x) {
  const int n = static_cast<int>(x.rows());
  std::vector<int> best;
  double best_inertia = INFINITY;
  for (int mask = 1; mask < (1 << n) - 1; ++mask) {
    std::vector<int> a(n);
    Eigen::RowVectorXd c[2] = {Eigen::RowVectorXd::Zero(x.cols()), Eigen::RowVectorXd::Zero(x.cols())};
    int counts[2] = {0, 0};
    for (int i = 0; i < n; ++i) {
      a[i] = (mask >> i) & 1;
      c[a[i]] += x.row(i);
      ++counts[a[i]];
    }
    c[0] /= counts[0];
    c[1] /= counts[1];
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) inertia += (x.row(i) - c[a[i]]).squaredNorm();
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best = a;
    }
  }
  return {best, best_inertia};
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("scflow_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
