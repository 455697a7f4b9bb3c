#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace scflow::net {

/// MLP velocity field: input concat(x, time_embed(t)), silu hidden layers,
/// linear output of the same width as x.
struct NetArch {
  int embed_dim = 64;
  std::vector<int> hidden_widths{256, 256, 256};
  int time_freqs = 8;

  [[nodiscard]] int time_dim() const { return 2 * time_freqs; }
  [[nodiscard]] int state_dim() const { return 2 * embed_dim; }
  [[nodiscard]] int in_dim() const { return state_dim() + time_dim(); }
  [[nodiscard]] int out_dim() const { return state_dim(); }
  [[nodiscard]] int n_layers() const { return static_cast<int>(hidden_widths.size()) + 1; }
  /// (fan_in, fan_out) of layer l.
  [[nodiscard]] std::pair<int, int> layer_shape(int l) const;
  [[nodiscard]] std::size_t parameter_count() const;

  /// Throws InvalidArgument on empty or non-positive widths.
  void validate() const;

  friend bool operator==(const NetArch&, const NetArch&) = default;
};

struct Layer {
  Eigen::MatrixXd weight;  // fan_out x fan_in
  Eigen::VectorXd bias;    // fan_out
};

/// Parameters of the velocity net. Gradients and Adam moments share this
/// layout, so the same type carries all of them.
struct NetParams {
  NetArch arch;
  std::vector<Layer> layers;

  [[nodiscard]] std::size_t parameter_count() const;
  [[nodiscard]] bool all_finite() const;
  /// Same shapes, all zeros.
  [[nodiscard]] NetParams zeros_like() const;
  /// Rounds every entry to the nearest float32 value.
  void round_to_float();
};

using Gradients = NetParams;

/// Hidden weights ~ N(0, 2/fan_in), biases 0, final layer 0 so the
/// untrained field is identically zero.
NetParams init_velocity_net(const NetArch& arch, std::uint64_t seed);

/// [sin(2 pi 2^k t), cos(2 pi 2^k t)] for k = 0..time_freqs-1, sines first.
Eigen::VectorXd time_embed(double t, int time_freqs);

struct ForwardCache {
  Eigen::MatrixXd input;                 // batch x in_dim
  std::vector<Eigen::MatrixXd> pre;      // hidden pre-activations
  std::vector<Eigen::MatrixXd> post;     // hidden activations
  NetArch arch;
  bool consumed = false;
};

struct ForwardResult {
  Eigen::MatrixXd v;  // batch x out_dim
  ForwardCache cache;
};

/// Rows of x are states, t holds one time per row.
ForwardResult net_forward(const NetParams& params, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& t);

/// Output only, without keeping activations.
Eigen::MatrixXd net_velocity(const NetParams& params, const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& t);

/// Reverse-mode pass for upstream gradient dL/dv. The caller chooses the
/// reduction (fm_loss passes 2 (v - target) / (batch * dim)). Consumes the
/// cache; a second call with the same cache throws InvalidState.
Gradients net_backward(const NetParams& params, ForwardCache& cache, const Eigen::MatrixXd& dl_dv);

struct AdamState {
  NetParams m;
  NetParams v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const NetParams& params, double beta1 = 0.9, double beta2 = 0.999,
                              double eps = 1e-8);
};

/// Bias-corrected Adam update in place. Throws NumericError before touching
/// anything if a gradient is non-finite.
void adam_step(NetParams& params, const Gradients& grads, AdamState& state, double lr);

}  // namespace scflow::net
