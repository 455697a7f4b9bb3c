#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "scflow/flownet.hpp"
#include "scflow/rng.hpp"
#include "scflow/synthgen.hpp"

namespace scflow::flow {

/// alpha(t) = 1 - t, sigma(t) = t. x_t = alpha x0 + sigma x1.
struct LinearSchedule {
  static constexpr double alpha(double t) { return 1.0 - t; }
  static constexpr double sigma(double t) { return t; }
  static constexpr double alpha_dot() { return -1.0; }
  static constexpr double sigma_dot() { return 1.0; }
};

enum class Direction { kForward, kReverse };  // 0 -> 1 merges, 1 -> 0 disentangles
enum class Method { kEuler, kMidpoint };

std::string to_string(Direction d);
std::string to_string(Method m);
Direction direction_from_string(const std::string& s);
Method method_from_string(const std::string& s);

struct SolverConfig {
  Direction direction = Direction::kForward;
  int nfe = 1;
  Method method = Method::kEuler;

  [[nodiscard]] double step() const { return (direction == Direction::kForward ? 1.0 : -1.0) / nfe; }
};

Eigen::VectorXd interpolate(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1, double t);
Eigen::VectorXd target_velocity(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1);

struct LossResult {
  double loss = 0.0;
  net::Gradients grads;
  Eigen::VectorXd t;       // sampled time per row
  Eigen::MatrixXd x_t;     // interpolated states
  Eigen::MatrixXd target;  // x1 - x0
};

/// Mean over rows and coordinates of |v(x_t, t) - (x1 - x0)|^2 at the given
/// times, with exact gradients.
LossResult fm_loss_at(const net::NetParams& params, const Eigen::MatrixXd& x0,
                      const Eigen::MatrixXd& x1, const Eigen::VectorXd& t);

/// Draws t ~ U[0, 1] per row from rng, then fm_loss_at.
LossResult fm_loss(const net::NetParams& params, const synth::TripletBatch& batch, Rng& rng);

/// Any velocity field v(x, t) over a batch of row states.
using VelocityField = std::function<Eigen::MatrixXd(const Eigen::MatrixXd& x, double t)>;

VelocityField as_field(const net::NetParams& params);

/// Integrates dx/dt = v(x, t) over [0, 1] (forward) or [1, 0] (reverse) in
/// nfe uniform steps. Throws NumericError naming the step on NaN/inf.
Eigen::MatrixXd ode_solve(const VelocityField& field, const Eigen::MatrixXd& x, const SolverConfig& cfg);
Eigen::MatrixXd ode_solve(const net::NetParams& params, const Eigen::MatrixXd& x, const SolverConfig& cfg);

/// Forward merge: solve from [content_ref, style_ref] and average the halves.
/// Rows are independent inputs.
Eigen::MatrixXd merge_forward(const net::NetParams& params, const Eigen::MatrixXd& content_refs,
                              const Eigen::MatrixXd& style_refs, const SolverConfig& cfg,
                              bool renormalize = false);
Eigen::VectorXd merge_forward(const net::NetParams& params, const Eigen::VectorXd& content_ref,
                              const Eigen::VectorXd& style_ref, const SolverConfig& cfg,
                              bool renormalize = false);

struct Disentangled {
  Eigen::MatrixXd content;  // first halves
  Eigen::MatrixXd style;    // second halves
};

/// Reverse disentangle: solve backward from [z, z] and split the halves.
Disentangled disentangle_reverse(const net::NetParams& params, const Eigen::MatrixXd& z_mix,
                                 const SolverConfig& cfg);
std::pair<Eigen::VectorXd, Eigen::VectorXd> disentangle_reverse(const net::NetParams& params,
                                                                const Eigen::VectorXd& z_mix,
                                                                const SolverConfig& cfg);

struct TrainConfig {
  int epochs = 30;
  int batches_per_epoch = 200;
  int batch_size = 256;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  int eval_nfe = 1;
  int heldout_batches = 4;
  double train_fraction = 0.7;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct LossCurve {
  std::vector<double> train;
  std::vector<double> heldout;
};

/// Everything needed to continue a run: parameters, optimizer state, and the
/// position in the counter-based batch stream (one position per step).
struct TrainState {
  net::NetParams params;
  net::AdamState adam;
  std::uint64_t rng_position = 0;
  LossCurve history;
};

TrainState fresh_train_state(const net::NetArch& arch, const TrainConfig& cfg);

struct TrainHooks {
  /// Called after every epoch; may persist the state and return the path
  /// written (empty when nothing was saved).
  std::function<std::string(const TrainState&, int epoch)> on_epoch;
};

/// Runs optimizer steps until epochs * batches_per_epoch are done. The
/// starting state must sit on an epoch boundary. Deterministic in cfg.seed.
TrainState train(TrainState state, const synth::DatasetSplit& split, const TrainConfig& cfg,
                 const TrainHooks& hooks = {});

/// Mean loss over `batches` test-content triplet batches, no updates.
double heldout_loss(const net::NetParams& params, const synth::DatasetSplit& split,
                    const TrainConfig& cfg);

}  // namespace scflow::flow
