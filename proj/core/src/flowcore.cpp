#include "scflow/flowcore.hpp"

#include <cmath>
#include <iostream>

#include "scflow/error.hpp"

namespace scflow::flow {
namespace {

void require_same_dims(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* op) {
  if (a.size() != b.size()) {
    throw InvalidArgument(std::string(op) + ": dimension mismatch (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  }
}

void require_direction(const SolverConfig& cfg, Direction expected, const char* op) {
  if (cfg.direction != expected) {
    throw InvalidArgument(std::string(op) + " requires direction " + to_string(expected));
  }
}

// Time at the start of step k. Computed from k rather than accumulated.
double step_time(const SolverConfig& cfg, int k) {
  const double frac = static_cast<double>(k) / cfg.nfe;
  return cfg.direction == Direction::kForward ? frac : 1.0 - frac;
}

}  // namespace

std::string to_string(Direction d) { return d == Direction::kForward ? "forward" : "reverse"; }
std::string to_string(Method m) { return m == Method::kEuler ? "euler" : "midpoint"; }

Direction direction_from_string(const std::string& s) {
  if (s == "forward") return Direction::kForward;
  if (s == "reverse") return Direction::kReverse;
  throw InvalidArgument("direction must be 'forward' or 'reverse', got '" + s + "'");
}

Method method_from_string(const std::string& s) {
  if (s == "euler") return Method::kEuler;
  if (s == "midpoint") return Method::kMidpoint;
  throw InvalidArgument("method must be 'euler' or 'midpoint', got '" + s + "'");
}

Eigen::VectorXd interpolate(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1, double t) {
  require_same_dims(x0, x1, "interpolate");
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("interpolate: t must lie in [0, 1]");
  return LinearSchedule::alpha(t) * x0 + LinearSchedule::sigma(t) * x1;
}

Eigen::VectorXd target_velocity(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1) {
  require_same_dims(x0, x1, "target_velocity");
  return LinearSchedule::alpha_dot() * x0 + LinearSchedule::sigma_dot() * x1;
}

LossResult fm_loss_at(const net::NetParams& params, const Eigen::MatrixXd& x0, const Eigen::MatrixXd& x1,
                      const Eigen::VectorXd& t) {
  if (x0.rows() == 0) throw InvalidArgument("fm_loss: empty batch");
  if (x0.rows() != x1.rows() || x0.cols() != x1.cols() || t.size() != x0.rows()) {
    throw InvalidArgument("fm_loss: x0, x1 and t shapes disagree");
  }
  LossResult r;
  r.t = t;
  const Eigen::VectorXd alpha = t.unaryExpr([](double s) { return LinearSchedule::alpha(s); });
  const Eigen::VectorXd sigma = t.unaryExpr([](double s) { return LinearSchedule::sigma(s); });
  r.x_t = alpha.asDiagonal() * x0 + sigma.asDiagonal() * x1;
  r.target = LinearSchedule::alpha_dot() * x0 + LinearSchedule::sigma_dot() * x1;

  net::ForwardResult fwd = net::net_forward(params, r.x_t, t);
  const Eigen::MatrixXd diff = fwd.v - r.target;
  const double denom = static_cast<double>(diff.rows()) * static_cast<double>(diff.cols());
  r.loss = diff.squaredNorm() / denom;
  if (!std::isfinite(r.loss)) throw NumericError("non-finite flow-matching loss");
  r.grads = net::net_backward(params, fwd.cache, (2.0 / denom) * diff);
  return r;
}

LossResult fm_loss(const net::NetParams& params, const synth::TripletBatch& batch, Rng& rng) {
  if (batch.size() == 0) throw InvalidArgument("fm_loss: empty batch");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Eigen::VectorXd t(batch.size());
  for (int r = 0; r < batch.size(); ++r) t(r) = uniform(rng);
  return fm_loss_at(params, batch.x0, batch.x1, t);
}

VelocityField as_field(const net::NetParams& params) {
  return [&params](const Eigen::MatrixXd& x, double t) {
    return net::net_velocity(params, x, Eigen::VectorXd::Constant(x.rows(), t));
  };
}

Eigen::MatrixXd ode_solve(const VelocityField& field, const Eigen::MatrixXd& x, const SolverConfig& cfg) {
  if (cfg.nfe < 1) throw InvalidArgument("nfe must be >= 1, got " + std::to_string(cfg.nfe));
  const double h = cfg.step();
  Eigen::MatrixXd state = x;
  for (int k = 0; k < cfg.nfe; ++k) {
    const double t = step_time(cfg, k);
    if (cfg.method == Method::kEuler) {
      state += h * field(state, t);
    } else {
      const Eigen::MatrixXd mid = state + (0.5 * h) * field(state, t);
      state += h * field(mid, t + 0.5 * h);
    }
    if (!state.allFinite()) {
      throw NumericError("non-finite ODE state at solver step " + std::to_string(k));
    }
  }
  return state;
}

Eigen::MatrixXd ode_solve(const net::NetParams& params, const Eigen::MatrixXd& x, const SolverConfig& cfg) {
  if (x.cols() != params.arch.state_dim()) {
    throw InvalidArgument("ode_solve: state has " + std::to_string(x.cols()) + " columns, expected " +
                          std::to_string(params.arch.state_dim()));
  }
  return ode_solve(as_field(params), x, cfg);
}

Eigen::MatrixXd merge_forward(const net::NetParams& params, const Eigen::MatrixXd& content_refs,
                              const Eigen::MatrixXd& style_refs, const SolverConfig& cfg,
                              bool renormalize) {
  require_direction(cfg, Direction::kForward, "merge_forward");
  const int dim = params.arch.embed_dim;
  if (content_refs.cols() != dim || style_refs.cols() != dim || content_refs.rows() != style_refs.rows()) {
    throw InvalidArgument("merge_forward: references must be n x " + std::to_string(dim));
  }
  Eigen::MatrixXd x0(content_refs.rows(), 2 * dim);
  x0 << content_refs, style_refs;
  const Eigen::MatrixXd y = ode_solve(params, x0, cfg);
  Eigen::MatrixXd merged = 0.5 * (y.leftCols(dim) + y.rightCols(dim));
  if (renormalize) merged.rowwise().normalize();
  return merged;
}

Eigen::VectorXd merge_forward(const net::NetParams& params, const Eigen::VectorXd& content_ref,
                              const Eigen::VectorXd& style_ref, const SolverConfig& cfg, bool renormalize) {
  for (const auto* v : {&content_ref, &style_ref}) {
    if (v->size() > 0 && std::abs(v->norm() - 1.0) > 1e-3) {
      std::clog << "warning: merge_forward reference has norm " << v->norm() << ", expected 1\n";
    }
  }
  return merge_forward(params, Eigen::MatrixXd(content_ref.transpose()),
                       Eigen::MatrixXd(style_ref.transpose()), cfg, renormalize)
      .row(0)
      .transpose();
}

Disentangled disentangle_reverse(const net::NetParams& params, const Eigen::MatrixXd& z_mix,
                                 const SolverConfig& cfg) {
  require_direction(cfg, Direction::kReverse, "disentangle_reverse");
  const int dim = params.arch.embed_dim;
  if (z_mix.cols() != dim) {
    throw InvalidArgument("disentangle_reverse: input has " + std::to_string(z_mix.cols()) +
                          " entries, expected " + std::to_string(dim));
  }
  Eigen::MatrixXd x1(z_mix.rows(), 2 * dim);
  x1 << z_mix, z_mix;
  const Eigen::MatrixXd y = ode_solve(params, x1, cfg);
  return {y.leftCols(dim), y.rightCols(dim)};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> disentangle_reverse(const net::NetParams& params,
                                                                const Eigen::VectorXd& z_mix,
                                                                const SolverConfig& cfg) {
  Disentangled d = disentangle_reverse(params, Eigen::MatrixXd(z_mix.transpose()), cfg);
  return {d.content.row(0).transpose(), d.style.row(0).transpose()};
}

}  // namespace scflow::flow
