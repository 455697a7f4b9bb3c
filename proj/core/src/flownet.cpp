#include "scflow/flownet.hpp"

#include <cmath>
#include <numbers>

#include "scflow/error.hpp"
#include "scflow/rng.hpp"

namespace scflow::net {
namespace {

Eigen::MatrixXd silu(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double a) { return a / (1.0 + std::exp(-a)); });
}

Eigen::MatrixXd silu_grad(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double a) {
    const double s = 1.0 / (1.0 + std::exp(-a));
    return s * (1.0 + a * (1.0 - s));
  });
}

template <typename Fn>
void for_each_tensor(NetParams& p, Fn fn) {
  for (auto& layer : p.layers) {
    fn(layer.weight);
    fn(layer.bias);
  }
}

Eigen::MatrixXd build_input(const NetArch& arch, const Eigen::MatrixXd& x, const Eigen::VectorXd& t) {
  if (x.cols() != arch.state_dim()) {
    throw InvalidArgument("net input has " + std::to_string(x.cols()) + " columns, expected " +
                          std::to_string(arch.state_dim()));
  }
  if (t.size() != x.rows()) {
    throw InvalidArgument("net input has " + std::to_string(x.rows()) + " rows but " +
                          std::to_string(t.size()) + " times");
  }
  Eigen::MatrixXd input(x.rows(), arch.in_dim());
  input.leftCols(arch.state_dim()) = x;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    input.row(r).tail(arch.time_dim()) = time_embed(t(r), arch.time_freqs).transpose();
  }
  return input;
}

void check_layer(const Eigen::MatrixXd& m, int layer) {
  if (!m.allFinite()) {
    throw NumericError("non-finite activation in layer " + std::to_string(layer));
  }
}

}  // namespace

std::pair<int, int> NetArch::layer_shape(int l) const {
  const int fan_in = l == 0 ? in_dim() : hidden_widths[l - 1];
  const int fan_out = l == n_layers() - 1 ? out_dim() : hidden_widths[l];
  return {fan_in, fan_out};
}

std::size_t NetArch::parameter_count() const {
  std::size_t n = 0;
  for (int l = 0; l < n_layers(); ++l) {
    const auto [fan_in, fan_out] = layer_shape(l);
    n += static_cast<std::size_t>(fan_in + 1) * fan_out;
  }
  return n;
}

void NetArch::validate() const {
  if (embed_dim < 1) throw InvalidArgument("embed_dim must be >= 1");
  if (time_freqs < 1) throw InvalidArgument("time_freqs must be >= 1");
  if (hidden_widths.empty()) throw InvalidArgument("hidden_widths must not be empty");
  for (int w : hidden_widths) {
    if (w < 1) throw InvalidArgument("hidden widths must be >= 1");
  }
}

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
  return n;
}

bool NetParams::all_finite() const {
  for (const auto& layer : layers) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

NetParams NetParams::zeros_like() const {
  NetParams z{arch, {}};
  for (const auto& layer : layers) {
    z.layers.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                        Eigen::VectorXd::Zero(layer.bias.size())});
  }
  return z;
}

void NetParams::round_to_float() {
  for_each_tensor(*this, [](auto& m) { m = m.template cast<float>().template cast<double>(); });
}

NetParams init_velocity_net(const NetArch& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng = derive_rng(seed, Stream::kNetInit);
  std::normal_distribution<double> normal(0.0, 1.0);
  NetParams p{arch, {}};
  for (int l = 0; l < arch.n_layers(); ++l) {
    const auto [fan_in, fan_out] = arch.layer_shape(l);
    Layer layer{Eigen::MatrixXd::Zero(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    if (l < arch.n_layers() - 1) {
      const double scale = std::sqrt(2.0 / fan_in);
      for (int r = 0; r < fan_out; ++r) {
        for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = scale * normal(rng);
      }
    }
    p.layers.push_back(std::move(layer));
  }
  p.round_to_float();
  return p;
}

Eigen::VectorXd time_embed(double t, int time_freqs) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("time must lie in [0, 1], got " + std::to_string(t));
  if (time_freqs < 1) throw InvalidArgument("time_freqs must be >= 1");
  Eigen::VectorXd e(2 * time_freqs);
  for (int k = 0; k < time_freqs; ++k) {
    // Reduce the phase first so integer periods land exactly on 0.
    const double phase = std::fmod(std::ldexp(t, k), 1.0);
    const double angle = 2.0 * std::numbers::pi * phase;
    e(k) = std::sin(angle);
    e(time_freqs + k) = std::cos(angle);
  }
  return e;
}

ForwardResult net_forward(const NetParams& params, const Eigen::MatrixXd& x, const Eigen::VectorXd& t) {
  const NetArch& arch = params.arch;
  ForwardResult out;
  out.cache.arch = arch;
  out.cache.input = build_input(arch, x, t);
  const Eigen::MatrixXd* h = &out.cache.input;
  const int n_hidden = arch.n_layers() - 1;
  out.cache.pre.reserve(n_hidden);
  out.cache.post.reserve(n_hidden);
  for (int l = 0; l < n_hidden; ++l) {
    const Layer& layer = params.layers[l];
    Eigen::MatrixXd z = *h * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    out.cache.post.push_back(silu(z));
    out.cache.pre.push_back(std::move(z));
    check_layer(out.cache.post.back(), l);
    h = &out.cache.post.back();
  }
  const Layer& last = params.layers.back();
  out.v = *h * last.weight.transpose();
  out.v.rowwise() += last.bias.transpose();
  check_layer(out.v, n_hidden);
  return out;
}

Eigen::MatrixXd net_velocity(const NetParams& params, const Eigen::MatrixXd& x, const Eigen::VectorXd& t) {
  Eigen::MatrixXd h = build_input(params.arch, x, t);
  const int n_hidden = params.arch.n_layers() - 1;
  for (int l = 0; l < n_hidden; ++l) {
    Eigen::MatrixXd z = h * params.layers[l].weight.transpose();
    z.rowwise() += params.layers[l].bias.transpose();
    h = silu(z);
    check_layer(h, l);
  }
  Eigen::MatrixXd v = h * params.layers.back().weight.transpose();
  v.rowwise() += params.layers.back().bias.transpose();
  check_layer(v, n_hidden);
  return v;
}

Gradients net_backward(const NetParams& params, ForwardCache& cache, const Eigen::MatrixXd& dl_dv) {
  if (cache.consumed) throw InvalidState("forward cache already consumed by a backward pass");
  if (!(cache.arch == params.arch) || cache.input.rows() != dl_dv.rows() ||
      dl_dv.cols() != params.arch.out_dim()) {
    throw InvalidState("forward cache does not match parameters or upstream gradient");
  }
  cache.consumed = true;

  const int n_layers = params.arch.n_layers();
  Gradients g{params.arch, std::vector<Layer>(n_layers)};
  Eigen::MatrixXd delta = dl_dv;
  for (int l = n_layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd& h_in = l == 0 ? cache.input : cache.post[l - 1];
    g.layers[l].weight.noalias() = delta.transpose() * h_in;
    g.layers[l].bias = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd dh = delta * params.layers[l].weight;
      delta = dh.cwiseProduct(silu_grad(cache.pre[l - 1]));
    }
  }
  return g;
}

AdamState AdamState::for_params(const NetParams& params, double beta1, double beta2, double eps) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

void adam_step(NetParams& params, const Gradients& grads, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (grads.layers.size() != params.layers.size() || state.m.layers.size() != params.layers.size()) {
    throw InvalidArgument("adam_step: parameter, gradient and state layouts differ");
  }
  if (!grads.all_finite()) throw NumericError("non-finite gradient at optimizer step " + std::to_string(state.step + 1));

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double eps = state.eps;

  auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    theta.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weight, grads.layers[l].weight, state.m.layers[l].weight,
           state.v.layers[l].weight);
    update(params.layers[l].bias, grads.layers[l].bias, state.m.layers[l].bias, state.v.layers[l].bias);
  }
}

}  // namespace scflow::net
