#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "scflow/error.hpp"
#include "scflow/flowcore.hpp"

using namespace scflow;
using namespace scflow::flow;

namespace {

Eigen::MatrixXd random_rows(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd x(rows, cols);
  for (auto& v : x.reshaped()) v = n(rng);
  return x;
}

net::NetArch small_arch(int embed_dim) {
  net::NetArch a;
  a.embed_dim = embed_dim;
  a.hidden_widths = {32, 32};
  a.time_freqs = 4;
  return a;
}

net::NetParams perturbed(const net::NetArch& arch, std::uint64_t seed) {
  auto p = net::init_velocity_net(arch, seed);
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 0.2);
  for (auto& w : p.layers.back().weight.reshaped()) w = n(rng);
  return p;
}

std::shared_ptr<const synth::EmbeddingGrid> small_grid() {
  synth::GridSpec spec;
  spec.n_contents = 10;
  spec.n_styles = 4;
  spec.n_views = 3;
  spec.embed_dim = 8;
  spec.factor_dim = 4;
  spec.hidden_dim = 16;
  spec.seed = 5;
  static auto grid = std::make_shared<const synth::EmbeddingGrid>(synth::generate_grid(spec));
  return grid;
}

TrainConfig small_train_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batches_per_epoch = 5;
  cfg.batch_size = 16;
  cfg.heldout_batches = 2;
  cfg.seed = 3;
  return cfg;
}

double euler_error(const net::NetParams& field, const Eigen::MatrixXd& x, int nfe, Method m) {
  const Eigen::MatrixXd y = ode_solve(field, x, SolverConfig{Direction::kForward, nfe, m});
  return (y - x * std::exp(-1.0)).norm() / (x * std::exp(-1.0)).norm();
}

void check_same_params(const net::NetParams& a, const net::NetParams& b) {
  REQUIRE(a.layers.size() == b.layers.size());
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(a.layers[l].weight == b.layers[l].weight);
    CHECK(a.layers[l].bias == b.layers[l].bias);
  }
}

}  // namespace

TEST_CASE("interpolation endpoints and midpoint") {
  const Eigen::VectorXd x0{{1.0, 0.0, -0.3}};
  const Eigen::VectorXd x1{{0.0, 1.0, 0.7}};
  CHECK(interpolate(x0, x1, 0.0) == x0);
  CHECK(interpolate(x0, x1, 1.0) == x1);
  const Eigen::VectorXd a{{1.0, 0.0}}, b{{0.0, 1.0}};
  CHECK(interpolate(a, b, 0.5) == Eigen::VectorXd{{0.5, 0.5}});
  CHECK_THROWS_AS(interpolate(a, x1, 0.5), InvalidArgument);
  CHECK_THROWS_AS(interpolate(a, b, 1.5), InvalidArgument);
  CHECK(LinearSchedule::alpha(0.25) == 0.75);
  CHECK(LinearSchedule::sigma(0.25) == 0.25);
}

TEST_CASE("target velocity is x1 minus x0") {
  const Eigen::VectorXd a{{1.0, 0.0}}, b{{0.0, 1.0}};
  CHECK(target_velocity(a, b) == Eigen::VectorXd{{-1.0, 1.0}});
  CHECK(target_velocity(a, a).isZero(0.0));
  // derivative of the interpolant equals the target at any t
  const double h = 1e-6;
  for (double t : {0.2, 0.9}) {
    const Eigen::VectorXd d = (interpolate(a, b, t + h) - interpolate(a, b, t - h)) / (2 * h);
    CHECK(d.isApprox(target_velocity(a, b), 1e-9));
  }
  CHECK_THROWS_AS(target_velocity(a, Eigen::VectorXd::Zero(3)), InvalidArgument);
}

TEST_CASE("loss of a zero net is the mean squared displacement") {
  const auto arch = small_arch(3);
  const auto p = net::init_velocity_net(arch, 1);
  const auto x0 = random_rows(5, 6, 1);
  const auto x1 = random_rows(5, 6, 2);
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(5, 0.1, 0.9);
  const auto r = fm_loss_at(p, x0, x1, t);
  CHECK(r.loss == doctest::Approx((x1 - x0).squaredNorm() / 30.0).epsilon(1e-14));

  const auto same = fm_loss_at(p, x0, x0, t);
  CHECK(same.loss == 0.0);
  for (const auto& l : same.grads.layers) {
    CHECK(l.weight.isZero(0.0));
    CHECK(l.bias.isZero(0.0));
  }
}

TEST_CASE("sampled loss matches a recomputation from its stored tuples") {
  const auto arch = small_arch(8);
  const auto p = perturbed(arch, 4);
  const auto split = synth::split_grid(small_grid(), 0.7, 1);
  Rng rng = derive_rng(1, Stream::kTrainStep, {0});
  const auto batch = synth::sample_triplet_batch(split, 12, rng);
  const auto r = fm_loss(p, batch, rng);
  REQUIRE(r.t.size() == 12);
  CHECK((r.t.array() >= 0.0).all());
  CHECK((r.t.array() <= 1.0).all());
  CHECK(r.target == batch.x1 - batch.x0);
  for (int row = 0; row < 12; ++row) {
    CHECK(r.x_t.row(row).isApprox((1.0 - r.t(row)) * batch.x0.row(row) + r.t(row) * batch.x1.row(row), 1e-15));
  }
  CHECK(r.loss == doctest::Approx(oracle::fm_loss(p, batch.x0, batch.x1, r.t)).epsilon(1e-12));
}

TEST_CASE("a constant field is integrated exactly") {
  const Eigen::VectorXd k{{0.5, -1.0, 0.25, 2.0}};
  const auto field = oracle::constant_field_net(k);
  const auto x = random_rows(3, 4, 7);
  for (int nfe : {1, 3, 10}) {
    for (Method m : {Method::kEuler, Method::kMidpoint}) {
      const auto fwd = ode_solve(field, x, SolverConfig{Direction::kForward, nfe, m});
      CHECK((fwd - (x.rowwise() + k.transpose())).cwiseAbs().maxCoeff() < 1e-12);
      const auto rev = ode_solve(field, x, SolverConfig{Direction::kReverse, nfe, m});
      CHECK((rev - (x.rowwise() - k.transpose())).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("zero parameters give the identity flow") {
  const auto p = net::init_velocity_net(net::NetArch{}, 3);
  const auto x = random_rows(4, 128, 8);
  for (int nfe : {1, 7, 64}) {
    for (Direction d : {Direction::kForward, Direction::kReverse}) {
      for (Method m : {Method::kEuler, Method::kMidpoint}) {
        CHECK(ode_solve(p, x, SolverConfig{d, nfe, m}) == x);
      }
    }
  }
  const auto c = random_rows(3, 64, 9), s = random_rows(3, 64, 10);
  CHECK(merge_forward(p, c, s, SolverConfig{}) == 0.5 * (c + s));
  const auto z = random_rows(3, 64, 11);
  const auto d = disentangle_reverse(p, z, SolverConfig{Direction::kReverse, 4, Method::kEuler});
  CHECK(d.content == z);
  CHECK(d.style == z);
}

TEST_CASE("decay field v = -x against exp(-1)") {
  const auto field = oracle::linear_field_net(2, -1.0);
  const auto x = random_rows(3, 4, 12);
  CHECK(ode_solve(field, x, SolverConfig{Direction::kForward, 1, Method::kEuler}).cwiseAbs().maxCoeff() < 1e-12);

  double previous = INFINITY;
  for (int nfe = 4; nfe <= 512; nfe *= 2) {
    const double euler = euler_error(field, x, nfe, Method::kEuler);
    const double mid = euler_error(field, x, nfe, Method::kMidpoint);
    CHECK(euler < previous);
    CHECK(mid < euler);
    previous = euler;
  }
  CHECK(previous < 0.01);
}

TEST_CASE("solver accepts any field and reports the failing step") {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(1, 2);
  VelocityField blowup = [](const Eigen::MatrixXd& s, double t) -> Eigen::MatrixXd {
    return t > 0.3 ? Eigen::MatrixXd::Constant(s.rows(), s.cols(), INFINITY) : Eigen::MatrixXd(s);
  };
  try {
    ode_solve(blowup, x, SolverConfig{Direction::kForward, 4, Method::kEuler});
    FAIL("no error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step 2") != std::string::npos);
  }
  CHECK_THROWS_AS(ode_solve(blowup, x, SolverConfig{Direction::kForward, 0, Method::kEuler}), InvalidArgument);
}

TEST_CASE("one-step merge equals x0 plus v(x0, 0), halves averaged") {
  const auto arch = small_arch(4);
  const auto p = perturbed(arch, 13);
  const auto c = random_rows(2, 4, 14), s = random_rows(2, 4, 15);
  Eigen::MatrixXd x0(2, 8);
  x0 << c, s;
  const Eigen::MatrixXd y = x0 + net::net_velocity(p, x0, Eigen::VectorXd::Zero(2));
  const Eigen::MatrixXd expected = 0.5 * (y.leftCols(4) + y.rightCols(4));
  CHECK(merge_forward(p, c, s, SolverConfig{}).isApprox(expected, 1e-15));
  const Eigen::VectorXd single = merge_forward(p, Eigen::VectorXd(c.row(0).transpose()),
                                               Eigen::VectorXd(s.row(0).transpose()), SolverConfig{});
  CHECK(single.isApprox(expected.row(0).transpose(), 1e-15));
  const auto renorm = merge_forward(p, c, s, SolverConfig{}, true);
  CHECK(renorm.row(1).norm() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("merge and disentangle insist on their direction") {
  const auto p = net::init_velocity_net(small_arch(4), 1);
  const auto z = random_rows(1, 4, 1);
  CHECK_THROWS_AS(merge_forward(p, z, z, SolverConfig{Direction::kReverse, 1, Method::kEuler}), InvalidArgument);
  CHECK_THROWS_AS(disentangle_reverse(p, z, SolverConfig{}), InvalidArgument);
  CHECK_THROWS_AS(disentangle_reverse(p, random_rows(1, 5, 1), SolverConfig{Direction::kReverse, 1, Method::kEuler}),
                  InvalidArgument);
}

TEST_CASE("string forms of direction and method") {
  CHECK(direction_from_string("forward") == Direction::kForward);
  CHECK(direction_from_string("reverse") == Direction::kReverse);
  CHECK(method_from_string("midpoint") == Method::kMidpoint);
  CHECK(to_string(Method::kEuler) == "euler");
  CHECK_THROWS_AS(direction_from_string("sideways"), InvalidArgument);
}

TEST_CASE("one epoch of one batch is one optimizer step") {
  const auto split = synth::split_grid(small_grid(), 0.7, 1);
  auto cfg = small_train_config();
  cfg.epochs = 1;
  cfg.batches_per_epoch = 1;
  const auto arch = small_arch(8);
  const auto out = train(fresh_train_state(arch, cfg), split, cfg);
  CHECK(out.adam.step == 1);
  CHECK(out.rng_position == 1);
  CHECK(out.history.train.size() == 1);
  CHECK(out.history.heldout.size() == 1);
  CHECK(out.params.layers.back().weight.cwiseAbs().maxCoeff() > 0.0);
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("training is deterministic and resumes exactly") {
  const auto split = synth::split_grid(small_grid(), 0.7, 1);
  const auto cfg = small_train_config();
  const auto arch = small_arch(8);
  const auto a = train(fresh_train_state(arch, cfg), split, cfg);
  const auto b = train(fresh_train_state(arch, cfg), split, cfg);
  check_same_params(a.params, b.params);
  CHECK(a.history.train == b.history.train);
  CHECK(a.history.heldout == b.history.heldout);

  auto half = cfg;
  half.epochs = 1;
  std::vector<int> seen;
  TrainHooks hooks{[&](const TrainState&, int epoch) {
    seen.push_back(epoch);
    return std::string();
  }};
  const auto first = train(fresh_train_state(arch, cfg), split, half, hooks);
  CHECK(seen == std::vector<int>{0});
  const auto resumed = train(first, split, cfg);
  check_same_params(resumed.params, a.params);
  CHECK(resumed.history.train == a.history.train);
  CHECK(resumed.adam.step == a.adam.step);
}

TEST_CASE("training refuses a mid-epoch start") {
  const auto split = synth::split_grid(small_grid(), 0.7, 1);
  auto cfg = small_train_config();
  auto st = fresh_train_state(small_arch(8), cfg);
  st.rng_position = 2;
  st.adam.step = 2;
  CHECK_THROWS_AS(train(st, split, cfg), InvalidState);
}

TEST_CASE("divergent training stops with a numeric error") {
  const auto split = synth::split_grid(small_grid(), 0.7, 1);
  auto cfg = small_train_config();
  cfg.lr = 1e300;
  CHECK_THROWS_AS(train(fresh_train_state(small_arch(8), cfg), split, cfg), NumericError);
}

TEST_CASE("training lowers the loss") {
  const auto split = synth::split_grid(small_grid(), 0.7, 1);
  auto cfg = small_train_config();
  cfg.epochs = 6;
  cfg.batches_per_epoch = 20;
  cfg.batch_size = 32;
  const auto arch = small_arch(8);
  const double initial = heldout_loss(net::init_velocity_net(arch, cfg.seed), split, cfg);
  const auto out = train(fresh_train_state(arch, cfg), split, cfg);
  CHECK(out.history.train.back() < out.history.train.front());
  CHECK(out.history.heldout.back() < initial);
}
