#include <cmath>

#include "scflow/error.hpp"
#include "scflow/flowcore.hpp"

namespace scflow::flow {

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batches_per_epoch < 1) throw InvalidArgument("batches_per_epoch must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (!(lr > 0.0)) throw InvalidArgument("lr must be > 0");
  if (eval_nfe < 1) throw InvalidArgument("eval_nfe must be >= 1");
  if (heldout_batches < 1) throw InvalidArgument("heldout_batches must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train_fraction must lie in (0, 1)");
  }
}

TrainState fresh_train_state(const net::NetArch& arch, const TrainConfig& cfg) {
  TrainState s;
  s.params = net::init_velocity_net(arch, cfg.seed);
  s.adam = net::AdamState::for_params(s.params);
  return s;
}

double heldout_loss(const net::NetParams& params, const synth::DatasetSplit& split, const TrainConfig& cfg) {
  double total = 0.0;
  for (int b = 0; b < cfg.heldout_batches; ++b) {
    Rng rng = derive_rng(cfg.seed, Stream::kHeldout, {static_cast<std::uint64_t>(b)});
    const synth::TripletBatch batch =
        synth::sample_triplet_batch(split, cfg.batch_size, rng, synth::Subset::kTest);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    Eigen::VectorXd t(batch.size());
    for (int r = 0; r < batch.size(); ++r) t(r) = uniform(rng);
    const Eigen::MatrixXd x_t = (1.0 - t.array()).matrix().asDiagonal() * batch.x0 + t.asDiagonal() * batch.x1;
    const Eigen::MatrixXd diff = net::net_velocity(params, x_t, t) - (batch.x1 - batch.x0);
    total += diff.squaredNorm() / static_cast<double>(diff.size());
  }
  return total / cfg.heldout_batches;
}

TrainState train(TrainState state, const synth::DatasetSplit& split, const TrainConfig& cfg,
                 const TrainHooks& hooks) {
  cfg.validate();
  const auto per_epoch = static_cast<std::uint64_t>(cfg.batches_per_epoch);
  if (state.rng_position % per_epoch != 0) {
    throw InvalidState("training can only resume on an epoch boundary (step " +
                       std::to_string(state.rng_position) + ")");
  }
  if (state.adam.step != state.rng_position) {
    throw InvalidState("optimizer step counter and batch stream position disagree");
  }
  std::string last_checkpoint = "none";

  for (auto epoch = static_cast<int>(state.rng_position / per_epoch); epoch < cfg.epochs; ++epoch) {
    double sum = 0.0;
    for (int b = 0; b < cfg.batches_per_epoch; ++b) {
      Rng rng = derive_rng(cfg.seed, Stream::kTrainStep, {state.rng_position});
      const synth::TripletBatch batch = synth::sample_triplet_batch(split, cfg.batch_size, rng);
      LossResult r;
      try {
        r = fm_loss(state.params, batch, rng);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at step " + std::to_string(state.rng_position) +
                           "; last good checkpoint: " + last_checkpoint);
      }
      net::adam_step(state.params, r.grads, state.adam, cfg.lr);
      // Parameters and moments live at float32 precision so checkpoints are exact.
      state.params.round_to_float();
      state.adam.m.round_to_float();
      state.adam.v.round_to_float();
      ++state.rng_position;
      sum += r.loss;
    }
    state.history.train.push_back(sum / cfg.batches_per_epoch);
    state.history.heldout.push_back(heldout_loss(state.params, split, cfg));
    if (hooks.on_epoch) {
      std::string saved = hooks.on_epoch(state, epoch);
      if (!saved.empty()) last_checkpoint = std::move(saved);
    }
  }
  return state;
}

}  // namespace scflow::flow
