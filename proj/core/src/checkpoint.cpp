#include "scflow/checkpoint.hpp"

#include <json.hpp>

#include "scflow/binio.hpp"
#include "scflow/error.hpp"

namespace scflow {
namespace {

constexpr std::string_view kCheckpointMagic = "SCK1";
constexpr int kCheckpointVersion = 1;

using nlohmann::json;

void append(std::vector<float>& out, const net::NetParams& p) {
  for (const auto& layer : p.layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        out.push_back(static_cast<float>(layer.weight(r, c)));
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) out.push_back(static_cast<float>(layer.bias(r)));
  }
}

net::NetParams take(const net::NetArch& arch, const std::vector<float>& in, std::size_t& pos) {
  net::NetParams p{arch, {}};
  for (int l = 0; l < arch.n_layers(); ++l) {
    const auto [fan_in, fan_out] = arch.layer_shape(l);
    net::Layer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd(fan_out)};
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = in[pos++];
    }
    for (int r = 0; r < fan_out; ++r) layer.bias(r) = in[pos++];
    p.layers.push_back(std::move(layer));
  }
  return p;
}

template <typename T>
T field(const json& j, const std::string& parent, const char* key) {
  const std::string name = parent.empty() ? key : parent + "." + key;
  if (!j.is_object() || !j.contains(key)) throw FormatError(name, "missing from manifest");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(name, std::string("wrong type: ") + e.what());
  }
}

}  // namespace

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto& s = ckpt.state;
  const auto& arch = s.params.arch;
  const auto& tc = ckpt.train_config;
  const json manifest = {
      {"version", kCheckpointVersion},
      {"arch",
       {{"embed_dim", arch.embed_dim},
        {"hidden_widths", arch.hidden_widths},
        {"time_freqs", arch.time_freqs},
        {"activation", "silu"}}},
      {"optimizer",
       {{"name", "adam"}, {"lr", tc.lr}, {"beta1", s.adam.beta1}, {"beta2", s.adam.beta2}, {"eps", s.adam.eps}}},
      {"step", s.adam.step},
      {"rng_position", s.rng_position},
      {"train_config",
       {{"epochs", tc.epochs},
        {"batches_per_epoch", tc.batches_per_epoch},
        {"batch_size", tc.batch_size},
        {"lr", tc.lr},
        {"seed", tc.seed},
        {"eval_nfe", tc.eval_nfe},
        {"heldout_batches", tc.heldout_batches},
        {"train_fraction", tc.train_fraction}}},
      {"history", {{"train", s.history.train}, {"heldout", s.history.heldout}}},
  };
  std::vector<float> payload;
  payload.reserve(3 * s.params.parameter_count());
  append(payload, s.params);
  append(payload, s.adam.m);
  append(payload, s.adam.v);
  binio::write_container(path, kCheckpointMagic, manifest.dump(), payload);
}

Checkpoint read_checkpoint(const std::filesystem::path& path, const std::optional<net::NetArch>& expected_arch) {
  const binio::Container c = binio::read_container(path, kCheckpointMagic);
  json m;
  try {
    m = json::parse(c.manifest);
  } catch (const json::exception& e) {
    throw FormatError("manifest", std::string("invalid JSON: ") + e.what());
  }
  if (!m.is_object()) throw FormatError("manifest", "must be a JSON object");
  if (field<int>(m, "", "version") != kCheckpointVersion) throw FormatError("version", "unsupported version");

  const json arch_j = m.contains("arch") ? m.at("arch") : json();
  net::NetArch arch;
  arch.embed_dim = field<int>(arch_j, "arch", "embed_dim");
  arch.hidden_widths = field<std::vector<int>>(arch_j, "arch", "hidden_widths");
  arch.time_freqs = field<int>(arch_j, "arch", "time_freqs");
  if (field<std::string>(arch_j, "arch", "activation") != "silu") {
    throw FormatError("arch.activation", "only 'silu' is supported");
  }
  try {
    arch.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError("arch", e.what());
  }
  if (expected_arch) {
    if (arch.embed_dim != expected_arch->embed_dim) throw FormatError("arch.embed_dim", "does not match the expected architecture");
    if (arch.hidden_widths != expected_arch->hidden_widths) throw FormatError("arch.hidden_widths", "does not match the expected architecture");
    if (arch.time_freqs != expected_arch->time_freqs) throw FormatError("arch.time_freqs", "does not match the expected architecture");
  }

  const std::size_t n_params = arch.parameter_count();
  if (c.payload.size() != 3 * n_params) {
    std::string widths;
    for (int w : arch.hidden_widths) widths += (widths.empty() ? "" : ",") + std::to_string(w);
    throw FormatError("payload", "arch (embed_dim=" + std::to_string(arch.embed_dim) + ", hidden_widths=[" +
                                     widths + "], time_freqs=" + std::to_string(arch.time_freqs) +
                                     ") requires " + std::to_string(3 * n_params) +
                                     " float32 values, file holds " + std::to_string(c.payload.size()));
  }

  Checkpoint ck;
  const json opt = m.contains("optimizer") ? m.at("optimizer") : json();
  const json tc = m.contains("train_config") ? m.at("train_config") : json();
  ck.train_config.epochs = field<int>(tc, "train_config", "epochs");
  ck.train_config.batches_per_epoch = field<int>(tc, "train_config", "batches_per_epoch");
  ck.train_config.batch_size = field<int>(tc, "train_config", "batch_size");
  ck.train_config.lr = field<double>(tc, "train_config", "lr");
  ck.train_config.seed = field<std::uint64_t>(tc, "train_config", "seed");
  ck.train_config.eval_nfe = field<int>(tc, "train_config", "eval_nfe");
  ck.train_config.heldout_batches = field<int>(tc, "train_config", "heldout_batches");
  ck.train_config.train_fraction = field<double>(tc, "train_config", "train_fraction");
  try {
    ck.train_config.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError("train_config", e.what());
  }

  std::size_t pos = 0;
  ck.state.params = take(arch, c.payload, pos);
  ck.state.adam.m = take(arch, c.payload, pos);
  ck.state.adam.v = take(arch, c.payload, pos);
  ck.state.adam.beta1 = field<double>(opt, "optimizer", "beta1");
  ck.state.adam.beta2 = field<double>(opt, "optimizer", "beta2");
  ck.state.adam.eps = field<double>(opt, "optimizer", "eps");
  ck.state.adam.step = field<std::uint64_t>(m, "", "step");
  ck.state.rng_position = field<std::uint64_t>(m, "", "rng_position");
  const json hist = m.contains("history") ? m.at("history") : json();
  ck.state.history.train = field<std::vector<double>>(hist, "history", "train");
  ck.state.history.heldout = field<std::vector<double>>(hist, "history", "heldout");
  if (ck.state.history.train.size() != ck.state.history.heldout.size()) {
    throw FormatError("history", "train and heldout curves differ in length");
  }
  if (!ck.state.params.all_finite()) throw FormatError("payload", "non-finite parameter values");
  return ck;
}

}  // namespace scflow
