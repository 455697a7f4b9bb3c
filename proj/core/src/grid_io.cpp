#include <cmath>
#include <json.hpp>

#include "scflow/binio.hpp"
#include "scflow/error.hpp"
#include "scflow/synthgen.hpp"

namespace scflow::synth {
namespace {

constexpr std::string_view kGridMagic = "SCF1";
constexpr int kGridVersion = 1;
constexpr double kNormTolerance = 1e-4;

using nlohmann::json;

template <typename T>
T require(const json& manifest, const char* key) {
  if (!manifest.contains(key)) throw FormatError(key, "missing from manifest");
  try {
    return manifest.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(key, std::string("wrong type: ") + e.what());
  }
}

int require_positive(const json& manifest, const char* key) {
  const auto v = require<std::int64_t>(manifest, key);
  if (v < 1 || v > (1 << 24)) throw FormatError(key, "must be a positive count, got " + std::to_string(v));
  return static_cast<int>(v);
}

}  // namespace

void write_grid(const EmbeddingGrid& grid, const std::filesystem::path& path) {
  const json manifest = {
      {"version", kGridVersion},
      {"n_contents", grid.n_contents()},
      {"n_styles", grid.n_styles()},
      {"n_views", grid.n_views()},
      {"embed_dim", grid.embed_dim()},
      {"noise_sigma", grid.noise_sigma()},
      {"provenance", to_string(grid.provenance())},
      {"seed", grid.seed()},
  };
  binio::write_container(path, kGridMagic, manifest.dump(), grid.data());
}

EmbeddingGrid read_grid(const std::filesystem::path& path) {
  binio::Container c = binio::read_container(path, kGridMagic);
  json manifest;
  try {
    manifest = json::parse(c.manifest);
  } catch (const json::exception& e) {
    throw FormatError("manifest", std::string("invalid JSON: ") + e.what());
  }
  if (!manifest.is_object()) throw FormatError("manifest", "must be a JSON object");

  const auto version = require<int>(manifest, "version");
  if (version != kGridVersion) throw FormatError("version", "unsupported version " + std::to_string(version));
  const int nc = require_positive(manifest, "n_contents");
  const int ns = require_positive(manifest, "n_styles");
  const int nv = require_positive(manifest, "n_views");
  const int dim = require_positive(manifest, "embed_dim");
  const auto sigma = require<double>(manifest, "noise_sigma");
  if (!(sigma >= 0.0)) throw FormatError("noise_sigma", "must be >= 0");
  Provenance prov{};
  try {
    prov = provenance_from_string(require<std::string>(manifest, "provenance"));
  } catch (const InvalidArgument& e) {
    throw FormatError("provenance", e.what());
  }
  const auto seed = require<std::uint64_t>(manifest, "seed");

  const std::size_t expected = static_cast<std::size_t>(nc) * ns * nv * dim;
  if (c.payload.size() != expected) {
    throw FormatError("payload",
                      "manifest shape (n_contents=" + std::to_string(nc) + ", n_styles=" +
                          std::to_string(ns) + ", n_views=" + std::to_string(nv) +
                          ", embed_dim=" + std::to_string(dim) + ") requires " +
                          std::to_string(expected) + " float32 values, file holds " +
                          std::to_string(c.payload.size()));
  }
  for (int i = 0; i < nc; ++i) {
    for (int j = 0; j < ns; ++j) {
      for (int v = 0; v < nv; ++v) {
        const float* p = c.payload.data() + ((static_cast<std::size_t>(i) * ns + j) * nv + v) * dim;
        double sq = 0.0;
        for (int d = 0; d < dim; ++d) sq += static_cast<double>(p[d]) * p[d];
        const double norm = std::sqrt(sq);
        if (!std::isfinite(norm) || std::abs(norm - 1.0) > kNormTolerance) {
          throw FormatError("payload",
                            "embedding at cell (content=" + std::to_string(i) + ", style=" +
                                std::to_string(j) + ", view=" + std::to_string(v) +
                                ") has norm " + std::to_string(norm) + ", expected 1");
        }
      }
    }
  }
  return EmbeddingGrid(nc, ns, nv, dim, sigma, prov, seed, std::move(c.payload));
}

}  // namespace scflow::synth
