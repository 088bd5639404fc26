#pragma once

#include <random>
#include <vector>

#include "latgen/model.hpp"

namespace testutil {

inline latgen::ModelConfig tiny(latgen::Family family, latgen::Structure structure = latgen::Structure::Auxiliary,
                                int num_latent = 3) {
  latgen::ModelConfig c;
  c.family = family;
  c.structure = structure;
  c.d_word = 3;
  c.d_hidden = 4;
  c.d_label = 3;
  c.d_latent = 2;
  c.num_latent = num_latent;
  c.num_labels = 3;
  c.vocab_size = 8;
  c.init_scale = 0.5;
  return c;
}

inline std::vector<latgen::ModelConfig> generative_configs(int num_latent = 3) {
  using latgen::Family;
  using latgen::Structure;
  std::vector<latgen::ModelConfig> out{tiny(Family::Generative)};
  for (Structure s : {Structure::Auxiliary, Structure::Joint, Structure::Middle, Structure::Hierarchical})
    out.push_back(tiny(Family::Latent, s, num_latent));
  return out;
}

/// Random documents with labels cycling 0..labels-1.
inline std::vector<latgen::EncodedDocument> random_docs(std::size_t n, int labels, int vocab, std::uint64_t seed,
                                                        int min_len = 1, int max_len = 5) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> tok(latgen::kReservedIds, vocab - 1), len(min_len, max_len);
  std::vector<latgen::EncodedDocument> docs;
  for (std::size_t i = 0; i < n; ++i) {
    latgen::EncodedDocument d;
    d.label = static_cast<int>(i % static_cast<std::size_t>(labels));
    d.ids.push_back(latgen::kBosId);
    const int L = len(rng);
    for (int t = 0; t < L; ++t) d.ids.push_back(tok(rng));
    d.ids.push_back(latgen::kEosId);
    docs.push_back(std::move(d));
  }
  return docs;
}

inline std::string name(const latgen::ModelConfig& c) {
  return c.is_latent() ? latgen::to_string(c.structure) : latgen::to_string(c.family);
}

}  // namespace testutil
