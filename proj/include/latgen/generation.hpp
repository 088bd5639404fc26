#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "latgen/corpus.hpp"
#include "latgen/model.hpp"

namespace latgen {

struct SampleSpec {
  int label = 0;
  std::optional<int> latent;  // nullopt: draw c from p(c|y) under the model
  double temperature = 0.6;
  int max_len = 82;  // ids including BOS (and EOS when emitted)
  std::uint64_t seed = 0;

  void validate() const;
};

struct Sample {
  std::vector<int> ids;  // starts with BOS
  std::string text;      // content tokens joined by spaces
  int latent = 0;        // value used (0 for the standard generative model)
};

/// Temperatures at or below this switch to greedy decoding.
inline constexpr double kGreedyTemperature = 1e-6;

/// p_i proportional to exp(logit_i / tau) over the unmasked entries; masked
/// entries get probability zero. tau <= kGreedyTemperature gives a one-hot
/// vector on the first maximal unmasked logit.
RowVector temperature_probs(const RowVector& logits, double tau, const std::vector<bool>& masked = {});

/// Draws an index from a probability vector.
int draw(const RowVector& probs, std::mt19937_64& rng);

/// Distribution of the first token after BOS for label y and latent c.
RowVector first_step_probs(const Model& model, int y, int c, double tau);

/// p(c|y) under the model's prior terms. [1 x |C|]
RowVector latent_given_label(const Model& model, int y);

/// Ancestral sampling with BOS and UNK never emitted.
Sample sample(const Model& model, const Vocabulary& vocab, const SampleSpec& spec);
/// Draws `n` samples; sample i uses its own stream seeded from (spec.seed, i).
std::vector<Sample> sample_many(const Model& model, const Vocabulary& vocab, const SampleSpec& spec, int n);

}  // namespace latgen
