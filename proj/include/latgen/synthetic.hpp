#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "latgen/corpus.hpp"
#include "latgen/tensor.hpp"

namespace latgen {

/// A known auxiliary-structure process: y uniform, c from a fixed prior (or
/// from p(c|y) when latent_depends_on_label), and each word drawn from
///   softmax_w( label_scale * a_y(w) + latent_scale * b_c(w) + bigram_scale * M[prev, w] )
/// with a stop event of probability stop_prob at every step after the first,
/// and a hard stop after max_len words.
struct SyntheticSpec {
  int num_labels = 4;
  int num_latent = 3;
  int vocab_size = 200;  // word types, reserved ids excluded
  int n_train = 2000;
  int n_test = 1000;
  std::uint64_t seed = 0;
  double label_scale = 1.0;
  double latent_scale = 2.0;
  double bigram_scale = 0.5;
  double stop_prob = 0.08;
  int max_len = 40;
  bool label_to_text = true;             // the y -> x edge
  bool latent_depends_on_label = false;  // the y -> c edge
  int bayes_samples = 20000;             // Monte Carlo draws when enumeration is too large

  void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticSpec& s);
void from_json(const nlohmann::json& j, SyntheticSpec& s);

/// Parses "key=value,key=value" (keys as in SyntheticSpec, plus short aliases
/// labels, latents, vocab, train, test).
SyntheticSpec parse_synthetic_spec(std::string_view text);

struct SyntheticProcess {
  SyntheticSpec spec;
  Tensor label_weights;   // [Y x V] a_y(w) before scaling
  Tensor latent_weights;  // [C x V] b_c(w) before scaling
  Tensor bigram;          // [(V+1) x V], row V is the start-of-document context
  Tensor latent_prior;    // [Y x C] p(c|y); rows identical unless latent_depends_on_label

  /// Log probabilities of the next event: entries 0..V-1 are words, entry V is stop.
  RowVector next_log_probs(int y, int c, int prev, int position) const;
  /// log p(words | y, c), including the stop event (or the forced stop at max_len).
  double log_prob(std::span<const int> words, int y, int c) const;
  /// log p(words, y) summed over c.
  double log_joint_label(std::span<const int> words, int y) const;

  static std::string word(int w) { return "w" + std::to_string(w); }
};

SyntheticProcess make_process(const SyntheticSpec& spec);

struct SyntheticDocument {
  int label = 0;
  int latent = 0;
  std::vector<int> words;
};

SyntheticDocument sample_document(const SyntheticProcess& p, std::mt19937_64& rng);
LabeledText to_labeled_text(const SyntheticDocument& d);

/// Sum over every possible document of max_y p(x, y). Throws when the number
/// of documents exceeds max_documents.
double bayes_accuracy_exact(const SyntheticProcess& p, double max_documents = 2e6);
/// E[max_y p(y|x)] over `samples` documents drawn from the process.
double bayes_accuracy_monte_carlo(const SyntheticProcess& p, int samples, std::uint64_t seed);

struct SyntheticDataset {
  SyntheticProcess process;
  std::vector<LabeledText> train;
  std::vector<LabeledText> test;
  double bayes_accuracy = 0.0;
  std::string bayes_method;  // "exact" or "monte_carlo"

  nlohmann::json sidecar() const;
};

/// Builds the process, samples train and test documents and computes the
/// Bayes-optimal accuracy (exact when enumerable).
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// Writes train.csv, test.csv and synthetic.json into `dir`.
void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir);

/// Total number of documents the process can emit.
double synthetic_document_count(const SyntheticSpec& spec);

}  // namespace latgen
