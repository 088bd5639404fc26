#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latgen/corpus.hpp"
#include "latgen/inference.hpp"
#include "latgen/model.hpp"
#include "latgen/optim.hpp"

namespace latgen {

enum class TrainMethod { Direct, EM };

std::string to_string(TrainMethod m);
TrainMethod parse_method(std::string_view s);

struct TrainSpec {
  TrainMethod method = TrainMethod::Direct;
  double lr = 1e-3;
  int batch_size = 32;
  int max_epochs = 150;
  int patience = 5;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;  // <= 0 disables clipping
  int em_inner_steps = 1;  // M-step Adam steps per mini-batch
  std::optional<PredictionRule> dev_rule;  // defaults to the family's default rule

  void validate() const;
};

struct EpochReport {
  int epoch = 0;                 // 1-based
  double train_objective = 0.0;  // mean nats per example over the epoch
  double dev_accuracy = 0.0;
  double wall_seconds = 0.0;

  bool operator==(const EpochReport& o) const {
    return epoch == o.epoch && train_objective == o.train_objective && dev_accuracy == o.dev_accuracy;
  }
};

struct TrainResult {
  std::vector<EpochReport> reports;  // finite epochs only
  int best_epoch = 0;                // 0 when no epoch ran
  double best_dev_accuracy = 0.0;
  bool diverged = false;
  std::string message;  // set on divergence
};

/// Called after every epoch; return false to stop early.
using EpochCallback = std::function<bool(const EpochReport&)>;

/// Per-example objective for one document on `tape`: negative log conditional
/// (Discriminative), negative log joint (Generative) or negative log marginal (Latent).
Var example_objective(ModelGraph& graph, const EncodedDocument& doc);

/// exp(l_c - log_sum_exp(l)).
RowVector posterior_from_log_joints(const RowVector& log_joints);

/// Posterior p(c|x,y) per document, computed with parameters frozen.
std::vector<RowVector> e_step(const Model& model, std::span<const EncodedDocument> batch);
/// Also returns the log marginals seen during the E-step.
std::vector<RowVector> e_step(const Model& model, std::span<const EncodedDocument> batch,
                              std::vector<double>* log_marginals);

/// Gradient of the mean negative expected complete-data log likelihood
/// -1/B sum_i sum_c q_ic log p(x_i, y_i, c), accumulated into params.grad
/// (gradients are zeroed first). Returns the objective.
double expected_complete_gradient(Model& model, std::span<const EncodedDocument> batch,
                                  std::span<const RowVector> posteriors);
/// Gradient of the mean per-example objective; zeroes gradients first. Returns the objective.
double direct_gradient(Model& model, std::span<const EncodedDocument> batch);

/// `inner_steps` Adam steps on the expected complete-data objective with the posteriors fixed.
void m_step(Model& model, std::span<const EncodedDocument> batch, std::span<const RowVector> posteriors,
            AdamState& optimizer, double clip_norm, int inner_steps = 1);

/// Trains in place with early stopping on dev accuracy; on return `model`
/// holds the parameters of the best dev epoch (earliest on ties). The label
/// prior is never modified.
TrainResult train(Model& model, std::span<const EncodedDocument> train_docs, std::span<const EncodedDocument> dev_docs,
                  const TrainSpec& spec, const EpochCallback& on_epoch = {});
TrainResult train_direct(Model& model, std::span<const EncodedDocument> train_docs,
                         std::span<const EncodedDocument> dev_docs, TrainSpec spec,
                         const EpochCallback& on_epoch = {});
TrainResult train_em(Model& model, std::span<const EncodedDocument> train_docs,
                     std::span<const EncodedDocument> dev_docs, TrainSpec spec, const EpochCallback& on_epoch = {});

}  // namespace latgen
