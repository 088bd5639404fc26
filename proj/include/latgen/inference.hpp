#pragma once

#include <span>
#include <string>
#include <vector>

#include "latgen/corpus.hpp"
#include "latgen/model.hpp"

namespace latgen {

enum class PredictionRule { MarginalizePrior, MarginalizePosterior, MaxLatent, DiscriminativeArgmax, GenerativeArgmax };

std::string to_string(PredictionRule r);
PredictionRule parse_rule(std::string_view s);

/// MarginalizePrior for generative families, DiscriminativeArgmax otherwise.
PredictionRule default_rule(Family f);
/// Throws ConfigError unless `rule` can be applied to `family`. The three
/// latent rules also accept the standard generative model (one latent value).
void check_rule(Family family, PredictionRule rule);

struct Prediction {
  int label = 0;
  std::vector<double> scores;  // per label, log space
};

/// Per-label scores from a table of log joints:
///   MarginalizePrior      log sum_c p(x, y, c)
///   MarginalizePosterior  log sum_c p(x|c,y) p(c|x,y) p(y), the prior factor
///                         that generated c replaced by the posterior
///   MaxLatent             max_c log p(x, y, c)
std::vector<double> label_scores(const JointTable& table, PredictionRule rule);

Prediction predict(const Model& model, std::span<const int> ids, PredictionRule rule);
/// Uses default_rule(model family).
Prediction predict(const Model& model, std::span<const int> ids);

/// Fraction of documents whose predicted label equals the gold label.
double evaluate_accuracy(const Model& model, std::span<const EncodedDocument> docs, PredictionRule rule);

}  // namespace latgen
