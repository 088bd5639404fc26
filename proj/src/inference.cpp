#include "latgen/inference.hpp"

namespace latgen {

std::string to_string(PredictionRule r) {
  switch (r) {
    case PredictionRule::MarginalizePrior: return "marginalize_prior";
    case PredictionRule::MarginalizePosterior: return "marginalize_posterior";
    case PredictionRule::MaxLatent: return "max_latent";
    case PredictionRule::DiscriminativeArgmax: return "discriminative_argmax";
    case PredictionRule::GenerativeArgmax: return "generative_argmax";
  }
  return "?";
}

PredictionRule parse_rule(std::string_view s) {
  for (auto r : {PredictionRule::MarginalizePrior, PredictionRule::MarginalizePosterior, PredictionRule::MaxLatent,
                 PredictionRule::DiscriminativeArgmax, PredictionRule::GenerativeArgmax})
    if (s == to_string(r)) return r;
  if (s == "prior") return PredictionRule::MarginalizePrior;
  if (s == "posterior") return PredictionRule::MarginalizePosterior;
  if (s == "max") return PredictionRule::MaxLatent;
  throw ConfigError("unknown prediction rule '" + std::string(s) + "'");
}

PredictionRule default_rule(Family f) {
  return f == Family::Discriminative ? PredictionRule::DiscriminativeArgmax : PredictionRule::MarginalizePrior;
}

void check_rule(Family family, PredictionRule rule) {
  bool ok = false;
  switch (rule) {
    case PredictionRule::DiscriminativeArgmax: ok = family == Family::Discriminative; break;
    case PredictionRule::GenerativeArgmax: ok = family == Family::Generative; break;
    default: ok = family != Family::Discriminative; break;
  }
  if (!ok) throw ConfigError("rule " + to_string(rule) + " does not apply to a " + to_string(family) + " model");
}

std::vector<double> label_scores(const JointTable& table, PredictionRule rule) {
  const Index Y = table.log_joint.rows();
  std::vector<double> scores(static_cast<std::size_t>(Y));
  for (Index y = 0; y < Y; ++y) {
    const auto row = table.log_joint.row(y);
    double s = 0.0;
    switch (rule) {
      case PredictionRule::MarginalizePrior:
      case PredictionRule::GenerativeArgmax:
        s = log_sum_exp(row);
        break;
      case PredictionRule::MaxLatent:
        s = row.maxCoeff();
        break;
      case PredictionRule::MarginalizePosterior: {
        const RowVector log_post = row.array() - log_sum_exp(row);
        const RowVector reweighted = row - table.log_latent_factor.row(y) + log_post;
        s = log_sum_exp(reweighted);
        break;
      }
      case PredictionRule::DiscriminativeArgmax:
        throw ConfigError("discriminative rule needs a discriminative model");
    }
    scores[static_cast<std::size_t>(y)] = s;
  }
  return scores;
}

Prediction predict(const Model& model, std::span<const int> ids, PredictionRule rule) {
  check_rule(model.config.family, rule);
  Prediction p;
  if (rule == PredictionRule::DiscriminativeArgmax) {
    const Tensor lp = disc_forward(model, ids);
    p.scores.assign(lp.data(), lp.data() + lp.size());
  } else {
    p.scores = label_scores(joint_table(model, ids), rule);
  }
  p.label = static_cast<int>(argmax(Eigen::Map<const RowVector>(p.scores.data(), static_cast<Index>(p.scores.size()))));
  return p;
}

Prediction predict(const Model& model, std::span<const int> ids) {
  return predict(model, ids, default_rule(model.config.family));
}

double evaluate_accuracy(const Model& model, std::span<const EncodedDocument> docs, PredictionRule rule) {
  if (docs.empty()) throw ContractError("evaluate_accuracy: empty split");
  check_rule(model.config.family, rule);
  std::size_t correct = 0;
  for (const EncodedDocument& d : docs)
    if (predict(model, d.ids, rule).label == d.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(docs.size());
}

}  // namespace latgen
