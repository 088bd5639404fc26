#include "latgen/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace latgen {

std::string to_string(TrainMethod m) { return m == TrainMethod::Direct ? "direct" : "em"; }

TrainMethod parse_method(std::string_view s) {
  if (s == "direct") return TrainMethod::Direct;
  if (s == "em" || s == "EM") return TrainMethod::EM;
  throw ConfigError("unknown training method '" + std::string(s) + "'");
}

void TrainSpec::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
  if (em_inner_steps < 1) throw ConfigError("em_inner_steps must be >= 1");
}

Var example_objective(ModelGraph& g, const EncodedDocument& doc) {
  switch (g.config().family) {
    case Family::Discriminative: {
      const int y[] = {doc.label};
      return scale(sum(pick(g.disc_log_probs(doc.ids), y)), -1.0);
    }
    case Family::Generative: return scale(g.log_joints(doc.ids, doc.label), -1.0);
    case Family::Latent: return scale(g.log_marginal(doc.ids, doc.label), -1.0);
  }
  throw ConfigError("unknown family");
}

RowVector posterior_from_log_joints(const RowVector& log_joints) {
  return (log_joints.array() - log_sum_exp(log_joints)).exp().matrix();
}

std::vector<RowVector> e_step(const Model& model, std::span<const EncodedDocument> batch,
                              std::vector<double>* log_marginals) {
  if (!model.config.is_latent()) throw ConfigError("e_step needs a latent model");
  std::vector<RowVector> post;
  post.reserve(batch.size());
  if (log_marginals) log_marginals->clear();
  for (const EncodedDocument& d : batch) {
    Tape tape(false);
    ModelGraph g(tape, model);
    const RowVector l = g.log_joints(d.ids, d.label).value();
    const double z = log_sum_exp(l);
    post.push_back((l.array() - z).exp().matrix());
    if (log_marginals) log_marginals->push_back(z);
  }
  return post;
}

std::vector<RowVector> e_step(const Model& model, std::span<const EncodedDocument> batch) {
  return e_step(model, batch, nullptr);
}

double expected_complete_gradient(Model& model, std::span<const EncodedDocument> batch,
                                  std::span<const RowVector> posteriors) {
  if (posteriors.size() != batch.size()) throw ContractError("one posterior per example required");
  model.params.zero_grad();
  const double w = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tape tape;
    ModelGraph g(tape, model);
    Var obj = scale(dot_const(g.log_joints(batch[i].ids, batch[i].label), posteriors[i]), -w);
    total += obj.scalar();
    tape.backward(obj);
  }
  return total;
}

double direct_gradient(Model& model, std::span<const EncodedDocument> batch) {
  model.params.zero_grad();
  const double w = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const EncodedDocument& d : batch) {
    Tape tape;
    ModelGraph g(tape, model);
    Var obj = scale(example_objective(g, d), w);
    total += obj.scalar();
    tape.backward(obj);
  }
  return total;
}

void m_step(Model& model, std::span<const EncodedDocument> batch, std::span<const RowVector> posteriors,
            AdamState& optimizer, double clip_norm, int inner_steps) {
  for (int k = 0; k < inner_steps; ++k) {
    const double obj = expected_complete_gradient(model, batch, posteriors);
    if (!std::isfinite(obj)) throw NonFiniteGradient("M-step objective is not finite");
    clip_grad_norm(model.params, clip_norm);
    adam_step(model.params, optimizer);
  }
}

namespace {

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

TrainResult train(Model& model, std::span<const EncodedDocument> train_docs, std::span<const EncodedDocument> dev_docs,
                  const TrainSpec& spec, const EpochCallback& on_epoch) {
  spec.validate();
  TrainResult result;
  if (spec.max_epochs == 0) return result;
  if (train_docs.empty()) throw ContractError("train: empty training set");
  if (dev_docs.empty()) throw ContractError("train: empty dev set");
  if (spec.method == TrainMethod::EM && !model.config.is_latent())
    throw ConfigError("EM training needs a latent model");
  const PredictionRule rule = spec.dev_rule.value_or(default_rule(model.config.family));
  check_rule(model.config.family, rule);

  AdamState adam(model.params, AdamConfig{.lr = spec.lr});
  ParamStore best = model.params;
  double best_acc = -1.0;
  int since_best = 0;
  const Tensor prior_before = model.label_prior();

  for (int epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto order = epoch_order(train_docs.size(), spec.seed, epoch);
    double objective_sum = 0.0;
    try {
      std::vector<EncodedDocument> batch;
      for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(spec.batch_size)) {
        batch.clear();
        for (std::size_t i = b; i < std::min(order.size(), b + static_cast<std::size_t>(spec.batch_size)); ++i)
          batch.push_back(train_docs[order[i]]);
        if (spec.method == TrainMethod::Direct) {
          const double obj = direct_gradient(model, batch);
          if (!std::isfinite(obj)) throw NonFiniteGradient("training objective is not finite");
          objective_sum += obj * static_cast<double>(batch.size());
          clip_grad_norm(model.params, spec.clip_norm);
          adam_step(model.params, adam);
        } else {
          std::vector<double> log_marginals;
          const auto post = e_step(model, batch, &log_marginals);
          for (double z : log_marginals) {
            if (!std::isfinite(z)) throw NonFiniteGradient("log marginal is not finite");
            objective_sum -= z;
          }
          m_step(model, batch, post, adam, spec.clip_norm, spec.em_inner_steps);
        }
      }
    } catch (const NonFiniteGradient& e) {
      result.diverged = true;
      result.message = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }

    EpochReport rep;
    rep.epoch = epoch;
    rep.train_objective = objective_sum / static_cast<double>(train_docs.size());
    rep.dev_accuracy = evaluate_accuracy(model, dev_docs, rule);
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.reports.push_back(rep);

    if (rep.dev_accuracy > best_acc) {
      best_acc = rep.dev_accuracy;
      best = model.params;
      result.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (on_epoch && !on_epoch(rep)) break;
    if (since_best >= spec.patience) break;
  }

  model.params = std::move(best);
  result.best_dev_accuracy = std::max(best_acc, 0.0);
  if (!(model.label_prior().array() == prior_before.array()).all())
    throw std::logic_error("label prior changed during training");
  return result;
}

TrainResult train_direct(Model& model, std::span<const EncodedDocument> train_docs,
                         std::span<const EncodedDocument> dev_docs, TrainSpec spec, const EpochCallback& on_epoch) {
  spec.method = TrainMethod::Direct;
  return train(model, train_docs, dev_docs, spec, on_epoch);
}

TrainResult train_em(Model& model, std::span<const EncodedDocument> train_docs,
                     std::span<const EncodedDocument> dev_docs, TrainSpec spec, const EpochCallback& on_epoch) {
  spec.method = TrainMethod::EM;
  return train(model, train_docs, dev_docs, spec, on_epoch);
}

}  // namespace latgen
