#include "latgen/generation.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace latgen {

void SampleSpec::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (max_len < 2) throw ConfigError("max_len must be >= 2");
}

RowVector temperature_probs(const RowVector& logits, double tau, const std::vector<bool>& masked) {
  if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
  const Index n = logits.size();
  auto is_masked = [&](Index i) { return !masked.empty() && masked[static_cast<std::size_t>(i)]; };
  RowVector p = RowVector::Zero(n);
  if (tau <= kGreedyTemperature) {
    Index best = -1;
    for (Index i = 0; i < n; ++i)
      if (!is_masked(i) && (best < 0 || logits(i) > logits(best))) best = i;
    if (best < 0) throw ContractError("temperature_probs: every entry is masked");
    p(best) = 1.0;
    return p;
  }
  RowVector scaled = logits / tau;
  for (Index i = 0; i < n; ++i)
    if (is_masked(i)) scaled(i) = -std::numeric_limits<double>::infinity();
  const double z = log_sum_exp(scaled);
  if (!std::isfinite(z)) throw ContractError("temperature_probs: every entry is masked");
  // Vectorized exp clamps very negative inputs, so masked entries are zeroed explicitly.
  for (Index i = 0; i < n; ++i) p(i) = is_masked(i) ? 0.0 : std::exp(scaled(i) - z);
  return p;
}

int draw(const RowVector& probs, std::mt19937_64& rng) {
  std::discrete_distribution<int> d(probs.data(), probs.data() + probs.size());
  return d(rng);
}

RowVector latent_given_label(const Model& model, int y) {
  const ModelConfig& cfg = model.config;
  if (!cfg.is_latent()) return RowVector::Ones(1);
  Tape tape(false);
  ModelGraph g(tape, model);
  RowVector log_prior = g.log_latent_factor(y).value();
  if (cfg.structure == Structure::Joint) log_prior += g.log_label_given_latent().value().col(y).transpose();
  return (log_prior.array() - log_sum_exp(log_prior)).exp().matrix();
}

namespace {

// Incremental LSTM decoder for one (y, c) condition.
class Decoder {
public:
  Decoder(const Model& model, int y, int c) : tape_(false), g_(tape_, model) {
    const ModelConfig& cfg = model.config;
    if (cfg.family == Family::Discriminative) throw ConfigError("cannot sample from a discriminative model");
    const ParamStore& ps = model.params;
    emb_ = tape_.param(ps.at("word_embedding"));
    w_ = {tape_.param(ps.at("lstm.input_weight")), tape_.param(ps.at("lstm.hidden_weight")),
          tape_.param(ps.at("lstm.bias"))};
    out_hidden_ = &ps.at("output.hidden").value;
    offset_ = ps.at("output.bias").value;
    if (cfg.lm_uses_label()) offset_ += g_.label_embedding(y).value() * ps.at("output.label").value;
    if (cfg.lm_uses_latent()) offset_ += g_.latent_embedding(c).value() * ps.at("output.latent").value;
    h_ = tape_.constant(Tensor::Zero(1, cfg.d_hidden));
    c_ = h_;
  }

  /// Consumes `token` and returns the next-token logits.
  RowVector step(int token) {
    const int id[] = {token};
    LstmStep s = lstm_cell(gather_rows(emb_, id), h_, c_, w_);
    h_ = s.h;
    c_ = s.c;
    return h_.value() * *out_hidden_ + offset_;
  }

private:
  Tape tape_;
  ModelGraph g_;
  Var emb_;
  LstmWeights w_;
  const Tensor* out_hidden_;
  RowVector offset_;
  Var h_, c_;
};

std::vector<bool> sampling_mask(int vocab_size) {
  std::vector<bool> mask(static_cast<std::size_t>(vocab_size), false);
  mask[kBosId] = true;
  mask[kUnkId] = true;
  return mask;
}

void check_condition(const ModelConfig& cfg, int y, std::optional<int> c) {
  if (y < 0 || y >= cfg.num_labels) throw ContractError("label " + std::to_string(y) + " out of range");
  if (c && (*c < 0 || *c >= cfg.components()))
    throw ContractError("latent value " + std::to_string(*c) + " out of range");
}

}  // namespace

RowVector first_step_probs(const Model& model, int y, int c, double tau) {
  check_condition(model.config, y, c);
  Decoder dec(model, y, c);
  return temperature_probs(dec.step(kBosId), tau, sampling_mask(model.config.vocab_size));
}

Sample sample(const Model& model, const Vocabulary& vocab, const SampleSpec& spec) {
  spec.validate();
  check_condition(model.config, spec.label, spec.latent);
  std::mt19937_64 rng(spec.seed);
  Sample out;
  out.latent = spec.latent ? *spec.latent : draw(latent_given_label(model, spec.label), rng);
  Decoder dec(model, spec.label, out.latent);
  const auto mask = sampling_mask(model.config.vocab_size);
  out.ids.push_back(kBosId);
  while (static_cast<int>(out.ids.size()) < spec.max_len) {
    const int next = draw(temperature_probs(dec.step(out.ids.back()), spec.temperature, mask), rng);
    out.ids.push_back(next);
    if (next == kEosId) break;
  }
  for (const std::string& t : decode(out.ids, vocab)) {
    if (!out.text.empty()) out.text += ' ';
    out.text += t;
  }
  return out;
}

std::vector<Sample> sample_many(const Model& model, const Vocabulary& vocab, const SampleSpec& spec, int n) {
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    SampleSpec one = spec;
    one.seed = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    out.push_back(sample(model, vocab, one));
  }
  return out;
}

}  // namespace latgen
