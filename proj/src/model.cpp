#include "latgen/model.hpp"

#include <cmath>
#include <random>

namespace latgen {

std::string to_string(Family f) {
  switch (f) {
    case Family::Discriminative: return "discriminative";
    case Family::Generative: return "generative";
    case Family::Latent: return "latent";
  }
  return "?";
}

std::string to_string(Structure s) {
  switch (s) {
    case Structure::Auxiliary: return "auxiliary";
    case Structure::Joint: return "joint";
    case Structure::Middle: return "middle";
    case Structure::Hierarchical: return "hierarchical";
  }
  return "?";
}

Family parse_family(std::string_view s) {
  if (s == "discriminative" || s == "disc") return Family::Discriminative;
  if (s == "generative" || s == "gen") return Family::Generative;
  if (s == "latent" || s == "lat") return Family::Latent;
  throw ConfigError("unknown model family '" + std::string(s) + "'");
}

Structure parse_structure(std::string_view s) {
  if (s == "auxiliary" || s == "aux") return Structure::Auxiliary;
  if (s == "joint") return Structure::Joint;
  if (s == "middle") return Structure::Middle;
  if (s == "hierarchical" || s == "hier") return Structure::Hierarchical;
  throw ConfigError("unknown latent structure '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1, got " + std::to_string(v));
  };
  positive(d_word, "d_word");
  positive(d_hidden, "d_hidden");
  positive(num_labels, "num_labels");
  if (vocab_size <= kReservedIds)
    throw ConfigError("vocab_size must exceed the " + std::to_string(kReservedIds) + " reserved ids");
  if (family != Family::Discriminative && has_label_embedding()) positive(d_label, "d_label");
  if (is_latent()) {
    positive(num_latent, "num_latent");
    positive(d_latent, "d_latent");
  }
  if (!(init_scale >= 0.0)) throw ConfigError("init_scale must be non-negative");
}

bool ModelConfig::lm_uses_label() const {
  if (family == Family::Generative) return true;
  if (family == Family::Latent) return structure == Structure::Auxiliary || structure == Structure::Hierarchical;
  return false;
}

bool ModelConfig::has_label_embedding() const {
  if (family == Family::Generative) return true;
  if (family == Family::Latent) return structure != Structure::Joint;
  return false;
}

bool ModelConfig::has_latent_prior() const {
  return is_latent() && (structure == Structure::Auxiliary || structure == Structure::Joint);
}

bool ModelConfig::has_latent_given_label() const {
  return is_latent() && (structure == Structure::Middle || structure == Structure::Hierarchical);
}

bool ModelConfig::has_label_given_latent() const { return is_latent() && structure == Structure::Joint; }

bool ModelConfig::uses_label_prior() const {
  if (family == Family::Discriminative) return false;
  return !(is_latent() && structure == Structure::Joint);
}

int ModelConfig::softmax_input_dim() const {
  if (family == Family::Discriminative) return 0;
  return d_hidden + (lm_uses_label() ? d_label : 0) + (lm_uses_latent() ? d_latent : 0);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"family", to_string(c.family)},   {"structure", to_string(c.structure)},
                     {"d_word", c.d_word},              {"d_hidden", c.d_hidden},
                     {"d_label", c.d_label},            {"d_latent", c.d_latent},
                     {"num_latent", c.num_latent},      {"num_labels", c.num_labels},
                     {"vocab_size", c.vocab_size},      {"init_scale", c.init_scale},
                     {"forget_bias", c.forget_bias}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.family = parse_family(j.value("family", to_string(d.family)));
  c.structure = parse_structure(j.value("structure", to_string(d.structure)));
  c.d_word = j.value("d_word", d.d_word);
  c.d_hidden = j.value("d_hidden", d.d_hidden);
  c.d_label = j.value("d_label", d.d_label);
  c.d_latent = j.value("d_latent", d.d_latent);
  c.num_latent = j.value("num_latent", d.num_latent);
  c.num_labels = j.value("num_labels", d.num_labels);
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.init_scale = j.value("init_scale", d.init_scale);
  c.forget_bias = j.value("forget_bias", d.forget_bias);
}

std::int64_t count_params(const ModelConfig& cfg) {
  cfg.validate();
  const std::int64_t V = cfg.vocab_size, dw = cfg.d_word, h = cfg.d_hidden;
  const std::int64_t Y = cfg.num_labels, d1 = cfg.d_label, d2 = cfg.d_latent, C = cfg.num_latent;
  std::int64_t n = V * dw + dw * 4 * h + h * 4 * h + 4 * h;
  if (cfg.family == Family::Discriminative) return n + h * Y + Y;
  n += static_cast<std::int64_t>(cfg.softmax_input_dim()) * V + V;
  if (cfg.has_label_embedding()) n += Y * d1;
  if (cfg.is_latent()) n += C * d2;
  if (cfg.has_latent_prior()) n += C * d2 + C;
  if (cfg.has_latent_given_label()) n += d1 * C + C;
  if (cfg.has_label_given_latent()) n += d2 * Y + Y;
  return n;
}

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-cfg.init_scale, cfg.init_scale);
  auto uniform = [&](Index r, Index c) {
    Tensor t(r, c);
    for (Index i = 0; i < t.size(); ++i) t.data()[i] = cfg.init_scale > 0 ? u(rng) : 0.0;
    return t;
  };
  const Index V = cfg.vocab_size, h = cfg.d_hidden;
  ParamStore ps;
  ps.add("word_embedding", uniform(V, cfg.d_word));
  ps.add("lstm.input_weight", uniform(cfg.d_word, 4 * h));
  ps.add("lstm.hidden_weight", uniform(h, 4 * h));
  Tensor bias = uniform(1, 4 * h);
  bias.middleCols(h, h).setConstant(cfg.forget_bias);
  ps.add("lstm.bias", std::move(bias));
  if (cfg.family == Family::Discriminative) {
    ps.add("classifier.weight", uniform(h, cfg.num_labels));
    ps.add("classifier.bias", uniform(1, cfg.num_labels));
  } else {
    ps.add("output.hidden", uniform(h, V));
    if (cfg.lm_uses_label()) ps.add("output.label", uniform(cfg.d_label, V));
    if (cfg.lm_uses_latent()) ps.add("output.latent", uniform(cfg.d_latent, V));
    ps.add("output.bias", uniform(1, V));
    if (cfg.has_label_embedding()) ps.add("label_embedding", uniform(cfg.num_labels, cfg.d_label));
    if (cfg.is_latent()) ps.add("latent_embedding", uniform(cfg.num_latent, cfg.d_latent));
    if (cfg.has_latent_prior()) {
      ps.add("latent_prior.weight", uniform(cfg.num_latent, cfg.d_latent));
      ps.add("latent_prior.bias", uniform(1, cfg.num_latent));
    }
    if (cfg.has_latent_given_label()) {
      ps.add("latent_given_label.weight", uniform(cfg.d_label, cfg.num_latent));
      ps.add("latent_given_label.bias", uniform(1, cfg.num_latent));
    }
    if (cfg.has_label_given_latent()) {
      ps.add("label_given_latent.weight", uniform(cfg.d_latent, cfg.num_labels));
      ps.add("label_given_latent.bias", uniform(1, cfg.num_labels));
    }
  }
  ps.add("label_prior", Tensor::Constant(1, cfg.num_labels, 1.0 / cfg.num_labels), false);
  return ps;
}

Tensor estimate_label_prior(std::span<const int> counts, bool add_one_smoothing) {
  Tensor p(1, static_cast<Index>(counts.size()));
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    p(0, static_cast<Index>(i)) = counts[i] + (add_one_smoothing ? 1.0 : 0.0);
    total += p(0, static_cast<Index>(i));
  }
  if (total <= 0.0) throw DataError("estimate_label_prior: no labels counted");
  return p / total;
}

void Model::set_label_prior(const Tensor& prior) {
  Parameter& p = params.at("label_prior");
  require_shape(prior.rows() == p.value.rows() && prior.cols() == p.value.cols(), "set_label_prior",
                p.value.rows(), p.value.cols(), prior.rows(), prior.cols());
  p.value = prior;
}

// ---------------------------------------------------------------------------

ModelGraph::ModelGraph(Tape& tape, Model& model) : tape_(&tape), config_(model.config) { bind(model.params); }

ModelGraph::ModelGraph(Tape& tape, const Model& model) : tape_(&tape), config_(model.config) {
  bind(model.params);
}

template <typename Store>
void ModelGraph::bind(Store& ps) {
  auto opt = [&](const char* name) { return ps.find(name) ? tape_->param(ps.at(name)) : Var{}; };
  embedding_ = tape_->param(ps.at("word_embedding"));
  lstm_ = {tape_->param(ps.at("lstm.input_weight")), tape_->param(ps.at("lstm.hidden_weight")),
           tape_->param(ps.at("lstm.bias"))};
  cls_weight_ = opt("classifier.weight");
  cls_bias_ = opt("classifier.bias");
  out_hidden_ = opt("output.hidden");
  out_bias_ = opt("output.bias");
  out_label_ = opt("output.label");
  out_latent_ = opt("output.latent");
  label_table_ = opt("label_embedding");
  latent_table_ = opt("latent_embedding");
  prior_weight_ = opt("latent_prior.weight");
  prior_bias_ = opt("latent_prior.bias");
  cy_weight_ = opt("latent_given_label.weight");
  cy_bias_ = opt("latent_given_label.bias");
  yc_weight_ = opt("label_given_latent.weight");
  yc_bias_ = opt("label_given_latent.bias");
  label_prior_ = ps.at("label_prior").value;
}

namespace {

void require_doc(std::span<const int> ids, const char* op) {
  if (ids.size() < 2) throw ContractError(std::string(op) + ": document needs at least BOS and one predicted token");
  if (ids[0] != kBosId) throw ContractError(std::string(op) + ": document must start with BOS");
}

}  // namespace

Var ModelGraph::disc_log_probs(std::span<const int> ids) {
  if (config_.family != Family::Discriminative) throw ConfigError("disc_log_probs: model is not discriminative");
  if (ids.empty()) throw ContractError("disc_log_probs: empty document");
  Var states = lstm_sequence(gather_rows(embedding_, ids), lstm_);
  return log_softmax_rows(affine(mean_rows(states), cls_weight_, cls_bias_));
}

Var ModelGraph::lm_base_logits(std::span<const int> ids) {
  if (config_.family == Family::Discriminative) throw ConfigError("lm_base_logits: model has no language model");
  require_doc(ids, "conditional_lm_log_prob");
  Var states = lstm_sequence(gather_rows(embedding_, ids.first(ids.size() - 1)), lstm_);
  return affine(states, out_hidden_, out_bias_);
}

Var ModelGraph::conditional_lm_log_prob(Var base, std::span<const int> ids, std::span<const Condition> conditions) {
  Var logits = base;
  if (!conditions.empty()) {
    Var offset = matmul(conditions[0].embedding, conditions[0].output_weight);
    for (std::size_t i = 1; i < conditions.size(); ++i)
      offset = add(offset, matmul(conditions[i].embedding, conditions[i].output_weight));
    logits = add_row(base, offset);
  }
  return sum(pick(log_softmax_rows(logits), ids.subspan(1)));
}

Var ModelGraph::conditional_lm_log_prob(std::span<const int> ids, std::span<const Condition> conditions) {
  return conditional_lm_log_prob(lm_base_logits(ids), ids, conditions);
}

Var ModelGraph::label_embedding(int y) {
  if (y < 0 || y >= config_.num_labels) throw ContractError("label " + std::to_string(y) + " out of range");
  const int id[] = {y};
  return gather_rows(label_table_, id);
}

Var ModelGraph::latent_embedding(int c) {
  if (c < 0 || c >= config_.num_latent) throw ContractError("latent value " + std::to_string(c) + " out of range");
  const int id[] = {c};
  return gather_rows(latent_table_, id);
}

Var ModelGraph::log_latent_prior() {
  if (!config_.has_latent_prior()) throw ConfigError("structure has no latent prior p(c)");
  if (!cached_latent_prior_)
    cached_latent_prior_ = log_softmax_rows(add(row_dot(latent_table_, prior_weight_), prior_bias_));
  return *cached_latent_prior_;
}

Var ModelGraph::log_latent_given_label(int y) {
  if (!config_.has_latent_given_label()) throw ConfigError("structure has no p(c|y) head");
  return log_softmax_rows(affine(label_embedding(y), cy_weight_, cy_bias_));
}

Var ModelGraph::log_label_given_latent() {
  if (!config_.has_label_given_latent()) throw ConfigError("structure has no p(y|c) head");
  if (!cached_label_given_latent_)
    cached_label_given_latent_ = log_softmax_rows(affine(latent_table_, yc_weight_, yc_bias_));
  return *cached_label_given_latent_;
}

Var ModelGraph::log_label_prior(int y) {
  if (y < 0 || y >= config_.num_labels) throw ContractError("label " + std::to_string(y) + " out of range");
  return tape_->constant(Tensor::Constant(1, 1, std::log(label_prior_(0, y))));
}

Var ModelGraph::log_latent_factor(int y) {
  if (!config_.is_latent()) return tape_->constant(Tensor::Zero(1, 1));
  return config_.has_latent_prior() ? log_latent_prior() : log_latent_given_label(y);
}

Var ModelGraph::log_joints(std::span<const int> ids, int y) { return log_joints(lm_base_logits(ids), ids, y); }

Var ModelGraph::log_joints(Var base, std::span<const int> ids, int y) {
  if (config_.family == Family::Discriminative) throw ConfigError("log_joints: discriminative model has no joint");
  if (y < 0 || y >= config_.num_labels) throw ContractError("label " + std::to_string(y) + " out of range");
  if (!config_.is_latent()) {
    const Condition cond[] = {{label_embedding(y), out_label_}};
    return add(conditional_lm_log_prob(base, ids, cond), log_label_prior(y));
  }

  std::vector<Var> per_latent;
  per_latent.reserve(static_cast<std::size_t>(config_.num_latent));
  for (int c = 0; c < config_.num_latent; ++c) {
    std::vector<Condition> conds;
    if (config_.lm_uses_label()) conds.push_back({label_embedding(y), out_label_});
    conds.push_back({latent_embedding(c), out_latent_});
    per_latent.push_back(conditional_lm_log_prob(base, ids, conds));
  }
  Var lm = concat_cols(per_latent);
  const Index C = config_.num_latent;
  switch (config_.structure) {
    case Structure::Auxiliary:
      return add(add(lm, log_latent_prior()),
                 tape_->constant(Tensor::Constant(1, C, std::log(label_prior_(0, y)))));
    case Structure::Joint:
      return add(lm, add(log_latent_prior(), transpose(slice_cols(log_label_given_latent(), y, 1))));
    case Structure::Middle:
    case Structure::Hierarchical:
      return add(add(lm, log_latent_given_label(y)),
                 tape_->constant(Tensor::Constant(1, C, std::log(label_prior_(0, y)))));
  }
  throw ConfigError("unknown structure");
}

Var ModelGraph::log_marginal(std::span<const int> ids, int y) { return latgen::log_sum_exp(log_joints(ids, y)); }

// ---------------------------------------------------------------------------

JointTable joint_table(const Model& model, std::span<const int> ids) {
  const ModelConfig& cfg = model.config;
  if (cfg.family == Family::Discriminative) throw ConfigError("joint_table: discriminative model has no joint");
  Tape tape(false);
  ModelGraph g(tape, model);
  const Index Y = cfg.num_labels, C = cfg.components();
  JointTable out{Tensor(Y, C), Tensor::Zero(Y, C)};
  Var base = g.lm_base_logits(ids);

  if (cfg.is_latent() && !cfg.lm_uses_label()) {
    // p(x|c) does not depend on y: score each c once and add the label terms.
    std::vector<double> lm(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) {
      const Condition cond[] = {{g.latent_embedding(c), g.latent_output_weight()}};
      lm[static_cast<std::size_t>(c)] = g.conditional_lm_log_prob(base, ids, cond).scalar();
    }
    Tensor label_given_latent;
    if (cfg.structure == Structure::Joint) label_given_latent = g.log_label_given_latent().value();
    for (int y = 0; y < Y; ++y) {
      const Tensor factor = g.log_latent_factor(y).value();
      for (int c = 0; c < C; ++c) {
        double v = lm[static_cast<std::size_t>(c)] + factor(0, c);
        v += cfg.structure == Structure::Joint ? label_given_latent(c, y) : std::log(model.label_prior()(0, y));
        out.log_joint(y, c) = v;
      }
      out.log_latent_factor.row(y) = factor;
    }
    return out;
  }

  for (int y = 0; y < Y; ++y) {
    out.log_joint.row(y) = g.log_joints(base, ids, y).value();
    if (cfg.is_latent()) out.log_latent_factor.row(y) = g.log_latent_factor(y).value();
  }
  return out;
}

double latent_log_joint(const Model& model, std::span<const int> ids, int y, int c) {
  if (c < 0 || c >= model.config.components()) throw ContractError("latent value out of range");
  Tape tape(false);
  ModelGraph g(tape, model);
  return g.log_joints(ids, y).value()(0, c);
}

LogJointResult log_marginal(const Model& model, std::span<const int> ids, int y) {
  Tape tape(false);
  ModelGraph g(tape, model);
  Var l = g.log_joints(ids, y);
  LogJointResult r;
  r.log_joints.assign(l.value().data(), l.value().data() + l.value().size());
  r.log_marginal = latgen::log_sum_exp(l.value());
  return r;
}

Tensor disc_forward(const Model& model, std::span<const int> ids) {
  Tape tape(false);
  ModelGraph g(tape, model);
  return g.disc_log_probs(ids).value();
}

}  // namespace latgen
