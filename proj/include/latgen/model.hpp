#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "latgen/autodiff.hpp"
#include "latgen/corpus.hpp"
#include "latgen/params.hpp"

namespace latgen {

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

enum class Family { Discriminative, Generative, Latent };

/// Graphical structure of a latent generative classifier.
///   Auxiliary:    p(x|c,y) p(c) p(y)
///   Joint:        p(x|c) p(y|c) p(c)
///   Middle:       p(x|c) p(c|y) p(y)
///   Hierarchical: p(x|c,y) p(c|y) p(y)
enum class Structure { Auxiliary, Joint, Middle, Hierarchical };

std::string to_string(Family f);
std::string to_string(Structure s);
Family parse_family(std::string_view s);
Structure parse_structure(std::string_view s);

struct ModelConfig {
  Family family = Family::Latent;
  Structure structure = Structure::Auxiliary;  // ignored unless family == Latent
  int d_word = 100;
  int d_hidden = 100;
  int d_label = 100;   // d1
  int d_latent = 10;   // d2
  int num_latent = 10;
  int num_labels = 2;
  int vocab_size = 0;  // includes the three reserved ids
  double init_scale = 0.1;
  double forget_bias = 1.0;

  void validate() const;

  bool is_latent() const { return family == Family::Latent; }
  /// True when the language model conditions on the label embedding (edge y -> x).
  bool lm_uses_label() const;
  bool lm_uses_latent() const { return is_latent(); }
  bool has_label_embedding() const;
  /// p_Phi(c) from (w_c, b_c): Auxiliary and Joint.
  bool has_latent_prior() const;
  /// p(c|y) head: Middle and Hierarchical.
  bool has_latent_given_label() const;
  /// p(y|c) head: Joint.
  bool has_label_given_latent() const;
  /// p_Psi(y) factor: every family except Discriminative and the Joint structure.
  bool uses_label_prior() const;
  /// Width of the softmax input [h; v_y; v_c] for generative families.
  int softmax_input_dim() const;
  /// Latent values scored per (doc, y); 1 for the standard generative model.
  int components() const { return is_latent() ? num_latent : 1; }

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Closed-form number of learnable scalars (the fixed label prior is excluded).
std::int64_t count_params(const ModelConfig& config);

/// Allocates every parameter array for `config`, uniform in [-init_scale,
/// init_scale] from `seed`, forget-gate bias set to forget_bias, label prior uniform.
ParamStore init_params(const ModelConfig& config, std::uint64_t seed);

/// Maximum-likelihood label prior from label counts; add-one when smoothing.
Tensor estimate_label_prior(std::span<const int> counts, bool add_one_smoothing = false);

/// A model is its configuration plus parameters.
struct Model {
  ModelConfig config;
  ParamStore params;

  Model() = default;
  Model(ModelConfig cfg, std::uint64_t seed) : config(cfg), params(init_params(cfg, seed)) {}
  Model(ModelConfig cfg, ParamStore p) : config(cfg), params(std::move(p)) {}

  void set_label_prior(const Tensor& prior);
  const Tensor& label_prior() const { return params.at("label_prior").value; }
};

/// One conditioning input of the language-model softmax: an embedding row and
/// the block of output weights it feeds.
struct Condition {
  Var embedding;       // [1 x d]
  Var output_weight;   // [d x |V|]
};

/// Parameters of a Model bound onto a tape, with the forward computations of
/// every family. Construct with a recording tape and a mutable model to train;
/// a const model binds read-only.
class ModelGraph {
public:
  ModelGraph(Tape& tape, Model& model);
  ModelGraph(Tape& tape, const Model& model);

  const ModelConfig& config() const { return config_; }
  Tape& tape() const { return *tape_; }

  /// log p(y|x) for every label: LSTM over all tokens, mean pooled, softmax layer. [1 x |Y|]
  Var disc_log_probs(std::span<const int> ids);

  /// Teacher-forced LM logits before conditioning: row t scores ids[t+1]. [T-1 x |V|]
  Var lm_base_logits(std::span<const int> ids);
  /// sum_t log p(ids[t+1] | ids[..t], conditions); base from lm_base_logits.
  Var conditional_lm_log_prob(Var base, std::span<const int> ids, std::span<const Condition> conditions);
  /// Same, recomputing the base logits.
  Var conditional_lm_log_prob(std::span<const int> ids, std::span<const Condition> conditions);

  Var label_embedding(int y);
  Var latent_embedding(int c);
  Var label_output_weight() const { return out_label_; }
  Var latent_output_weight() const { return out_latent_; }

  /// log p_Phi(c) over all c. [1 x |C|]
  Var log_latent_prior();
  /// log p(c|y) over all c. [1 x |C|]
  Var log_latent_given_label(int y);
  /// log p(y|c) for all (c, y). [|C| x |Y|]
  Var log_label_given_latent();
  /// log p_Psi(y) as a constant 1x1 node.
  Var log_label_prior(int y);

  /// Per-latent-value log joints l_c = log p(x, y, c). [1 x |C|]; [1 x 1] for
  /// the standard generative model (log p(x|y) + log p(y)).
  Var log_joints(std::span<const int> ids, int y);
  Var log_joints(Var base, std::span<const int> ids, int y);
  /// log sum_c p(x, y, c) (Latent) or log p(x, y) (Generative). [1 x 1]
  Var log_marginal(std::span<const int> ids, int y);

  /// log of the factor that generates c for label y: p_Phi(c) or p(c|y). [1 x |C|]
  Var log_latent_factor(int y);

private:
  template <typename Store>
  void bind(Store& params);

  Tape* tape_;
  ModelConfig config_;
  Tensor label_prior_;
  Var embedding_;
  LstmWeights lstm_;
  Var cls_weight_, cls_bias_;
  Var out_hidden_, out_bias_, out_label_, out_latent_;
  Var label_table_, latent_table_;
  Var prior_weight_, prior_bias_;
  Var cy_weight_, cy_bias_;
  Var yc_weight_, yc_bias_;
  std::optional<Var> cached_latent_prior_;
  std::optional<Var> cached_label_given_latent_;
};

/// Log joints for every (y, c) of a document, evaluated without gradients.
struct JointTable {
  Tensor log_joint;          // [|Y| x |C|]
  Tensor log_latent_factor;  // [|Y| x |C|]; zeros for the standard generative model
};

JointTable joint_table(const Model& model, std::span<const int> ids);

/// Scalar log p(x, y, c) (c ignored for Generative).
double latent_log_joint(const Model& model, std::span<const int> ids, int y, int c);

struct LogJointResult {
  std::vector<double> log_joints;  // per latent value
  double log_marginal = 0.0;
};

LogJointResult log_marginal(const Model& model, std::span<const int> ids, int y);

/// log p(y|x) over labels for a discriminative model.
Tensor disc_forward(const Model& model, std::span<const int> ids);

}  // namespace latgen
