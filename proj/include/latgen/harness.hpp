#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "latgen/corpus.hpp"
#include "latgen/inference.hpp"
#include "latgen/metrics.hpp"
#include "latgen/model.hpp"
#include "latgen/synthetic.hpp"
#include "latgen/training.hpp"

namespace latgen {

/// Grid value meaning "use the whole training pool".
inline constexpr int kAllPerClass = -1;

struct Dataset {
  std::string name;
  std::vector<LabeledText> pool;  // training file; dev and subsamples come from here
  std::vector<LabeledText> test;
  int num_labels = 0;
  std::optional<nlohmann::json> sidecar;  // synthetic process description

  double bayes_accuracy() const;  // NaN unless synthetic
};

/// `spec` is a directory holding train.csv (and optionally test.csv) in the
/// class-index,text layout, or `synthetic:key=value,...`.
Dataset load_dataset(const std::string& spec);
Dataset make_synthetic_dataset(const SyntheticSpec& spec, const std::string& name);

/// A named set of ModelConfig overrides, e.g. {"name": "lat_pc", "family": "latent", "d_label": 100}.
struct ModelVariant {
  std::string name;
  nlohmann::json overrides = nlohmann::json::object();
};

ModelConfig apply_variant(const ModelConfig& base, const ModelVariant& v);

struct RunSpec {
  std::string dataset = "synthetic:";
  ModelConfig model;
  TrainSpec train;
  std::vector<ModelVariant> models;
  std::vector<int> grid{5, 20, 100, 1000};
  std::vector<PredictionRule> rules{PredictionRule::MarginalizePrior};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t dev_size = 2000;
  std::uint64_t data_seed = 0;
  int min_count = 1;
  bool label_smoothing = false;
  std::size_t test_limit = 0;  // 0 evaluates the whole test split
  int jobs = 1;
  bool verbose = false;
  std::filesystem::path out = "runs";

  void validate() const;
  static std::vector<int> full_grid() { return {5, 20, 100, 1000, 2000, 5000, 10000, kAllPerClass}; }
};

void to_json(nlohmann::json& j, const RunSpec& s);
/// Fields missing from `j` keep the values already in `s`.
void merge_json(const nlohmann::json& j, RunSpec& s);
RunSpec load_run_spec(const std::filesystem::path& path);

std::vector<ModelVariant> default_variants();

/// Everything that determines one training run.
struct LegSpec {
  std::string dataset;
  std::string model_name;
  ModelConfig model;
  TrainSpec train;
  int n_per_class = 0;
  std::uint64_t seed = 0;
  std::vector<PredictionRule> rules;
  std::size_t dev_size = 2000;
  std::uint64_t data_seed = 0;
  int min_count = 1;
  bool label_smoothing = false;
  std::size_t test_limit = 0;

  nlohmann::json to_json() const;
  /// FNV-1a 64 of the canonical JSON, hex encoded.
  std::string hash() const;
};

struct LegResult {
  std::vector<MetricsRow> rows;  // one per rule
  std::optional<Model> model;
  Vocabulary vocab;
  std::vector<EncodedDocument> dev;
  std::vector<std::vector<int>> dev_predictions;  // per rule
  TrainResult training;
};

/// Rules from `requested` that apply to `family`; the family default if none do.
std::vector<PredictionRule> applicable_rules(Family family, const std::vector<PredictionRule>& requested);

/// Splits dev, subsamples, builds the vocabulary, trains and evaluates.
/// Exceptions propagate; use run_legs for error rows.
LegResult run_leg(const Dataset& data, const LegSpec& leg, std::ostream* log = nullptr);

/// Runs legs (skipping hashes already listed in out/completed_legs.txt),
/// appending rows to out/csv_name. Failing legs become rows with a note.
/// Returns the rows produced by this call, in leg order. `keep` receives
/// full results for successful legs when set.
std::vector<MetricsRow> run_legs(const Dataset& data, const std::vector<LegSpec>& legs, const RunSpec& spec,
                                 const std::string& csv_name,
                                 const std::function<void(std::size_t, LegResult&)>& keep = {});

std::vector<LegSpec> sweep_legs(const RunSpec& spec, const std::vector<ModelVariant>& variants,
                                const std::string& dataset_name);

struct SweepOutcome {
  std::vector<MetricsRow> rows;
  std::filesystem::path csv;
  std::filesystem::path plot;
};

/// Data-efficiency sweep over models x grid x seeds, plus an SVG plot of mean
/// accuracy against examples per class.
SweepOutcome run_sweep(const RunSpec& spec, std::ostream& report);

/// The four latent structures on the same data; prints Hierarchical - Middle.
std::vector<MetricsRow> compare_structures(const RunSpec& spec, std::ostream& report);

/// Direct and EM training of each latent variant with shared seeds.
std::vector<MetricsRow> compare_em_direct(const RunSpec& spec, std::ostream& report);

struct RuleAgreement {
  int n_per_class = 0;
  std::uint64_t seed = 0;
  std::string model;
  PredictionRule a{}, b{};
  double agreement = 0.0;
};

/// Pairwise fraction of dev documents on which two rules predict the same label.
std::vector<RuleAgreement> rule_agreement(const LegResult& leg, const std::string& model_name);

/// Trains each latent variant once per (n, seed) and evaluates all three latent
/// rules on the same checkpoint.
std::vector<RuleAgreement> compare_rules(const RunSpec& spec, std::ostream& report,
                                         std::vector<MetricsRow>* rows = nullptr);

}  // namespace latgen
