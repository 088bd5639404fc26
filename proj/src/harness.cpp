#include "latgen/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace latgen {

// ---------------------------------------------------------------------------
// Datasets

double Dataset::bayes_accuracy() const {
  if (!sidecar) return std::nan("");
  return sidecar->at("bayes_accuracy").get<double>();
}

Dataset make_synthetic_dataset(const SyntheticSpec& spec, const std::string& name) {
  SyntheticDataset s = generate_synthetic(spec);
  Dataset d;
  d.name = name;
  d.pool = std::move(s.train);
  d.test = std::move(s.test);
  d.num_labels = spec.num_labels;
  d.sidecar = s.sidecar();
  return d;
}

Dataset load_dataset(const std::string& spec) {
  constexpr std::string_view prefix = "synthetic:";
  if (spec.rfind(prefix, 0) == 0) return make_synthetic_dataset(parse_synthetic_spec(spec.substr(prefix.size())), spec);

  const std::filesystem::path dir(spec);
  if (!std::filesystem::is_directory(dir)) throw DataError("dataset directory not found: " + spec);
  Dataset d;
  d.name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
  d.pool = load_csv(dir / "train.csv");
  if (std::filesystem::exists(dir / "test.csv")) d.test = load_csv(dir / "test.csv");
  d.num_labels = count_labels(d.pool);
  for (const auto& r : d.test)
    if (r.label >= d.num_labels) throw DataError("test label " + std::to_string(r.label) + " unseen in train.csv");
  if (std::filesystem::exists(dir / "synthetic.json")) {
    std::ifstream in(dir / "synthetic.json");
    d.sidecar = nlohmann::json::parse(in);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Configuration

ModelConfig apply_variant(const ModelConfig& base, const ModelVariant& v) {
  nlohmann::json j = base;
  for (auto it = v.overrides.begin(); it != v.overrides.end(); ++it) {
    if (it.key() == "name") continue;
    if (!j.contains(it.key())) throw ConfigError("model variant '" + v.name + "': unknown field '" + it.key() + "'");
    j[it.key()] = it.value();
  }
  return j.get<ModelConfig>();
}

std::vector<ModelVariant> default_variants() {
  return {{"disc", {{"family", "discriminative"}}},
          {"gen", {{"family", "generative"}}},
          {"lat", {{"family", "latent"}, {"structure", "auxiliary"}}}};
}

void RunSpec::validate() const {
  if (grid.empty()) throw ConfigError("grid must not be empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] == kAllPerClass) {
      if (i + 1 != grid.size()) throw ConfigError("grid: 'all' must come last");
      continue;
    }
    if (grid[i] < 1) throw ConfigError("grid values must be >= 1");
    if (i > 0 && grid[i] <= grid[i - 1]) throw ConfigError("grid values must be strictly increasing");
  }
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (rules.empty()) throw ConfigError("rules must not be empty");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  train.validate();
}

namespace {

nlohmann::json train_to_json(const TrainSpec& t) {
  return {{"method", to_string(t.method)},   {"lr", t.lr},
          {"batch_size", t.batch_size},      {"max_epochs", t.max_epochs},
          {"patience", t.patience},          {"clip_norm", t.clip_norm},
          {"em_inner_steps", t.em_inner_steps}};
}

void train_from_json(const nlohmann::json& j, TrainSpec& t) {
  if (j.contains("method")) t.method = parse_method(j["method"].get<std::string>());
  t.lr = j.value("lr", t.lr);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.max_epochs = j.value("max_epochs", t.max_epochs);
  t.patience = j.value("patience", t.patience);
  t.clip_norm = j.value("clip_norm", t.clip_norm);
  t.em_inner_steps = j.value("em_inner_steps", t.em_inner_steps);
}

nlohmann::json grid_to_json(const std::vector<int>& grid) {
  nlohmann::json out = nlohmann::json::array();
  for (int n : grid) out.push_back(n == kAllPerClass ? nlohmann::json("all") : nlohmann::json(n));
  return out;
}

std::string rule_list(const std::vector<PredictionRule>& rules) {
  std::string s;
  for (auto r : rules) s += (s.empty() ? "" : "+") + to_string(r);
  return s;
}

}  // namespace

void to_json(nlohmann::json& j, const RunSpec& s) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& v : s.models) {
    nlohmann::json m = v.overrides;
    m["name"] = v.name;
    models.push_back(m);
  }
  nlohmann::json rules = nlohmann::json::array();
  for (auto r : s.rules) rules.push_back(to_string(r));
  j = {{"dataset", s.dataset},
       {"model", s.model},
       {"train", train_to_json(s.train)},
       {"models", models},
       {"grid", grid_to_json(s.grid)},
       {"rules", rules},
       {"seeds", s.seeds},
       {"dev_size", s.dev_size},
       {"data_seed", s.data_seed},
       {"min_count", s.min_count},
       {"label_smoothing", s.label_smoothing},
       {"test_limit", s.test_limit},
       {"jobs", s.jobs},
       {"verbose", s.verbose},
       {"out", s.out.string()}};
}

void merge_json(const nlohmann::json& j, RunSpec& s) {
  static const std::set<std::string> known = {"dataset", "model",    "train",     "models",          "grid",
                                              "rules",   "seeds",    "dev_size",  "data_seed",       "min_count",
                                              "label_smoothing",     "test_limit", "jobs", "verbose", "out"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("unknown run spec field '" + it.key() + "'");
  s.dataset = j.value("dataset", s.dataset);
  if (j.contains("model")) {
    nlohmann::json m = s.model;
    m.update(j["model"]);
    s.model = m.get<ModelConfig>();
  }
  if (j.contains("train")) train_from_json(j["train"], s.train);
  if (j.contains("models")) {
    s.models.clear();
    for (const auto& m : j["models"]) {
      ModelVariant v;
      v.name = m.value("name", "model" + std::to_string(s.models.size()));
      v.overrides = m;
      v.overrides.erase("name");
      s.models.push_back(v);
    }
  }
  if (j.contains("grid")) {
    s.grid.clear();
    for (const auto& g : j["grid"]) s.grid.push_back(g.is_string() && g == "all" ? kAllPerClass : g.get<int>());
  }
  if (j.contains("rules")) {
    s.rules.clear();
    for (const auto& r : j["rules"]) s.rules.push_back(parse_rule(r.get<std::string>()));
  }
  if (j.contains("seeds")) s.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  s.dev_size = j.value("dev_size", s.dev_size);
  s.data_seed = j.value("data_seed", s.data_seed);
  s.min_count = j.value("min_count", s.min_count);
  s.label_smoothing = j.value("label_smoothing", s.label_smoothing);
  s.test_limit = j.value("test_limit", s.test_limit);
  s.jobs = j.value("jobs", s.jobs);
  s.verbose = j.value("verbose", s.verbose);
  if (j.contains("out")) s.out = j["out"].get<std::string>();
}

RunSpec load_run_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  RunSpec s;
  try {
    merge_json(nlohmann::json::parse(in), s);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Legs

nlohmann::json LegSpec::to_json() const {
  nlohmann::json rules_json = nlohmann::json::array();
  for (auto r : rules) rules_json.push_back(latgen::to_string(r));
  return {{"dataset", dataset},     {"model_name", model_name}, {"model", model},
          {"train", train_to_json(train)}, {"n_per_class", n_per_class}, {"seed", seed},
          {"rules", rules_json},    {"dev_size", dev_size},     {"data_seed", data_seed},
          {"min_count", min_count}, {"label_smoothing", label_smoothing}, {"test_limit", test_limit}};
}

std::string LegSpec::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : to_json().dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<PredictionRule> applicable_rules(Family family, const std::vector<PredictionRule>& requested) {
  std::vector<PredictionRule> out;
  for (auto r : requested) {
    try {
      check_rule(family, r);
      out.push_back(r);
    } catch (const ConfigError&) {
    }
  }
  if (out.empty()) out.push_back(default_rule(family));
  return out;
}

namespace {

// Predicted label for every rule, scoring each document once.
std::vector<std::vector<int>> predict_all(const Model& m, std::span<const EncodedDocument> docs,
                                          const std::vector<PredictionRule>& rules) {
  std::vector<std::vector<int>> out(rules.size());
  for (const auto& d : docs) {
    if (m.config.family == Family::Discriminative) {
      const int label = predict(m, d.ids, PredictionRule::DiscriminativeArgmax).label;
      for (auto& o : out) o.push_back(label);
      continue;
    }
    const JointTable t = joint_table(m, d.ids);
    for (std::size_t r = 0; r < rules.size(); ++r) {
      const auto s = label_scores(t, rules[r]);
      out[r].push_back(static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin()));
    }
  }
  return out;
}

double accuracy(const std::vector<int>& predicted, std::span<const EncodedDocument> docs) {
  if (docs.empty()) return std::nan("");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < docs.size(); ++i) hit += predicted[i] == docs[i].label;
  return static_cast<double>(hit) / static_cast<double>(docs.size());
}

std::string structure_name(const ModelConfig& c) { return c.is_latent() ? to_string(c.structure) : "none"; }

}  // namespace

LegResult run_leg(const Dataset& data, const LegSpec& leg, std::ostream* log) {
  const auto start = std::chrono::steady_clock::now();
  DevSplit split = split_dev(data.pool, leg.dev_size, leg.data_seed);
  if (split.warning && log) *log << "warning: " << *split.warning << '\n';
  const std::vector<LabeledText> sub =
      leg.n_per_class == kAllPerClass ? split.train_pool
                                      : subsample_per_class(split.train_pool, leg.n_per_class, data.num_labels, leg.seed);
  std::vector<std::string> texts;
  texts.reserve(sub.size());
  for (const auto& r : sub) texts.push_back(r.text);

  LegResult res;
  res.vocab = build_vocab(texts, leg.min_count);
  const auto train_docs = encode_all(sub, res.vocab);
  res.dev = encode_all(split.dev, res.vocab);
  std::span<const LabeledText> test_records = data.test;
  if (leg.test_limit > 0 && test_records.size() > leg.test_limit) test_records = test_records.first(leg.test_limit);
  const auto test_docs = encode_all(test_records, res.vocab);

  ModelConfig cfg = leg.model;
  cfg.vocab_size = static_cast<int>(res.vocab.size());
  cfg.num_labels = data.num_labels;
  Model model(cfg, leg.seed);
  if (cfg.family != Family::Discriminative)
    model.set_label_prior(estimate_label_prior(label_counts(sub, data.num_labels), leg.label_smoothing));

  const auto rules = applicable_rules(cfg.family, leg.rules);
  TrainSpec ts = leg.train;
  ts.seed = leg.seed;
  ts.dev_rule = rules.front();
  EpochCallback cb;
  if (log)
    cb = [&](const EpochReport& r) {
      *log << "  [" << leg.model_name << " n=" << leg.n_per_class << " seed=" << leg.seed << "] epoch " << r.epoch
           << " objective " << std::fixed << std::setprecision(4) << r.train_objective << " dev "
           << r.dev_accuracy << std::defaultfloat << '\n';
      return true;
    };
  res.training = train(model, train_docs, res.dev, ts, cb);

  res.dev_predictions = predict_all(model, res.dev, rules);
  const auto test_predictions = predict_all(model, test_docs, rules);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (std::size_t r = 0; r < rules.size(); ++r) {
    MetricsRow row;
    row.dataset = leg.dataset;
    row.family = to_string(cfg.family);
    row.structure = structure_name(cfg);
    row.n_per_class = leg.n_per_class;
    row.seed = leg.seed;
    row.method = to_string(leg.train.method);
    row.rule = to_string(rules[r]);
    row.epoch_best = res.training.best_epoch;
    row.dev_acc = accuracy(res.dev_predictions[r], res.dev);
    row.test_acc = accuracy(test_predictions[r], test_docs);
    row.train_nll = res.training.best_epoch > 0
                        ? res.training.reports[static_cast<std::size_t>(res.training.best_epoch - 1)].train_objective
                        : std::nan("");
    row.wall_seconds = wall;
    row.param_count = count_params(cfg);
    row.model = leg.model_name;
    if (res.training.diverged) row.note = "diverged: " + res.training.message;
    res.rows.push_back(row);
  }
  res.model = std::move(model);
  return res;
}

namespace {

struct CompletedLeg {
  std::vector<MetricsRow> rows;
  std::vector<std::vector<int>> dev_predictions;
};

std::map<std::string, CompletedLeg> read_completed(const std::filesystem::path& path) {
  std::map<std::string, CompletedLeg> done;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CompletedLeg c;
      std::string csv = format_metrics_csv({});
      for (const auto& r : j.at("rows")) csv += r.get<std::string>() + '\n';
      c.rows = parse_metrics_csv(csv);
      c.dev_predictions = j.value("dev_predictions", std::vector<std::vector<int>>{});
      done[j.at("hash").get<std::string>()] = std::move(c);
    } catch (const std::exception&) {
      // A torn final line from an interrupted run: that leg simply reruns.
    }
  }
  return done;
}

MetricsRow error_row(const LegSpec& leg, const std::string& what) {
  MetricsRow row;
  row.dataset = leg.dataset;
  row.family = to_string(leg.model.family);
  row.structure = structure_name(leg.model);
  row.n_per_class = leg.n_per_class;
  row.seed = leg.seed;
  row.method = to_string(leg.train.method);
  row.rule = rule_list(leg.rules);
  row.model = leg.model_name;
  row.dev_acc = row.test_acc = row.train_nll = std::nan("");
  row.note = "error: " + what;
  return row;
}

}  // namespace

std::vector<MetricsRow> run_legs(const Dataset& data, const std::vector<LegSpec>& legs, const RunSpec& spec,
                                 const std::string& csv_name,
                                 const std::function<void(std::size_t, LegResult&)>& keep) {
  std::filesystem::create_directories(spec.out);
  const auto completed_path = spec.out / "completed_legs.jsonl";
  const auto csv_path = spec.out / csv_name;
  const auto done = read_completed(completed_path);

  std::vector<std::vector<MetricsRow>> rows(legs.size());
  std::mutex io;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < legs.size(); i = next++) {
      const LegSpec& leg = legs[i];
      const std::string h = leg.hash();
      if (auto it = done.find(h); it != done.end()) {
        rows[i] = it->second.rows;
        std::lock_guard lock(io);
        if (keep) {
          LegResult r;
          r.rows = it->second.rows;
          r.dev_predictions = it->second.dev_predictions;
          keep(i, r);
        }
        if (spec.verbose) std::cerr << "skip completed leg " << leg.model_name << " n=" << leg.n_per_class
                                    << " seed=" << leg.seed << '\n';
        continue;
      }
      std::ostringstream log;
      LegResult result;
      bool ok = true;
      try {
        result = run_leg(data, leg, spec.verbose ? &log : nullptr);
      } catch (const std::exception& e) {
        ok = false;
        result.rows = {error_row(leg, e.what())};
      }
      std::lock_guard lock(io);
      if (spec.verbose) std::cerr << log.str();
      rows[i] = result.rows;
      append_metrics_csv(csv_path, result.rows);
      if (ok) {
        nlohmann::json entry = {{"hash", h}, {"leg", leg.to_json()}, {"dev_predictions", result.dev_predictions}};
        entry["rows"] = nlohmann::json::array();
        for (const auto& r : result.rows) entry["rows"].push_back(format_metrics_row(r));
        std::ofstream out(completed_path, std::ios::app);
        out << entry.dump() << '\n';
        if (keep) keep(i, result);
      }
    }
  };
  if (spec.jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < spec.jobs; ++t) pool.emplace_back(worker);
  }

  std::vector<MetricsRow> out;
  for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

std::vector<LegSpec> sweep_legs(const RunSpec& spec, const std::vector<ModelVariant>& variants,
                                const std::string& dataset_name) {
  std::vector<LegSpec> legs;
  for (const auto& v : variants)
    for (int n : spec.grid)
      for (auto seed : spec.seeds) {
        LegSpec leg;
        leg.dataset = dataset_name;
        leg.model_name = v.name;
        leg.model = apply_variant(spec.model, v);
        leg.train = spec.train;
        leg.n_per_class = n;
        leg.seed = seed;
        leg.rules = spec.rules;
        leg.dev_size = spec.dev_size;
        leg.data_seed = spec.data_seed;
        leg.min_count = spec.min_count;
        leg.label_smoothing = spec.label_smoothing;
        leg.test_limit = spec.test_limit;
        legs.push_back(leg);
      }
  return legs;
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

std::string pct(double v) {
  if (std::isnan(v)) return "-";
  std::ostringstream o;
  o << std::fixed << std::setprecision(2) << 100.0 * v;
  return o.str();
}

std::string n_label(int n) { return n == kAllPerClass ? "all" : std::to_string(n); }

struct MeanRange {
  double mean = 0, lo = INFINITY, hi = -INFINITY;
  int count = 0;
  void add(double v) {
    if (std::isnan(v)) return;
    mean = (mean * count + v) / (count + 1);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    ++count;
  }
  std::string str() const {
    if (count == 0) return "-";
    return pct(mean) + " [" + pct(lo) + ", " + pct(hi) + "]";
  }
};

std::vector<ModelVariant> latent_variants(const RunSpec& spec) {
  std::vector<ModelVariant> out;
  for (const auto& v : spec.models)
    if (apply_variant(spec.model, v).is_latent()) out.push_back(v);
  if (out.empty()) {
    if (spec.model.is_latent()) out.push_back({"lat", nlohmann::json::object()});
    else out.push_back({"lat", {{"family", "latent"}, {"structure", "auxiliary"}}});
  }
  return out;
}

void print_sweep_table(const std::vector<MetricsRow>& rows, std::ostream& report) {
  std::map<std::pair<std::string, int>, std::pair<MeanRange, MeanRange>> cells;
  std::vector<std::string> models;
  std::vector<int> ns;
  for (const auto& r : rows) {
    const std::string key = r.model + " (" + r.rule + ")";
    if (std::find(models.begin(), models.end(), key) == models.end()) models.push_back(key);
    if (std::find(ns.begin(), ns.end(), r.n_per_class) == ns.end()) ns.push_back(r.n_per_class);
    auto& c = cells[{key, r.n_per_class}];
    if (r.note.rfind("error", 0) == 0) continue;
    c.first.add(r.dev_acc);
    c.second.add(r.test_acc);
  }
  report << "model\tn_per_class\tdev_acc% mean [min, max]\ttest_acc% mean [min, max]\n";
  for (const auto& m : models)
    for (int n : ns)
      if (cells.count({m, n})) {
        const auto& c = cells[{m, n}];
        report << m << '\t' << n_label(n) << '\t' << c.first.str() << '\t' << c.second.str() << '\n';
      }
}

}  // namespace

SweepOutcome run_sweep(const RunSpec& spec, std::ostream& report) {
  spec.validate();
  const Dataset data = load_dataset(spec.dataset);
  const auto variants = spec.models.empty() ? default_variants() : spec.models;
  SweepOutcome out;
  out.csv = spec.out / "metrics.csv";
  out.plot = spec.out / "accuracy_vs_size.svg";
  out.rows = run_legs(data, sweep_legs(spec, variants, data.name), spec, "metrics.csv");
  print_sweep_table(out.rows, report);
  const bool use_dev = data.test.empty();
  write_svg_plot(out.plot, accuracy_series(out.rows, use_dev), "Accuracy vs. training size (" + data.name + ")",
                 "training examples per class", use_dev ? "dev accuracy" : "test accuracy", true);
  return out;
}

std::vector<MetricsRow> compare_structures(const RunSpec& spec, std::ostream& report) {
  spec.validate();
  const Dataset data = load_dataset(spec.dataset);
  nlohmann::json base = spec.models.empty() ? nlohmann::json::object() : latent_variants(spec).front().overrides;
  std::vector<ModelVariant> variants;
  for (Structure s : {Structure::Auxiliary, Structure::Joint, Structure::Middle, Structure::Hierarchical}) {
    ModelVariant v{to_string(s), base};
    v.overrides["family"] = "latent";
    v.overrides["structure"] = to_string(s);
    variants.push_back(v);
  }
  RunSpec one_rule = spec;
  one_rule.rules = {spec.rules.front()};
  const auto rows = run_legs(data, sweep_legs(one_rule, variants, data.name), one_rule, "structures.csv");

  std::map<std::pair<int, std::uint64_t>, std::map<std::string, double>> dev;
  for (const auto& r : rows) dev[{r.n_per_class, r.seed}][r.structure] = r.note.rfind("error", 0) == 0 ? NAN : r.dev_acc;
  report << "n_per_class\tseed\tauxiliary\tjoint\tmiddle\thierarchical\thierarchical-middle\n";
  std::map<int, MeanRange> delta;
  for (const auto& [key, m] : dev) {
    auto get = [&](const char* s) { return m.count(s) ? m.at(s) : NAN; };
    const double d = get("hierarchical") - get("middle");
    delta[key.first].add(d);
    report << n_label(key.first) << '\t' << key.second << '\t' << pct(get("auxiliary")) << '\t' << pct(get("joint"))
           << '\t' << pct(get("middle")) << '\t' << pct(get("hierarchical")) << '\t' << std::showpos << pct(d)
           << std::noshowpos << '\n';
  }
  for (const auto& [n, mr] : delta)
    report << "mean dev accuracy delta (hierarchical - middle) at n=" << n_label(n) << ": " << std::showpos
           << pct(mr.mean) << std::noshowpos << " points\n";
  return rows;
}

std::vector<MetricsRow> compare_em_direct(const RunSpec& spec, std::ostream& report) {
  spec.validate();
  const Dataset data = load_dataset(spec.dataset);
  const auto variants = latent_variants(spec);
  RunSpec direct = spec, em = spec;
  direct.train.method = TrainMethod::Direct;
  em.train.method = TrainMethod::EM;
  direct.rules = em.rules = {spec.rules.front()};
  auto legs = sweep_legs(direct, variants, data.name);
  const auto em_legs = sweep_legs(em, variants, data.name);
  legs.insert(legs.end(), em_legs.begin(), em_legs.end());
  const auto rows = run_legs(data, legs, direct, "em_vs_direct.csv");

  std::map<std::tuple<std::string, int, std::uint64_t>, std::map<std::string, const MetricsRow*>> paired;
  for (const auto& r : rows) paired[{r.model, r.n_per_class, r.seed}][r.method] = &r;
  report << "model\tn_per_class\tseed\tdirect_dev%\tem_dev%\tdirect-em\tdirect_best_epoch\tem_best_epoch\n";
  std::map<std::pair<std::string, int>, MeanRange> gap;
  for (const auto& [key, m] : paired) {
    const MetricsRow* d = m.count("direct") ? m.at("direct") : nullptr;
    const MetricsRow* e = m.count("em") ? m.at("em") : nullptr;
    const double dd = d ? d->dev_acc : NAN, ee = e ? e->dev_acc : NAN;
    gap[{std::get<0>(key), std::get<1>(key)}].add(dd - ee);
    report << std::get<0>(key) << '\t' << n_label(std::get<1>(key)) << '\t' << std::get<2>(key) << '\t' << pct(dd)
           << '\t' << pct(ee) << '\t' << std::showpos << pct(dd - ee) << std::noshowpos << '\t'
           << (d ? d->epoch_best : 0) << '\t' << (e ? e->epoch_best : 0) << '\n';
  }
  for (const auto& [k, mr] : gap)
    report << "mean dev accuracy gap (direct - em) for " << k.first << " at n=" << n_label(k.second) << ": "
           << std::showpos << pct(mr.mean) << std::noshowpos << " points\n";
  return rows;
}

std::vector<RuleAgreement> rule_agreement(const LegResult& leg, const std::string& model_name) {
  std::vector<RuleAgreement> out;
  if (leg.rows.empty()) return out;
  std::vector<PredictionRule> rules;
  for (const auto& r : leg.rows) rules.push_back(parse_rule(r.rule));
  for (std::size_t a = 0; a < rules.size(); ++a)
    for (std::size_t b = a + 1; b < rules.size(); ++b) {
      const auto& pa = leg.dev_predictions[a];
      const auto& pb = leg.dev_predictions[b];
      std::size_t same = 0;
      for (std::size_t i = 0; i < pa.size(); ++i) same += pa[i] == pb[i];
      RuleAgreement g;
      g.n_per_class = leg.rows.front().n_per_class;
      g.seed = leg.rows.front().seed;
      g.model = model_name;
      g.a = rules[a];
      g.b = rules[b];
      g.agreement = pa.empty() ? NAN : static_cast<double>(same) / static_cast<double>(pa.size());
      out.push_back(g);
    }
  return out;
}

std::vector<RuleAgreement> compare_rules(const RunSpec& spec, std::ostream& report, std::vector<MetricsRow>* rows_out) {
  spec.validate();
  const Dataset data = load_dataset(spec.dataset);
  RunSpec all_rules = spec;
  all_rules.rules = {PredictionRule::MarginalizePrior, PredictionRule::MarginalizePosterior, PredictionRule::MaxLatent};
  const auto legs = sweep_legs(all_rules, latent_variants(spec), data.name);
  std::vector<RuleAgreement> agreements;
  const auto rows = run_legs(data, legs, all_rules, "rules.csv", [&](std::size_t i, LegResult& r) {
    const auto g = rule_agreement(r, legs[i].model_name);
    agreements.insert(agreements.end(), g.begin(), g.end());
  });
  std::sort(agreements.begin(), agreements.end(), [](const RuleAgreement& x, const RuleAgreement& y) {
    return std::tie(x.model, x.n_per_class, x.seed, x.a, x.b) < std::tie(y.model, y.n_per_class, y.seed, y.a, y.b);
  });

  report << "model\tn_per_class\tseed\trule\tdev_acc%\ttest_acc%\n";
  for (const auto& r : rows)
    report << r.model << '\t' << n_label(r.n_per_class) << '\t' << r.seed << '\t' << r.rule << '\t' << pct(r.dev_acc)
           << '\t' << pct(r.test_acc) << '\n';
  report << "model\tn_per_class\tseed\trule_a\trule_b\tagreement%\n";
  std::ofstream csv(spec.out / "rules_agreement.csv");
  csv << "model,n_per_class,seed,rule_a,rule_b,agreement\n";
  for (const auto& g : agreements) {
    report << g.model << '\t' << n_label(g.n_per_class) << '\t' << g.seed << '\t' << to_string(g.a) << '\t'
           << to_string(g.b) << '\t' << pct(g.agreement) << '\n';
    csv << csv_field(g.model) << ',' << g.n_per_class << ',' << g.seed << ',' << to_string(g.a) << ','
        << to_string(g.b) << ',' << std::setprecision(17) << g.agreement << '\n';
  }
  if (rows_out) *rows_out = rows;
  return agreements;
}

}  // namespace latgen
