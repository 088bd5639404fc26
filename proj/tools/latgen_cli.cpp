// Command-line front end: training, evaluation, experiments, sampling and data generation.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "latgen/checkpoint.hpp"
#include "latgen/generation.hpp"
#include "latgen/harness.hpp"

using namespace latgen;

namespace {

// Named model variants accepted by --models.
const std::map<std::string, nlohmann::json>& named_variants() {
  static const std::map<std::string, nlohmann::json> v = {
      {"disc", {{"family", "discriminative"}}},
      {"gen", {{"family", "generative"}}},
      {"lat", {{"family", "latent"}, {"structure", "auxiliary"}}},
      {"gen_pc", {{"family", "generative"}, {"d_label", 110}}},
      {"lat_pc", {{"family", "latent"}, {"structure", "auxiliary"}, {"d_label", 100}, {"num_latent", 10}, {"d_latent", 10}}},
      {"aux", {{"family", "latent"}, {"structure", "auxiliary"}}},
      {"joint", {{"family", "latent"}, {"structure", "joint"}}},
      {"middle", {{"family", "latent"}, {"structure", "middle"}}},
      {"hier", {{"family", "latent"}, {"structure", "hierarchical"}}},
  };
  return v;
}

std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Flags shared by every experiment subcommand; unset flags leave the config file values alone.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> dataset;

  std::optional<std::string> family, structure, method, models, grid, seeds, rules;
  std::optional<int> num_latent, d_latent, d_label, d_word, d_hidden;
  std::optional<double> lr;
  std::optional<int> batch_size, max_epochs, patience, em_inner_steps, jobs, min_count;
  std::optional<std::size_t> dev_size, test_limit;
  bool verbose = false;

  void attach_basic(CLI::App* app) {
    app->add_option("--config", config, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "random seed (single run) or seed list override");
    app->add_option("--out", out, "output directory");
    app->add_option("--dataset", dataset, "dataset directory or synthetic:key=value,...");
  }

  void attach(CLI::App* app) {
    attach_basic(app);
    app->add_option("--family", family, "discriminative | generative | latent");
    app->add_option("--structure", structure, "auxiliary | joint | middle | hierarchical");
    app->add_option("--method", method, "direct | em");
    app->add_option("--models", models, "comma list of: disc,gen,lat,gen_pc,lat_pc,aux,joint,middle,hier");
    app->add_option("--grid", grid, "examples per class, comma list (use 'all' for the whole pool, 'full' for the full grid)");
    app->add_option("--seeds", seeds, "comma list of seeds");
    app->add_option("--rules", rules, "comma list of prediction rules");
    app->add_option("--num-latent", num_latent, "latent values |C|");
    app->add_option("--d-latent", d_latent, "latent embedding size");
    app->add_option("--d-label", d_label, "label embedding size");
    app->add_option("--d-word", d_word, "word embedding size");
    app->add_option("--d-hidden", d_hidden, "LSTM size");
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--batch-size", batch_size, "mini-batch size");
    app->add_option("--max-epochs", max_epochs, "epoch limit");
    app->add_option("--patience", patience, "early-stopping patience in epochs");
    app->add_option("--em-inner-steps", em_inner_steps, "Adam steps per M-step");
    app->add_option("--dev-size", dev_size, "dev documents held out of the training pool");
    app->add_option("--test-limit", test_limit, "evaluate at most this many test documents (0 = all)");
    app->add_option("--min-count", min_count, "vocabulary frequency threshold");
    app->add_option("--jobs", jobs, "parallel legs");
    app->add_flag("--verbose,-v", verbose, "log every epoch");
  }

  RunSpec build() const {
    RunSpec s = config.empty() ? RunSpec{} : load_run_spec(config);
    if (dataset) s.dataset = *dataset;
    if (out) s.out = *out;
    if (seed) s.seeds = {*seed};
    if (seeds) {
      s.seeds.clear();
      for (const auto& x : split(*seeds)) s.seeds.push_back(std::stoull(x));
    }
    if (family) s.model.family = parse_family(*family);
    if (structure) s.model.structure = parse_structure(*structure);
    if (method) s.train.method = parse_method(*method);
    if (num_latent) s.model.num_latent = *num_latent;
    if (d_latent) s.model.d_latent = *d_latent;
    if (d_label) s.model.d_label = *d_label;
    if (d_word) s.model.d_word = *d_word;
    if (d_hidden) s.model.d_hidden = *d_hidden;
    if (lr) s.train.lr = *lr;
    if (batch_size) s.train.batch_size = *batch_size;
    if (max_epochs) s.train.max_epochs = *max_epochs;
    if (patience) s.train.patience = *patience;
    if (em_inner_steps) s.train.em_inner_steps = *em_inner_steps;
    if (dev_size) s.dev_size = *dev_size;
    if (test_limit) s.test_limit = *test_limit;
    if (min_count) s.min_count = *min_count;
    if (jobs) s.jobs = *jobs;
    if (verbose) s.verbose = true;
    if (grid) {
      if (*grid == "full") {
        s.grid = RunSpec::full_grid();
      } else {
        s.grid.clear();
        for (const auto& g : split(*grid)) s.grid.push_back(g == "all" ? kAllPerClass : std::stoi(g));
      }
    }
    if (rules) {
      s.rules.clear();
      for (const auto& r : split(*rules)) s.rules.push_back(parse_rule(r));
    }
    if (models) {
      s.models.clear();
      for (const auto& name : split(*models)) {
        auto it = named_variants().find(name);
        if (it == named_variants().end()) throw ConfigError("unknown model name '" + name + "'");
        s.models.push_back({name, it->second});
      }
    }
    s.validate();
    return s;
  }
};

void save_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

int cmd_train(const CommonFlags& f, const std::optional<std::string>& n_flag) {
  RunSpec spec = f.build();
  const Dataset data = load_dataset(spec.dataset);
  int n = spec.grid.front();
  if (n_flag) n = *n_flag == "all" ? kAllPerClass : std::stoi(*n_flag);
  spec.grid = {n};
  spec.seeds = {spec.seeds.front()};
  std::vector<ModelVariant> variants = spec.models;
  if (variants.empty() || f.family) variants = {{to_string(spec.model.family), nlohmann::json::object()}};
  const LegSpec leg = sweep_legs(spec, {variants.front()}, data.name).front();

  std::filesystem::create_directories(spec.out);
  LegResult res = run_leg(data, leg, spec.verbose ? &std::cerr : nullptr);
  save_checkpoint(spec.out / "model.ckpt", *res.model, res.vocab);
  append_metrics_csv(spec.out / "train_metrics.csv", res.rows);
  std::ofstream epochs(spec.out / "epochs.csv");
  epochs << "epoch,train_objective,dev_accuracy,wall_seconds\n";
  for (const auto& r : res.training.reports)
    epochs << r.epoch << ',' << r.train_objective << ',' << r.dev_accuracy << ',' << r.wall_seconds << '\n';
  save_json(spec.out / "run_spec.json", spec);

  std::cout << format_metrics_csv(res.rows);
  std::cout << "checkpoint: " << (spec.out / "model.ckpt").string() << '\n';
  if (res.training.diverged) std::cerr << "training diverged: " << res.training.message << '\n';
  return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& checkpoint, const std::optional<std::string>& rule_flag,
             const std::string& split_name) {
  RunSpec spec = f.build();
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Dataset data = load_dataset(spec.dataset);
  if (data.num_labels != ck.model.config.num_labels)
    throw DataError("dataset has " + std::to_string(data.num_labels) + " labels, checkpoint expects " +
                    std::to_string(ck.model.config.num_labels));
  std::vector<LabeledText> records;
  if (split_name == "test") {
    records = data.test;
  } else if (split_name == "dev") {
    records = split_dev(data.pool, spec.dev_size, spec.data_seed).dev;
  } else {
    throw ConfigError("--split must be test or dev");
  }
  if (spec.test_limit > 0 && records.size() > spec.test_limit) records.resize(spec.test_limit);
  const auto docs = encode_all(records, ck.vocab);
  const PredictionRule rule = rule_flag ? parse_rule(*rule_flag) : default_rule(ck.model.config.family);
  const double acc = evaluate_accuracy(ck.model, docs, rule);
  std::cout << "split=" << split_name << " documents=" << docs.size() << " rule=" << to_string(rule)
            << " accuracy=" << acc << '\n';
  return 0;
}

int cmd_generate(const std::string& checkpoint, int label, const std::string& latent, double temperature, int max_len,
                 int count, std::uint64_t seed) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  SampleSpec s;
  s.label = label;
  if (latent != "marginal") s.latent = std::stoi(latent);
  s.temperature = temperature;
  s.max_len = max_len;
  s.seed = seed;
  for (const Sample& x : sample_many(ck.model, ck.vocab, s, count))
    std::cout << "y=" << label << "\tc=" << x.latent << '\t' << x.text << '\n';
  return 0;
}

int cmd_params(const CommonFlags& f, int vocab_size, int num_labels) {
  RunSpec spec = f.build();
  auto variants = spec.models.empty() ? default_variants() : spec.models;
  std::cout << "model\tfamily\tstructure\tsoftmax_input\tparams\n";
  for (const auto& v : variants) {
    ModelConfig c = apply_variant(spec.model, v);
    c.vocab_size = vocab_size;
    c.num_labels = num_labels;
    std::cout << v.name << '\t' << to_string(c.family) << '\t' << (c.is_latent() ? to_string(c.structure) : "none")
              << '\t' << c.softmax_input_dim() << '\t' << count_params(c) << '\n';
  }
  return 0;
}

int cmd_synth(const CommonFlags& f, SyntheticSpec s, const std::optional<std::string>& extra) {
  if (extra) {
    nlohmann::json j = s;
    j.update(nlohmann::json(parse_synthetic_spec(*extra)));
    s = j.get<SyntheticSpec>();
  }
  if (f.seed) s.seed = *f.seed;
  s.validate();
  const std::filesystem::path out = f.out.value_or("synthetic");
  const SyntheticDataset data = generate_synthetic(s);
  write_synthetic(data, out);
  std::cout << "wrote " << data.train.size() << " train and " << data.test.size() << " test documents to "
            << out.string() << "\nbayes_accuracy=" << data.bayes_accuracy << " (" << data.bayes_method << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-variable generative text classifiers"};
  app.require_subcommand(1);

  CommonFlags train_f, eval_f, sweep_f, struct_f, em_f, rules_f, params_f, synth_f, gen_f;

  auto* train = app.add_subcommand("train", "train one model and save a checkpoint");
  train_f.attach(train);
  std::optional<std::string> n_per_class;
  train->add_option("--n-per-class", n_per_class, "training examples per class ('all' for the pool)");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_f.attach(eval);
  std::string eval_ckpt, eval_split = "test";
  std::optional<std::string> eval_rule;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--rule", eval_rule, "prediction rule");
  eval->add_option("--split", eval_split, "test | dev");

  auto* sweep = app.add_subcommand("sweep", "data-efficiency sweep with plot");
  sweep_f.attach(sweep);
  auto* structures = app.add_subcommand("structures", "compare the four latent structures");
  struct_f.attach(structures);
  auto* em = app.add_subcommand("em-vs-direct", "compare EM and direct training");
  em_f.attach(em);
  auto* rules = app.add_subcommand("rules", "compare the three latent prediction rules");
  rules_f.attach(rules);

  auto* generate = app.add_subcommand("generate", "sample text from a checkpoint");
  gen_f.attach_basic(generate);
  std::string gen_ckpt, gen_latent = "marginal";
  int gen_label = 0, gen_max_len = 82, gen_count = 5;
  double gen_temp = 0.6;
  generate->add_option("--checkpoint", gen_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  generate->add_option("--label", gen_label, "label index");
  generate->add_option("--latent", gen_latent, "latent value or 'marginal'");
  generate->add_option("--temperature", gen_temp, "sampling temperature");
  generate->add_option("--max-len", gen_max_len, "maximum sequence length including BOS");
  generate->add_option("--count", gen_count, "number of samples");

  auto* params = app.add_subcommand("params", "parameter counts per model");
  params_f.attach(params);
  int params_vocab = 10003, params_labels = 4;
  params->add_option("--vocab-size", params_vocab, "vocabulary size including reserved ids");
  params->add_option("--labels", params_labels, "number of labels");

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset with known generating process");
  synth_f.attach_basic(synth);
  SyntheticSpec sspec;
  std::optional<std::string> synth_extra;
  synth->add_option("--labels", sspec.num_labels, "labels");
  synth->add_option("--latents", sspec.num_latent, "true latent values");
  synth->add_option("--vocab", sspec.vocab_size, "word types");
  synth->add_option("--train", sspec.n_train, "training documents");
  synth->add_option("--test", sspec.n_test, "test documents");
  synth->add_option("--spec", synth_extra, "extra key=value settings, comma separated");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(train_f, n_per_class);
    if (*eval) return cmd_eval(eval_f, eval_ckpt, eval_rule, eval_split);
    if (*sweep) {
      const auto r = run_sweep(sweep_f.build(), std::cout);
      std::cout << "metrics: " << r.csv.string() << "\nplot: " << r.plot.string() << '\n';
      return 0;
    }
    if (*structures) {
      compare_structures(struct_f.build(), std::cout);
      return 0;
    }
    if (*em) {
      compare_em_direct(em_f.build(), std::cout);
      return 0;
    }
    if (*rules) {
      compare_rules(rules_f.build(), std::cout);
      return 0;
    }
    if (*generate) return cmd_generate(gen_ckpt, gen_label, gen_latent, gen_temp, gen_max_len, gen_count,
                                       gen_f.seed.value_or(0));
    if (*params) return cmd_params(params_f, params_vocab, params_labels);
    if (*synth) return cmd_synth(synth_f, sspec, synth_extra);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
