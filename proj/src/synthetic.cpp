#include "latgen/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace latgen {

void SyntheticSpec::validate() const {
  if (num_labels < 1 || num_latent < 1 || vocab_size < 1) throw DataError("synthetic: counts must be >= 1");
  if (n_train < 0 || n_test < 0) throw DataError("synthetic: sizes must be non-negative");
  if (!(stop_prob > 0.0 && stop_prob < 1.0)) throw DataError("synthetic: stop_prob must be in (0, 1)");
  if (max_len < 1) throw DataError("synthetic: max_len must be >= 1");
  if (bayes_samples < 1) throw DataError("synthetic: bayes_samples must be >= 1");
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  j = {{"num_labels", s.num_labels},       {"num_latent", s.num_latent},
       {"vocab_size", s.vocab_size},       {"n_train", s.n_train},
       {"n_test", s.n_test},               {"seed", s.seed},
       {"label_scale", s.label_scale},     {"latent_scale", s.latent_scale},
       {"bigram_scale", s.bigram_scale},   {"stop_prob", s.stop_prob},
       {"max_len", s.max_len},             {"label_to_text", s.label_to_text},
       {"latent_depends_on_label", s.latent_depends_on_label}, {"bayes_samples", s.bayes_samples}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
  SyntheticSpec d;
  s.num_labels = j.value("num_labels", d.num_labels);
  s.num_latent = j.value("num_latent", d.num_latent);
  s.vocab_size = j.value("vocab_size", d.vocab_size);
  s.n_train = j.value("n_train", d.n_train);
  s.n_test = j.value("n_test", d.n_test);
  s.seed = j.value("seed", d.seed);
  s.label_scale = j.value("label_scale", d.label_scale);
  s.latent_scale = j.value("latent_scale", d.latent_scale);
  s.bigram_scale = j.value("bigram_scale", d.bigram_scale);
  s.stop_prob = j.value("stop_prob", d.stop_prob);
  s.max_len = j.value("max_len", d.max_len);
  s.label_to_text = j.value("label_to_text", d.label_to_text);
  s.latent_depends_on_label = j.value("latent_depends_on_label", d.latent_depends_on_label);
  s.bayes_samples = j.value("bayes_samples", d.bayes_samples);
}

SyntheticSpec parse_synthetic_spec(std::string_view text) {
  nlohmann::json j = nlohmann::json(SyntheticSpec{});
  std::stringstream ss{std::string(text)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw DataError("synthetic spec: expected key=value, got '" + item + "'");
    std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    if (key == "labels") key = "num_labels";
    if (key == "latents") key = "num_latent";
    if (key == "vocab") key = "vocab_size";
    if (key == "train") key = "n_train";
    if (key == "test") key = "n_test";
    if (!j.contains(key)) throw DataError("synthetic spec: unknown key '" + key + "'");
    try {
      if (j[key].is_boolean()) j[key] = value == "1" || value == "true";
      else if (j[key].is_number_float()) j[key] = std::stod(value);
      else j[key] = std::stoll(value);
    } catch (const std::exception&) {
      throw DataError("synthetic spec: bad value for '" + key + "'");
    }
  }
  SyntheticSpec s = j.get<SyntheticSpec>();
  s.validate();
  return s;
}

SyntheticProcess make_process(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](Index r, Index c) {
    Tensor t(r, c);
    for (Index i = 0; i < t.size(); ++i) t.data()[i] = normal(rng);
    return t;
  };
  const Index Y = spec.num_labels, C = spec.num_latent, V = spec.vocab_size;
  SyntheticProcess p;
  p.spec = spec;
  p.label_weights = gaussian(Y, V);
  p.latent_weights = gaussian(C, V);
  p.bigram = gaussian(V + 1, V);
  // Fixed non-uniform prior: p(c) proportional to c + 1.
  p.latent_prior = Tensor(Y, C);
  for (Index y = 0; y < Y; ++y) {
    for (Index c = 0; c < C; ++c) {
      const Index k = spec.latent_depends_on_label ? (c + y) % C : c;
      p.latent_prior(y, c) = static_cast<double>(k + 1);
    }
    p.latent_prior.row(y) /= p.latent_prior.row(y).sum();
  }
  return p;
}

RowVector SyntheticProcess::next_log_probs(int y, int c, int prev, int position) const {
  const Index V = spec.vocab_size;
  const Index context = prev < 0 ? V : prev;
  RowVector logits = spec.latent_scale * latent_weights.row(c) + spec.bigram_scale * bigram.row(context);
  if (spec.label_to_text) logits += spec.label_scale * label_weights.row(y);
  RowVector out(V + 1);
  if (position >= spec.max_len) {
    out.setConstant(-std::numeric_limits<double>::infinity());
    out(V) = 0.0;
    return out;
  }
  const double z = log_sum_exp(logits);
  const double keep = position == 0 ? 0.0 : std::log1p(-spec.stop_prob);
  for (Index w = 0; w < V; ++w) out(w) = logits(w) - z + keep;
  out(V) = position == 0 ? -std::numeric_limits<double>::infinity() : std::log(spec.stop_prob);
  return out;
}

double SyntheticProcess::log_prob(std::span<const int> words, int y, int c) const {
  double lp = 0.0;
  int prev = -1;
  for (std::size_t t = 0; t < words.size(); ++t) {
    lp += next_log_probs(y, c, prev, static_cast<int>(t))(words[t]);
    prev = words[t];
  }
  return lp + next_log_probs(y, c, prev, static_cast<int>(words.size()))(spec.vocab_size);
}

double SyntheticProcess::log_joint_label(std::span<const int> words, int y) const {
  RowVector terms(spec.num_latent);
  for (int c = 0; c < spec.num_latent; ++c)
    terms(c) = std::log(latent_prior(y, c)) + log_prob(words, y, c);
  return -std::log(static_cast<double>(spec.num_labels)) + log_sum_exp(terms);
}

SyntheticDocument sample_document(const SyntheticProcess& p, std::mt19937_64& rng) {
  SyntheticDocument d;
  d.label = std::uniform_int_distribution<int>(0, p.spec.num_labels - 1)(rng);
  const RowVector prior = p.latent_prior.row(d.label);
  d.latent = std::discrete_distribution<int>(prior.data(), prior.data() + prior.size())(rng);
  int prev = -1;
  for (int t = 0;; ++t) {
    const RowVector probs = p.next_log_probs(d.label, d.latent, prev, t).array().exp();
    const int w = std::discrete_distribution<int>(probs.data(), probs.data() + probs.size())(rng);
    if (w == p.spec.vocab_size) break;
    d.words.push_back(w);
    prev = w;
  }
  return d;
}

LabeledText to_labeled_text(const SyntheticDocument& d) {
  LabeledText t{d.label, ""};
  for (int w : d.words) {
    if (!t.text.empty()) t.text += ' ';
    t.text += SyntheticProcess::word(w);
  }
  return t;
}

double synthetic_document_count(const SyntheticSpec& spec) {
  double total = 0.0, layer = 1.0;
  for (int n = 1; n <= spec.max_len; ++n) {
    layer *= spec.vocab_size;
    total += layer;
  }
  return total;
}

double bayes_accuracy_exact(const SyntheticProcess& p, double max_documents) {
  const SyntheticSpec& s = p.spec;
  if (synthetic_document_count(s) > max_documents) throw DataError("synthetic: too many documents to enumerate");
  const int Y = s.num_labels, C = s.num_latent;
  // Depth-first over prefixes, carrying log p(prefix, y, c) for every (y, c).
  double total = 0.0;
  std::function<void(int, int, const Tensor&)> visit = [&](int position, int prev, const Tensor& prefix) {
    Tensor next_prefix(Y, C);
    std::vector<RowVector> steps(static_cast<std::size_t>(Y * C));
    for (int y = 0; y < Y; ++y)
      for (int c = 0; c < C; ++c) steps[static_cast<std::size_t>(y * C + c)] = p.next_log_probs(y, c, prev, position);
    if (position > 0) {
      double best = -std::numeric_limits<double>::infinity();
      for (int y = 0; y < Y; ++y) {
        RowVector terms(C);
        for (int c = 0; c < C; ++c) terms(c) = prefix(y, c) + steps[static_cast<std::size_t>(y * C + c)](s.vocab_size);
        best = std::max(best, log_sum_exp(terms));
      }
      total += std::exp(best);
    }
    if (position >= s.max_len) return;
    for (int w = 0; w < s.vocab_size; ++w) {
      for (int y = 0; y < Y; ++y)
        for (int c = 0; c < C; ++c) next_prefix(y, c) = prefix(y, c) + steps[static_cast<std::size_t>(y * C + c)](w);
      visit(position + 1, w, next_prefix);
    }
  };
  Tensor start(Y, C);
  for (int y = 0; y < Y; ++y)
    for (int c = 0; c < C; ++c) start(y, c) = -std::log(static_cast<double>(Y)) + std::log(p.latent_prior(y, c));
  visit(0, -1, start);
  return total;
}

double bayes_accuracy_monte_carlo(const SyntheticProcess& p, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double total = 0.0;
  RowVector joint(p.spec.num_labels);
  for (int i = 0; i < samples; ++i) {
    const SyntheticDocument d = sample_document(p, rng);
    for (int y = 0; y < p.spec.num_labels; ++y) joint(y) = p.log_joint_label(d.words, y);
    total += std::exp(joint.maxCoeff() - log_sum_exp(joint));
  }
  return total / samples;
}

nlohmann::json SyntheticDataset::sidecar() const {
  auto rows = [](const Tensor& t) {
    nlohmann::json out = nlohmann::json::array();
    for (Index r = 0; r < t.rows(); ++r) out.push_back(std::vector<double>(t.row(r).begin(), t.row(r).end()));
    return out;
  };
  return {{"spec", process.spec},
          {"bayes_accuracy", bayes_accuracy},
          {"bayes_method", bayes_method},
          {"chance_accuracy", 1.0 / process.spec.num_labels},
          {"label_weights", rows(process.label_weights)},
          {"latent_weights", rows(process.latent_weights)},
          {"bigram", rows(process.bigram)},
          {"latent_prior", rows(process.latent_prior)}};
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  SyntheticDataset data;
  data.process = make_process(spec);
  // Separate streams so the document draws do not depend on the table sizes.
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32), 1u};
  std::mt19937_64 rng(seq);
  for (int i = 0; i < spec.n_train; ++i) data.train.push_back(to_labeled_text(sample_document(data.process, rng)));
  for (int i = 0; i < spec.n_test; ++i) data.test.push_back(to_labeled_text(sample_document(data.process, rng)));
  if (synthetic_document_count(spec) <= 2e6) {
    data.bayes_accuracy = bayes_accuracy_exact(data.process);
    data.bayes_method = "exact";
  } else {
    data.bayes_accuracy = bayes_accuracy_monte_carlo(data.process, spec.bayes_samples, spec.seed ^ 0x9e3779b97f4a7c15ULL);
    data.bayes_method = "monte_carlo";
  }
  return data;
}

void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_csv(dir / "train.csv", data.train);
  write_csv(dir / "test.csv", data.test);
  std::ofstream out(dir / "synthetic.json");
  if (!out) throw DataError("cannot write " + (dir / "synthetic.json").string());
  out << data.sidecar().dump(1) << '\n';
}

}  // namespace latgen
