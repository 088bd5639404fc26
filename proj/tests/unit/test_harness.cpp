#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "latgen/harness.hpp"

using namespace latgen;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("latgen_test_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

using LD = long double;

// Independent re-evaluation of the generating process from the sidecar
// tables: p(words | y, c) with the stop rule spelled out step by step.
struct SidecarProcess {
  nlohmann::json j;
  int V, Y, C, max_len;
  double ls, cs, bs, stop;
  bool label_to_text;

  explicit SidecarProcess(nlohmann::json sidecar) : j(std::move(sidecar)) {
    const auto& s = j.at("spec");
    V = s.at("vocab_size");
    Y = s.at("num_labels");
    C = s.at("num_latent");
    max_len = s.at("max_len");
    ls = s.at("label_scale");
    cs = s.at("latent_scale");
    bs = s.at("bigram_scale");
    stop = s.at("stop_prob");
    label_to_text = s.at("label_to_text");
  }

  LD word_prob(int y, int c, int prev, int w) const {
    std::vector<LD> logit(static_cast<std::size_t>(V));
    const int ctx = prev < 0 ? V : prev;
    LD z = 0;
    for (int v = 0; v < V; ++v) {
      LD s = cs * j["latent_weights"][c][v].get<double>() + bs * j["bigram"][ctx][v].get<double>();
      if (label_to_text) s += ls * j["label_weights"][y][v].get<double>();
      logit[v] = std::exp(s);
      z += logit[v];
    }
    return logit[w] / z;
  }

  LD doc_prob(const std::vector<int>& words, int y, int c) const {
    LD p = 1;
    int prev = -1;
    for (std::size_t t = 0; t < words.size(); ++t) {
      if (t > 0) p *= 1 - stop;
      p *= word_prob(y, c, prev, words[t]);
      prev = words[t];
    }
    if (static_cast<int>(words.size()) < max_len) p *= stop;
    return p;
  }

  LD joint(const std::vector<int>& words, int y) const {
    LD s = 0;
    for (int c = 0; c < C; ++c) s += j["latent_prior"][y][c].get<double>() * doc_prob(words, y, c);
    return s / Y;
  }
};

SyntheticSpec tiny_synthetic() {
  SyntheticSpec s;
  s.num_labels = 3;
  s.num_latent = 2;
  s.vocab_size = 5;
  s.max_len = 4;
  s.n_train = 30;
  s.n_test = 10;
  s.stop_prob = 0.3;
  s.label_scale = 1.5;
  s.latent_scale = 1.0;
  s.seed = 4;
  return s;
}

// Small, fast experiment setup shared by the harness tests.
RunSpec quick_run(const fs::path& out) {
  RunSpec s;
  s.dataset = "synthetic:labels=2,latents=2,vocab=12,train=120,test=20,max_len=6,seed=3";
  s.model.d_word = 4;
  s.model.d_hidden = 4;
  s.model.d_label = 3;
  s.model.d_latent = 2;
  s.model.num_latent = 2;
  s.train.max_epochs = 2;
  s.train.batch_size = 8;
  s.train.lr = 0.01;
  s.grid = {5, 20};
  s.seeds = {0, 1};
  s.dev_size = 30;
  s.out = out;
  return s;
}

}  // namespace

TEST_SUITE("synthetic") {
  TEST_CASE("exact Bayes accuracy matches brute force over the sidecar tables") {
    for (bool dependent : {false, true}) {
      CAPTURE(dependent);
      SyntheticSpec spec = tiny_synthetic();
      spec.latent_depends_on_label = dependent;
      const SyntheticDataset data = generate_synthetic(spec);
      REQUIRE(data.bayes_method == "exact");
      const SidecarProcess p(data.sidecar());

      LD total_mass = 0, bayes = 0;
      std::vector<std::vector<int>> layer = {{}};
      for (int len = 1; len <= spec.max_len; ++len) {
        std::vector<std::vector<int>> next;
        for (const auto& pre : layer)
          for (int w = 0; w < spec.vocab_size; ++w) {
            auto d = pre;
            d.push_back(w);
            LD best = 0;
            for (int y = 0; y < spec.num_labels; ++y) {
              const LD pj = p.joint(d, y);
              total_mass += pj;
              best = std::max(best, pj);
            }
            bayes += best;
            next.push_back(std::move(d));
          }
        layer = std::move(next);
      }
      CHECK(std::abs(static_cast<double>(total_mass) - 1.0) <= 1e-12);
      CHECK(std::abs(data.bayes_accuracy - static_cast<double>(bayes)) <= 1e-9);
      CHECK(data.sidecar().at("bayes_accuracy").get<double>() == data.bayes_accuracy);
    }
  }

  TEST_CASE("Monte Carlo estimate agrees with enumeration") {
    const SyntheticProcess p = make_process(tiny_synthetic());
    const double exact = bayes_accuracy_exact(p);
    CHECK(std::abs(bayes_accuracy_monte_carlo(p, 20000, 1) - exact) <= 0.01);
  }

  TEST_CASE("documents respect the vocabulary and length limits and are reproducible") {
    SyntheticSpec spec = tiny_synthetic();
    spec.n_train = 300;
    const SyntheticDataset a = generate_synthetic(spec), b = generate_synthetic(spec);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 300; ++i) {
      const SyntheticDocument d = sample_document(a.process, rng);
      CHECK(d.words.size() >= 1);
      CHECK(static_cast<int>(d.words.size()) <= spec.max_len);
      for (int w : d.words) CHECK((w >= 0 && w < spec.vocab_size));
      CHECK((d.label >= 0 && d.label < spec.num_labels));
    }
    spec.seed = 5;
    CHECK_FALSE(generate_synthetic(spec).train == a.train);
  }

  TEST_CASE("zero training documents write an empty train file that loads cleanly") {
    SyntheticSpec spec = tiny_synthetic();
    spec.n_train = 0;
    const fs::path dir = scratch("empty");
    write_synthetic(generate_synthetic(spec), dir);
    CHECK(fs::file_size(dir / "train.csv") == 0);
    CHECK(load_csv(dir / "train.csv").empty());
    CHECK(load_csv(dir / "test.csv").size() == 10);
    const auto sidecar = nlohmann::json::parse(slurp(dir / "synthetic.json"));
    CHECK(sidecar.at("spec").at("n_train") == 0);
    fs::remove_all(dir);
  }

  TEST_CASE("spec strings and validation") {
    const SyntheticSpec s = parse_synthetic_spec("labels=2,latents=5,vocab=30,train=7,test=3,stop_prob=0.2,latent_depends_on_label=true");
    CHECK(s.num_labels == 2);
    CHECK(s.num_latent == 5);
    CHECK(s.vocab_size == 30);
    CHECK(s.n_train == 7);
    CHECK(s.n_test == 3);
    CHECK(s.stop_prob == 0.2);
    CHECK(s.latent_depends_on_label);
    CHECK_THROWS_AS(parse_synthetic_spec("colour=3"), DataError);
    CHECK_THROWS_AS(parse_synthetic_spec("labels=0"), DataError);
    CHECK(synthetic_document_count(tiny_synthetic()) == 5 + 25 + 125 + 625);
  }
}

TEST_SUITE("metrics") {
  MetricsRow sample_row() {
    MetricsRow r;
    r.dataset = "data, \"quoted\"";
    r.family = "latent";
    r.structure = "auxiliary";
    r.n_per_class = kAllPerClass;
    r.seed = 12345678901234ull;
    r.method = "em";
    r.rule = "marginalize_prior";
    r.epoch_best = 7;
    r.dev_acc = 0.1 + 0.2;
    r.test_acc = 1.0 / 3.0;
    r.train_nll = 123.456789012345678;
    r.wall_seconds = 1e-7;
    r.param_count = 3191943;
    r.model = "lat";
    return r;
  }

  TEST_CASE("CSV round trip is field for field exact") {
    MetricsRow a = sample_row(), b = sample_row();
    b.note = "diverged: epoch 3\nnon-finite";
    b.test_acc = std::nan("");
    const auto parsed = parse_metrics_csv(format_metrics_csv({a, b}));
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0] == a);
    CHECK(std::isnan(parsed[1].test_acc));
    MetricsRow c = parsed[1];  // NaN never compares equal; compare the rest
    c.test_acc = b.test_acc = 0;
    CHECK(c == b);
    CHECK(metrics_header().size() == 15);
  }

  TEST_CASE("append writes the header once") {
    const fs::path dir = scratch("append");
    fs::create_directories(dir);
    append_metrics_csv(dir / "m.csv", {sample_row()});
    append_metrics_csv(dir / "m.csv", {sample_row(), sample_row()});
    CHECK(read_metrics_csv(dir / "m.csv").size() == 3);
    const std::string text = slurp(dir / "m.csv");
    CHECK(text.find("dataset,family") == 0);
    CHECK(text.find("dataset,family", 1) == std::string::npos);
    fs::remove_all(dir);
  }

  TEST_CASE("svg has one polyline per series and a legend entry for each") {
    std::vector<PlotSeries> s = {{"gen", {{20, 0.5}, {5, 0.3}, {100, 0.7}}}, {"lat <pc>", {{5, 0.35}, {20, 0.6}}}};
    const std::string svg = render_svg_plot(s, "t", "x", "y", true);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.rfind("</svg>") != std::string::npos);
    std::size_t lines = 0;
    for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++lines;
    CHECK(lines == 2);
    CHECK(svg.find(">gen<") != std::string::npos);
    CHECK(svg.find("lat &lt;pc&gt;") != std::string::npos);
    CHECK(svg.find("nan") == std::string::npos);
  }

  TEST_CASE("accuracy series average seeds and skip failed rows only") {
    MetricsRow a = sample_row();
    a.n_per_class = 5;
    a.seed = 0;
    a.test_acc = 0.4;
    MetricsRow b = a;
    b.seed = 1;
    b.test_acc = 0.6;
    b.note = "diverged: non-finite gradient";
    MetricsRow c = a;
    c.seed = 2;
    c.note = "error: boom";
    c.test_acc = std::nan("");
    const auto series = accuracy_series({a, b, c}, false);
    REQUIRE(series.size() == 1);
    REQUIRE(series[0].points.size() == 1);
    CHECK(series[0].points[0].first == 5);
    CHECK(series[0].points[0].second == doctest::Approx(0.5));
  }
}

TEST_SUITE("harness") {
  TEST_CASE("run spec validation") {
    RunSpec s;
    CHECK_NOTHROW(s.validate());
    s.grid = {5, 5};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.grid = {20, 5};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.grid = {5, kAllPerClass};
    CHECK_NOTHROW(s.validate());
    s.seeds.clear();
    CHECK_THROWS_AS(s.validate(), ConfigError);
  }

  TEST_CASE("run spec json round trip and partial override") {
    RunSpec s = quick_run("somewhere");
    s.rules = {PredictionRule::MaxLatent, PredictionRule::MarginalizePosterior};
    s.models = {{"lat_pc", {{"family", "latent"}, {"d_label", 100}}}};
    nlohmann::json j = s;
    RunSpec back;
    merge_json(j, back);
    CHECK(nlohmann::json(back) == j);

    RunSpec partial;
    merge_json(nlohmann::json{{"seeds", {7}}, {"train", {{"lr", 0.5}}}}, partial);
    CHECK(partial.seeds == std::vector<std::uint64_t>{7});
    CHECK(partial.train.lr == 0.5);
    CHECK(partial.train.batch_size == RunSpec{}.train.batch_size);
    CHECK(partial.grid == RunSpec{}.grid);
    CHECK_THROWS_AS(merge_json(nlohmann::json{{"gird", {5}}}, partial), ConfigError);
  }

  TEST_CASE("variants reject unknown fields") {
    CHECK_THROWS_AS(apply_variant(ModelConfig{}, {"bad", {{"d_lable", 3}}}), ConfigError);
    CHECK(apply_variant(ModelConfig{}, {"pc", {{"family", "latent"}, {"num_latent", 10}}}).num_latent == 10);
  }

  TEST_CASE("directory datasets load with and without a test split") {
    const fs::path dir = scratch("dir_dataset");
    SyntheticSpec spec = tiny_synthetic();
    write_synthetic(generate_synthetic(spec), dir);
    Dataset d = load_dataset(dir.string());
    CHECK(d.pool.size() == 30);
    CHECK(d.test.size() == 10);
    CHECK(d.num_labels == 3);
    CHECK(d.bayes_accuracy() > 1.0 / 3);
    fs::remove(dir / "test.csv");
    fs::remove(dir / "synthetic.json");
    d = load_dataset(dir.string());
    CHECK(d.test.empty());
    CHECK(std::isnan(d.bayes_accuracy()));
    CHECK_THROWS(load_dataset((dir / "missing").string()));
    fs::remove_all(dir);
  }

  TEST_CASE("two sizes, two families, two seeds give eight rows with exact parameter counts") {
    RunSpec s = quick_run(scratch("sweep8"));
    s.models = {{"disc", {{"family", "discriminative"}}}, {"gen", {{"family", "generative"}}}};
    const Dataset data = load_dataset(s.dataset);
    const auto legs = sweep_legs(s, s.models, data.name);
    std::vector<std::int64_t> expected(legs.size());
    const auto rows = run_legs(data, legs, s, "metrics.csv", [&](std::size_t i, LegResult& r) {
      expected[i] = count_params(r.model->config);
    });
    REQUIRE(rows.size() == 8);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].note.empty());
      CHECK(rows[i].param_count == expected[i]);
      CHECK((rows[i].dev_acc >= 0 && rows[i].dev_acc <= 1));
      CHECK((rows[i].test_acc >= 0 && rows[i].test_acc <= 1));
    }
    CHECK(read_metrics_csv(s.out / "metrics.csv").size() == 8);
    fs::remove_all(s.out);
  }

  TEST_CASE("sweep writes metrics and plot, reruns reproduce, resumes skip completed legs") {
    RunSpec s = quick_run(scratch("sweep_a"));
    s.models = {{"gen", {{"family", "generative"}}}, {"lat", {{"family", "latent"}}}};
    std::ostringstream report;
    const SweepOutcome a = run_sweep(s, report);
    CHECK(fs::exists(a.plot));
    CHECK(slurp(a.plot).find("<polyline") != std::string::npos);
    REQUIRE(a.rows.size() == 8);

    RunSpec s2 = s;
    s2.out = scratch("sweep_b");
    const SweepOutcome b = run_sweep(s2, report);
    REQUIRE(b.rows.size() == a.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      CHECK(a.rows[i].dev_acc == b.rows[i].dev_acc);
      CHECK(a.rows[i].train_nll == b.rows[i].train_nll);
    }

    // Second run in the same directory: nothing is retrained or re-appended.
    const SweepOutcome c = run_sweep(s, report);
    CHECK(read_metrics_csv(a.csv).size() == 8);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      CHECK(c.rows[i].dev_acc == a.rows[i].dev_acc);
      CHECK(c.rows[i].wall_seconds == a.rows[i].wall_seconds);
    }
    // Widening the grid only runs the new legs.
    s.grid = {5, 20, 30};
    const SweepOutcome d = run_sweep(s, report);
    CHECK(d.rows.size() == 12);
    CHECK(read_metrics_csv(a.csv).size() == 12);
    fs::remove_all(s.out);
    fs::remove_all(s2.out);
  }

  TEST_CASE("leg hash changes with any field") {
    RunSpec s = quick_run("x");
    const auto legs = sweep_legs(s, default_variants(), "d");
    std::set<std::string> hashes;
    for (const auto& l : legs) hashes.insert(l.hash());
    CHECK(hashes.size() == legs.size());
    LegSpec l = legs.front();
    const std::string h = l.hash();
    CHECK(l.hash() == h);
    l.train.lr *= 2;
    CHECK(l.hash() != h);
  }

  TEST_CASE("a failing leg becomes an error row and the rest still run") {
    RunSpec s = quick_run(scratch("failing"));
    s.grid = {5, 1000};
    s.seeds = {0};
    s.models = {{"gen", {{"family", "generative"}}}};
    std::ostringstream report;
    const auto out = run_sweep(s, report);
    REQUIRE(out.rows.size() == 2);
    CHECK(out.rows[0].note.empty());
    CHECK(out.rows[1].note.rfind("error:", 0) == 0);
    CHECK(std::isnan(out.rows[1].dev_acc));
    fs::remove_all(s.out);
  }

  TEST_CASE("structure comparison emits four rows per size and seed") {
    RunSpec s = quick_run(scratch("structures"));
    std::ostringstream report;
    const auto rows = compare_structures(s, report);
    CHECK(rows.size() == 4 * s.grid.size() * s.seeds.size());
    std::map<std::pair<int, std::uint64_t>, std::set<std::string>> cells;
    for (const auto& r : rows) cells[{r.n_per_class, r.seed}].insert(r.structure);
    for (const auto& [k, v] : cells) CHECK(v.size() == 4);
    CHECK(report.str().find("hierarchical-middle") != std::string::npos);
    fs::remove_all(s.out);
  }

  TEST_CASE("one latent value: EM and direct rows match and the rules always agree") {
    RunSpec s = quick_run(scratch("degenerate"));
    s.model.family = Family::Latent;
    s.model.num_latent = 1;
    std::ostringstream report;
    const auto rows = compare_em_direct(s, report);
    std::map<std::pair<int, std::uint64_t>, std::vector<const MetricsRow*>> paired;
    for (const auto& r : rows) paired[{r.n_per_class, r.seed}].push_back(&r);
    CHECK(paired.size() == 4);
    for (const auto& [k, v] : paired) {
      REQUIRE(v.size() == 2);
      CHECK(v[0]->method != v[1]->method);
      CHECK(v[0]->dev_acc == v[1]->dev_acc);
      CHECK(v[0]->epoch_best == v[1]->epoch_best);
      CHECK(v[0]->train_nll == doctest::Approx(v[1]->train_nll).epsilon(1e-12));
    }
    const auto agreements = compare_rules(s, report);
    CHECK(agreements.size() == 3 * 4);
    for (const auto& g : agreements) CHECK(g.agreement == 1.0);
    fs::remove_all(s.out);
  }
}
