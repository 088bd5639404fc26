#include "latgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace latgen {
namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> metrics_header() {
  return {"dataset", "family",    "structure", "n_per_class", "seed",         "method",      "rule", "epoch_best",
          "dev_acc", "test_acc", "train_nll", "wall_seconds", "param_count", "model",       "note"};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_record(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else if (ch != '\r') {
      fields.back() += ch;
    }
  }
  if (quoted) throw std::invalid_argument("unterminated quote in CSV record");
  return fields;
}

std::string format_metrics_row(const MetricsRow& r) {
  const std::vector<std::string> f = {r.dataset,
                                      r.family,
                                      r.structure,
                                      std::to_string(r.n_per_class),
                                      std::to_string(r.seed),
                                      r.method,
                                      r.rule,
                                      std::to_string(r.epoch_best),
                                      fmt_double(r.dev_acc),
                                      fmt_double(r.test_acc),
                                      fmt_double(r.train_nll),
                                      fmt_double(r.wall_seconds),
                                      std::to_string(r.param_count),
                                      r.model,
                                      r.note};
  std::string line;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i) line += ',';
    line += csv_field(f[i]);
  }
  return line;
}

std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out;
  const auto h = metrics_header();
  for (std::size_t i = 0; i < h.size(); ++i) out += (i ? "," : "") + h[i];
  out += '\n';
  for (const auto& r : rows) out += format_metrics_row(r) + '\n';
  return out;
}

std::vector<MetricsRow> parse_metrics_csv(std::string_view content) {
  std::vector<MetricsRow> rows;
  std::istringstream in{std::string(content)};
  std::string line;
  bool header = true;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    // A quoted field may contain newlines: keep reading until the quotes balance.
    std::string more;
    while (std::count(line.begin(), line.end(), '"') % 2 == 1 && std::getline(in, more)) {
      ++line_no;
      line += '\n' + more;
    }
    const auto f = split_csv_record(line);
    if (header) {
      if (f != metrics_header()) throw std::invalid_argument("metrics CSV: unexpected header");
      header = false;
      continue;
    }
    if (f.size() != metrics_header().size())
      throw std::invalid_argument("metrics CSV line " + std::to_string(line_no) + ": wrong field count");
    MetricsRow r;
    try {
      r.dataset = f[0];
      r.family = f[1];
      r.structure = f[2];
      r.n_per_class = std::stoi(f[3]);
      r.seed = std::stoull(f[4]);
      r.method = f[5];
      r.rule = f[6];
      r.epoch_best = std::stoi(f[7]);
      r.dev_acc = parse_double(f[8]);
      r.test_acc = parse_double(f[9]);
      r.train_nll = parse_double(f[10]);
      r.wall_seconds = parse_double(f[11]);
      r.param_count = std::stoll(f[12]);
      r.model = f[13];
      r.note = f[14];
    } catch (const std::exception& e) {
      throw std::invalid_argument("metrics CSV line " + std::to_string(line_no) + ": " + e.what());
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_metrics_csv(ss.str());
}

void append_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (fresh) {
    const std::string all = format_metrics_csv({});
    out << all;
  }
  for (const auto& r : rows) out << format_metrics_row(r) << '\n';
}

std::string render_svg_plot(const std::vector<PlotSeries>& series, const std::string& title, const std::string& x_label,
                            const std::string& y_label, bool log_x) {
  const double W = 720, H = 440, left = 70, right = 190, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  auto tx = [&](double x) { return log_x ? std::log10(x) : x; };

  double x0 = INFINITY, x1 = -INFINITY, y0 = 0.0, y1 = 1.0;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      x0 = std::min(x0, tx(x));
      x1 = std::max(x1, tx(x));
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  auto px = [&](double x) { return left + (tx(x) - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title) << "</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = y0 + (y1 - y0) * i / 5.0;
    o << "<line x1=\"" << left - 4 << "\" y1=\"" << py(y) << "\" x2=\"" << left << "\" y2=\"" << py(y) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << left - 8 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << std::round(y * 1000) / 1000 << "</text>\n";
  }
  std::vector<double> xticks;
  for (const auto& s : series)
    for (auto [x, y] : s.points) xticks.push_back(x);
  std::sort(xticks.begin(), xticks.end());
  xticks.erase(std::unique(xticks.begin(), xticks.end()), xticks.end());
  for (double x : xticks) {
    o << "<line x1=\"" << px(x) << "\" y1=\"" << top + ph << "\" x2=\"" << px(x) << "\" y2=\"" << top + ph + 4 << "\" stroke=\"black\"/>";
    o << "<text x=\"" << px(x) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << x << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(y_label) << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = colors[i % (sizeof colors / sizeof *colors)];
    auto pts = series[i].points;
    std::sort(pts.begin(), pts.end());
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (auto [x, y] : pts) o << px(x) << ',' << py(y) << ' ';
    o << "\"/>\n";
    for (auto [x, y] : pts) o << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = top + 10 + 20.0 * static_cast<double>(i);
    o << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 40 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
    o << "<text x=\"" << left + pw + 46 << "\" y=\"" << ly + 4 << "\">" << xml_escape(series[i].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_svg_plot(const std::filesystem::path& path, const std::vector<PlotSeries>& series, const std::string& title,
                    const std::string& x_label, const std::string& y_label, bool log_x) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << render_svg_plot(series, title, x_label, y_label, log_x);
}

std::vector<PlotSeries> accuracy_series(const std::vector<MetricsRow>& rows, bool use_dev) {
  std::map<std::string, std::map<int, std::pair<double, int>>> acc;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (r.note.rfind("error", 0) == 0 || r.n_per_class <= 0 || !std::isfinite(use_dev ? r.dev_acc : r.test_acc)) continue;
    const std::string name = r.model.empty() ? r.family : r.model;
    const std::string key = name + " (" + r.rule + ")";
    if (!acc.count(key)) order.push_back(key);
    auto& cell = acc[key][r.n_per_class];
    cell.first += use_dev ? r.dev_acc : r.test_acc;
    cell.second += 1;
  }
  std::vector<PlotSeries> out;
  for (const auto& key : order) {
    PlotSeries s{key, {}};
    for (const auto& [n, cell] : acc[key]) s.points.emplace_back(n, cell.first / cell.second);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace latgen
