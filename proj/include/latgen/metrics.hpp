#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace latgen {

/// One result line of an experiment. The trailing `model` and `note` columns
/// name the model variant and carry an error message for failed legs.
struct MetricsRow {
  std::string dataset;
  std::string family;
  std::string structure;
  int n_per_class = 0;  // -1 means the whole pool
  std::uint64_t seed = 0;
  std::string method;
  std::string rule;
  int epoch_best = 0;
  double dev_acc = 0.0;
  double test_acc = 0.0;
  double train_nll = 0.0;
  double wall_seconds = 0.0;
  std::int64_t param_count = 0;
  std::string model;
  std::string note;

  bool operator==(const MetricsRow&) const = default;
};

std::vector<std::string> metrics_header();
std::string format_metrics_row(const MetricsRow& row);
std::string format_metrics_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_metrics_csv(std::string_view content);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);
/// Appends rows, writing the header first when the file is new or empty.
void append_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

/// Splits one CSV record (RFC 4180 quoting) into fields.
std::vector<std::string> split_csv_record(std::string_view line);
std::string csv_field(const std::string& s);

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;  // sorted by x on output
};

/// Standalone SVG line chart: axes with ticks, one polyline and marker set per
/// series, and a legend. log_x uses a base-10 x axis.
std::string render_svg_plot(const std::vector<PlotSeries>& series, const std::string& title, const std::string& x_label,
                            const std::string& y_label, bool log_x);
void write_svg_plot(const std::filesystem::path& path, const std::vector<PlotSeries>& series, const std::string& title,
                    const std::string& x_label, const std::string& y_label, bool log_x);

/// Mean accuracy per (model, n_per_class) over seeds, one series per model;
/// failed rows are skipped. Uses test accuracy, or dev accuracy when `use_dev`.
std::vector<PlotSeries> accuracy_series(const std::vector<MetricsRow>& rows, bool use_dev);

}  // namespace latgen
