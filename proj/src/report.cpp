#include "pudefect/report.hpp"

#include <cstdio>
#include <sstream>

namespace pudefect {
namespace {

nlohmann::json summary_json(const MetricSummary& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"per_fold", s.per_fold}};
}

std::string fraction_header(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g%%", fraction * 100.0);
  return buf;
}

// Display width in code points; the table contains "±".
std::size_t display_width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s) {
    if ((c & 0xc0) != 0x80) ++w;
  }
  return w;
}

void pad(std::ostringstream& out, const std::string& s, std::size_t width) {
  out << s;
  for (std::size_t w = display_width(s); w < width; ++w) out << ' ';
}

}  // namespace

nlohmann::json to_json(const MetricsReport& report) {
  return {{"accuracy", summary_json(report.accuracy)},
          {"precision", summary_json(report.precision)},
          {"recall", summary_json(report.recall)},
          {"f1", summary_json(report.f1)},
          {"degenerate_folds", report.degenerate_folds}};
}

nlohmann::json to_json(const SweepResult& sweep, const RunConfig& cfg) {
  nlohmann::json weak = nlohmann::json::array();
  for (std::size_t i = 0; i < sweep.fractions.size(); ++i) {
    weak.push_back({{"positive_fraction", sweep.fractions[i]},
                    {"report", to_json(sweep.weak[i])}});
  }
  return {{"config", to_json(cfg)},
          {"supervised", to_json(sweep.supervised)},
          {"weak", weak}};
}

std::string render_table(const SweepResult& sweep) {
  std::vector<std::string> header{"Positive-labeled", "Supervised 100%"};
  for (double f : sweep.fractions) header.push_back("Weak " + fraction_header(f));

  const std::vector<std::pair<std::string, MetricSummary MetricsReport::*>> rows{
      {"Accuracy (%)", &MetricsReport::accuracy},
      {"Precision (%)", &MetricsReport::precision},
      {"Recall (%)", &MetricsReport::recall},
      {"F1-score (%)", &MetricsReport::f1}};

  std::vector<std::vector<std::string>> cells;
  cells.push_back(header);
  for (const auto& [name, member] : rows) {
    std::vector<std::string> line{name, format_cell(sweep.supervised.*member)};
    for (const MetricsReport& r : sweep.weak) line.push_back(format_cell(r.*member));
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      widths[c] = std::max(widths[c], display_width(line[c]));
    }
  }
  std::ostringstream out;
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c + 1 == line.size()) {
        out << line[c];
      } else {
        pad(out, line[c], widths[c] + 2);
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string render_fold_csv(const SweepResult& sweep) {
  std::ostringstream out;
  out << "cell,fold,accuracy,precision,recall,f1,degenerate\n";
  auto emit = [&](const std::string& cell, const MetricsReport& r) {
    for (std::size_t f = 0; f < r.folds(); ++f) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.6f,%.6f,%.6f,%d\n", cell.c_str(), f,
                    r.accuracy.per_fold[f], r.precision.per_fold[f], r.recall.per_fold[f],
                    r.f1.per_fold[f], r.degenerate_folds[f] ? 1 : 0);
      out << buf;
    }
  };
  emit("supervised", sweep.supervised);
  for (std::size_t i = 0; i < sweep.fractions.size(); ++i) {
    emit("weak_" + fraction_header(sweep.fractions[i]), sweep.weak[i]);
  }
  return out.str();
}

}  // namespace pudefect
