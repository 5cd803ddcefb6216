#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsd/corpus.hpp"

namespace hsd {

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  // precision or recall had a zero denominator and was reported as 0
  bool degenerate = false;

  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct WeightedMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const WeightedMetrics&, const WeightedMetrics&) = default;
};

// Weighted aggregates use gold-class support as weights.
struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  WeightedMetrics weighted;
  double accuracy = 0.0;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// Rows are gold classes, columns predicted classes, in scheme order.
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> counts;
  // Each row sums to 100, except rows with no gold examples (all zeros).
  std::vector<std::vector<double>> row_percent;

  std::size_t total() const;
};

struct ErrorCase {
  std::string id;
  std::string raw_text;
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::vector<double> probs;

  double confidence() const { return probs.at(predicted); }
};

// Throws LengthMismatch / EmptyInput.
MetricsReport metrics(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& golds,
                      const LabelScheme& scheme);

ConfusionMatrix confusion(const std::vector<std::size_t>& preds,
                          const std::vector<std::size_t>& golds, const LabelScheme& scheme);

// Misclassified records, most confident mistakes first, at most `limit`.
std::vector<ErrorCase> error_table(const Corpus& corpus, const std::vector<std::size_t>& preds,
                                   const std::vector<std::vector<double>>& probs,
                                   std::size_t limit);

// Writes metrics.json, confusion_counts.csv, confusion_percent.csv,
// errors.csv, errors.md and confusion.svg into `out_dir`.
void render_report(const MetricsReport& report, const ConfusionMatrix& matrix,
                   const std::vector<ErrorCase>& errors, const LabelScheme& scheme,
                   const std::filesystem::path& out_dir);

}  // namespace hsd
