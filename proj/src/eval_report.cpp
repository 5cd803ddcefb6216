#include "hsd/eval_report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "hsd/csv.hpp"
#include "hsd/error.hpp"

namespace hsd {

using nlohmann::json;

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::kLengthMismatch, "got " + std::to_string(a) + " predictions for " +
                                                std::to_string(b) + " gold labels");
  }
}

void check_labels(const std::vector<std::size_t>& v, const LabelScheme& scheme) {
  for (auto x : v) {
    if (x >= scheme.num_classes()) {
      throw Error(ErrorCode::kUnknownLabel, "class index " + std::to_string(x) +
                                                " outside scheme " + scheme.name);
    }
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  return out;
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') {
      out += "\\|";
    } else if (c == '\n' || c == '\r') {
      out += ' ';
    } else {
      out += c;
    }
  }
  return out;
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), std::size_t{0});
  return n;
}

json MetricsReport::to_json() const {
  json per = json::array();
  for (const auto& c : per_class) {
    per.push_back({{"label", c.label},
                   {"precision", c.precision},
                   {"recall", c.recall},
                   {"f1", c.f1},
                   {"support", c.support},
                   {"degenerate", c.degenerate}});
  }
  return {{"per_class", per},
          {"weighted",
           {{"precision", weighted.precision}, {"recall", weighted.recall}, {"f1", weighted.f1}}},
          {"accuracy", accuracy}};
}

MetricsReport MetricsReport::from_json(const json& j) {
  MetricsReport r;
  for (const auto& c : j.at("per_class")) {
    r.per_class.push_back({c.at("label").get<std::string>(), c.at("precision").get<double>(),
                           c.at("recall").get<double>(), c.at("f1").get<double>(),
                           c.at("support").get<std::size_t>(), c.value("degenerate", false)});
  }
  const auto& w = j.at("weighted");
  r.weighted = {w.at("precision").get<double>(), w.at("recall").get<double>(),
                w.at("f1").get<double>()};
  r.accuracy = j.at("accuracy").get<double>();
  return r;
}

MetricsReport metrics(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& golds,
                      const LabelScheme& scheme) {
  check_lengths(preds.size(), golds.size());
  if (golds.empty()) throw Error(ErrorCode::kEmptyInput, "no predictions to evaluate");
  check_labels(preds, scheme);
  check_labels(golds, scheme);
  const std::size_t C = scheme.num_classes();
  std::vector<std::size_t> tp(C, 0), predicted(C, 0), support(C, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    ++predicted[preds[i]];
    ++support[golds[i]];
    if (preds[i] == golds[i]) {
      ++tp[golds[i]];
      ++correct;
    }
  }
  MetricsReport r;
  const auto total = static_cast<double>(golds.size());
  for (std::size_t c = 0; c < C; ++c) {
    ClassMetrics m;
    m.label = scheme.classes[c];
    m.support = support[c];
    if (predicted[c] > 0) {
      m.precision = static_cast<double>(tp[c]) / static_cast<double>(predicted[c]);
    } else {
      m.degenerate = true;
    }
    if (support[c] > 0) {
      m.recall = static_cast<double>(tp[c]) / static_cast<double>(support[c]);
    } else {
      m.degenerate = true;
    }
    if (m.precision + m.recall > 0.0) {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    const double w = static_cast<double>(support[c]) / total;
    r.weighted.precision += w * m.precision;
    r.weighted.recall += w * m.recall;
    r.weighted.f1 += w * m.f1;
    r.per_class.push_back(std::move(m));
  }
  r.accuracy = static_cast<double>(correct) / total;
  return r;
}

ConfusionMatrix confusion(const std::vector<std::size_t>& preds,
                          const std::vector<std::size_t>& golds, const LabelScheme& scheme) {
  check_lengths(preds.size(), golds.size());
  check_labels(preds, scheme);
  check_labels(golds, scheme);
  const std::size_t C = scheme.num_classes();
  ConfusionMatrix m;
  m.labels = scheme.classes;
  m.counts.assign(C, std::vector<std::size_t>(C, 0));
  m.row_percent.assign(C, std::vector<double>(C, 0.0));
  for (std::size_t i = 0; i < golds.size(); ++i) ++m.counts[golds[i]][preds[i]];
  for (std::size_t g = 0; g < C; ++g) {
    const auto row_total = std::accumulate(m.counts[g].begin(), m.counts[g].end(), std::size_t{0});
    if (row_total == 0) continue;
    for (std::size_t p = 0; p < C; ++p) {
      m.row_percent[g][p] = 100.0 * static_cast<double>(m.counts[g][p]) /
                            static_cast<double>(row_total);
    }
  }
  return m;
}

std::vector<ErrorCase> error_table(const Corpus& corpus, const std::vector<std::size_t>& preds,
                                   const std::vector<std::vector<double>>& probs,
                                   std::size_t limit) {
  check_lengths(preds.size(), corpus.size());
  check_lengths(probs.size(), corpus.size());
  std::vector<ErrorCase> errors;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& r = corpus.records()[i];
    if (preds[i] == r.label) continue;
    if (probs[i].size() != corpus.scheme().num_classes()) {
      throw Error(ErrorCode::kLengthMismatch, "probability vector of record " + r.id +
                                                  " has the wrong length");
    }
    errors.push_back({r.id, r.raw_text, r.label, preds[i], probs[i]});
  }
  std::stable_sort(errors.begin(), errors.end(), [](const ErrorCase& a, const ErrorCase& b) {
    return a.confidence() > b.confidence();
  });
  if (errors.size() > limit) errors.resize(limit);
  return errors;
}

void render_report(const MetricsReport& report, const ConfusionMatrix& matrix,
                   const std::vector<ErrorCase>& errors, const LabelScheme& scheme,
                   const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + out_dir.string());
  const std::size_t C = matrix.labels.size();

  {
    auto out = open_out(out_dir / "metrics.json");
    out << report.to_json().dump(2) << '\n';
  }
  {
    auto out = open_out(out_dir / "confusion_counts.csv");
    std::vector<std::string> header = {"gold\\predicted"};
    header.insert(header.end(), matrix.labels.begin(), matrix.labels.end());
    csv::write_row(out, header);
    for (std::size_t g = 0; g < C; ++g) {
      std::vector<std::string> row = {matrix.labels[g]};
      for (auto v : matrix.counts[g]) row.push_back(std::to_string(v));
      csv::write_row(out, row);
    }
  }
  {
    auto out = open_out(out_dir / "confusion_percent.csv");
    std::vector<std::string> header = {"gold\\predicted"};
    header.insert(header.end(), matrix.labels.begin(), matrix.labels.end());
    csv::write_row(out, header);
    for (std::size_t g = 0; g < C; ++g) {
      std::vector<std::string> row = {matrix.labels[g]};
      for (auto v : matrix.row_percent[g]) row.push_back(fixed(v, 1));
      csv::write_row(out, row);
    }
  }
  {
    auto out = open_out(out_dir / "errors.csv");
    csv::write_row(out, {"id", "gold", "predicted", "p_predicted", "text"});
    for (const auto& e : errors) {
      csv::write_row(out, {e.id, scheme.classes.at(e.gold), scheme.classes.at(e.predicted),
                           fixed(e.confidence(), 6), e.raw_text});
    }
  }
  {
    auto out = open_out(out_dir / "errors.md");
    out << "# Misclassified samples\n\n";
    if (errors.empty()) {
      out << "There are no misclassifications.\n";
    } else {
      out << "| # | id | gold | predicted | p(predicted) | text |\n";
      out << "|---|----|------|-----------|--------------|------|\n";
      for (std::size_t i = 0; i < errors.size(); ++i) {
        const auto& e = errors[i];
        out << "| " << i + 1 << " | " << md_cell(e.id) << " | " << scheme.classes.at(e.gold)
            << " | " << scheme.classes.at(e.predicted) << " | " << fixed(e.confidence(), 3)
            << " | " << md_cell(e.raw_text) << " |\n";
      }
    }
  }
  {
    // row-percentage heatmap
    constexpr int kCell = 90, kLeft = 110, kTop = 60;
    const int size = static_cast<int>(C) * kCell;
    auto out = open_out(out_dir / "confusion.svg");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kLeft + size + 20
        << "\" height=\"" << kTop + size + 40 << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<text x=\"" << kLeft + size / 2 << "\" y=\"20\" text-anchor=\"middle\">predicted</text>\n";
    out << "<text x=\"12\" y=\"" << kTop + size / 2 << "\" transform=\"rotate(-90 12 "
        << kTop + size / 2 << ")\" text-anchor=\"middle\">gold</text>\n";
    for (std::size_t i = 0; i < C; ++i) {
      const int c = static_cast<int>(i);
      out << "<text x=\"" << kLeft + c * kCell + kCell / 2 << "\" y=\"" << kTop - 8
          << "\" text-anchor=\"middle\">" << xml_escape(matrix.labels[i]) << "</text>\n";
      out << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + c * kCell + kCell / 2
          << "\" text-anchor=\"end\">" << xml_escape(matrix.labels[i]) << "</text>\n";
    }
    for (std::size_t g = 0; g < C; ++g) {
      for (std::size_t p = 0; p < C; ++p) {
        const double pct = matrix.row_percent[g][p];
        const int shade = 255 - static_cast<int>(std::lround(pct * 2.0));
        const int x = kLeft + static_cast<int>(p) * kCell;
        const int y = kTop + static_cast<int>(g) * kCell;
        out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell << "\" height=\""
            << kCell << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" stroke=\"#444\"/>\n";
        out << "<text x=\"" << x + kCell / 2 << "\" y=\"" << y + kCell / 2 - 4
            << "\" text-anchor=\"middle\">" << fixed(pct, 1) << "%</text>\n";
        out << "<text x=\"" << x + kCell / 2 << "\" y=\"" << y + kCell / 2 + 12
            << "\" text-anchor=\"middle\">(" << matrix.counts[g][p] << ")</text>\n";
      }
    }
    out << "</svg>\n";
  }
}

}  // namespace hsd
