#include "hsd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "hsd/csv.hpp"
#include "hsd/error.hpp"
#include "hsd/rng.hpp"

namespace hsd {

namespace {

std::string lowercase(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

struct Table {
  std::vector<std::string> header;
  std::vector<csv::Row> rows;
};

Table read_table(const std::filesystem::path& path) {
  auto rows = csv::read_file(path);
  if (rows.empty()) throw Error(ErrorCode::kEmptyFile, path.string() + " is empty");
  Table t;
  t.header = std::move(rows.front().fields);
  rows.erase(rows.begin());
  t.rows = std::move(rows);
  for (const auto& row : t.rows) {
    if (row.fields.size() != t.header.size()) {
      throw Error(ErrorCode::kMalformedRow,
                  path.string() + " line " + std::to_string(row.line) + ": expected " +
                      std::to_string(t.header.size()) + " columns, found " +
                      std::to_string(row.fields.size()));
    }
  }
  return t;
}

std::size_t require_column(const Table& t, const std::string& name,
                           const std::filesystem::path& path) {
  auto idx = csv::find_column(t.header, name);
  if (!idx) {
    throw Error(ErrorCode::kMissingColumn,
                path.string() + ": missing column '" + name + "'");
  }
  return *idx;
}

void add_record(std::vector<TweetRecord>& records, std::unordered_set<std::string>& seen,
                TweetRecord record, LoadStats& stats) {
  if (!seen.insert(record.id).second) {
    ++stats.duplicate_ids;
    return;
  }
  records.push_back(std::move(record));
}

}  // namespace

LabelScheme LabelScheme::waseem() { return {"waseem", {"racism", "sexism", "neither"}}; }
LabelScheme LabelScheme::davidson() { return {"davidson", {"hate", "offensive", "neither"}}; }

LabelScheme LabelScheme::by_name(const std::string& name) {
  if (name == "waseem") return waseem();
  if (name == "davidson") return davidson();
  throw Error(ErrorCode::kInvalidConfig, "unknown label scheme '" + name + "'");
}

std::optional<std::size_t> LabelScheme::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == label) return i;
  }
  return std::nullopt;
}

Corpus::Corpus(LabelScheme scheme, std::vector<TweetRecord> records)
    : scheme_(std::move(scheme)), records_(std::move(records)) {
  std::unordered_set<std::string> ids;
  for (const auto& r : records_) {
    if (r.label >= scheme_.num_classes()) {
      throw Error(ErrorCode::kUnknownLabel, "record " + r.id + " has label index " +
                                                std::to_string(r.label) + " outside scheme " +
                                                scheme_.name);
    }
    if (!ids.insert(r.id).second) {
      throw Error(ErrorCode::kMalformedRow, "duplicate record id " + r.id);
    }
  }
}

ColumnConfig ColumnConfig::waseem_defaults() { return {"id", "text", "label", ""}; }
ColumnConfig ColumnConfig::davidson_defaults() { return {"", "tweet", "", "class"}; }

WaseemVariant parse_waseem_variant(const std::string& name) {
  if (name == "hovy16") return WaseemVariant::kHovy16;
  if (name == "waseem16") return WaseemVariant::kWaseem16;
  throw Error(ErrorCode::kInvalidConfig, "unknown waseem variant '" + name + "'");
}

Corpus load_waseem(const std::filesystem::path& path, WaseemVariant variant,
                   const ColumnConfig& columns, LoadStats* stats_out) {
  const Table t = read_table(path);
  const auto scheme = LabelScheme::waseem();
  const auto text_idx = require_column(t, columns.text_col, path);
  const auto label_idx = require_column(t, columns.label_col, path);
  std::optional<std::size_t> id_idx;
  if (!columns.id_col.empty()) id_idx = require_column(t, columns.id_col, path);
  const std::string source = variant == WaseemVariant::kHovy16 ? "hovy16" : "waseem16";

  LoadStats stats;
  std::vector<TweetRecord> records;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    ++stats.rows;
    std::string label = lowercase(trim(row.fields[label_idx]));
    if (label == "none") label = "neither";
    if (label == "both" && variant == WaseemVariant::kWaseem16) {
      ++stats.dropped_both;
      continue;
    }
    auto cls = scheme.index_of(label);
    if (!cls) {
      throw Error(ErrorCode::kUnknownLabel, path.string() + " line " + std::to_string(row.line) +
                                                ": unknown label '" + row.fields[label_idx] + "'");
    }
    TweetRecord r;
    r.id = id_idx ? trim(row.fields[*id_idx]) : std::to_string(i);
    r.raw_text = row.fields[text_idx];
    r.label = *cls;
    r.source = source;
    add_record(records, seen, std::move(r), stats);
  }
  if (stats_out) *stats_out = stats;
  return Corpus(scheme, std::move(records));
}

Corpus load_davidson(const std::filesystem::path& path, const ColumnConfig& columns,
                     LoadStats* stats_out) {
  const Table t = read_table(path);
  const auto scheme = LabelScheme::davidson();
  const auto text_idx = require_column(t, columns.text_col, path);
  const auto code_idx = require_column(t, columns.class_code_col, path);
  std::optional<std::size_t> id_idx;
  if (!columns.id_col.empty()) id_idx = require_column(t, columns.id_col, path);

  LoadStats stats;
  std::vector<TweetRecord> records;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    ++stats.rows;
    const std::string code = trim(row.fields[code_idx]);
    std::size_t cls;
    if (code == "0") {
      cls = 0;
    } else if (code == "1") {
      cls = 1;
    } else if (code == "2") {
      cls = 2;
    } else {
      throw Error(ErrorCode::kUnknownLabel, path.string() + " line " + std::to_string(row.line) +
                                                ": unknown class code '" + code + "'");
    }
    TweetRecord r;
    r.id = id_idx ? trim(row.fields[*id_idx]) : std::to_string(i);
    r.raw_text = row.fields[text_idx];
    r.label = cls;
    r.source = "davidson";
    add_record(records, seen, std::move(r), stats);
  }
  if (stats_out) *stats_out = stats;
  return Corpus(scheme, std::move(records));
}

Corpus merge_corpora(const Corpus& first, const Corpus& second, MergeStats* stats_out) {
  if (!(first.scheme() == second.scheme())) {
    throw Error(ErrorCode::kSchemeMismatch, "cannot merge scheme " + first.scheme().name +
                                                " with " + second.scheme().name);
  }
  MergeStats stats;
  std::unordered_map<std::string, std::size_t> label_by_id;
  std::vector<TweetRecord> records = first.records();
  for (const auto& r : records) label_by_id.emplace(r.id, r.label);
  for (const auto& r : second.records()) {
    auto it = label_by_id.find(r.id);
    if (it != label_by_id.end()) {
      ++stats.duplicates;
      if (it->second != r.label) {
        ++stats.label_conflicts;
        stats.conflicting_ids.push_back(r.id);
      }
      continue;
    }
    label_by_id.emplace(r.id, r.label);
    records.push_back(r);
  }
  if (stats_out) *stats_out = std::move(stats);
  return Corpus(first.scheme(), std::move(records));
}

void SplitSpec::validate() const {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw Error(ErrorCode::kInvalidConfig, "split ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidConfig, "split ratios must sum to 1");
  }
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec) {
  // the epsilon absorbs representation error such as 0.1 * 30 = 3.0000000000000004
  // or 0.7 * 10 = 6.999999999999999
  auto portion = [n](double ratio) {
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  };
  const std::size_t validation = portion(spec.ratios[1]);
  const std::size_t test = portion(spec.ratios[2]);
  return {n - validation - test, validation, test};
}

SplitResult stratified_split(const Corpus& corpus, const SplitSpec& spec) {
  spec.validate();
  const auto& scheme = corpus.scheme();
  std::vector<std::vector<const TweetRecord*>> by_class(scheme.num_classes());
  for (const auto& r : corpus.records()) by_class[r.label].push_back(&r);

  std::array<std::vector<TweetRecord>, 3> parts;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (members.size() < 3) {
      throw Error(ErrorCode::kClassTooSmall, "class " + scheme.classes[c] + " has only " +
                                                 std::to_string(members.size()) +
                                                 " records (need at least 3)");
    }
    std::sort(members.begin(), members.end(),
              [](const TweetRecord* a, const TweetRecord* b) { return a->id < b->id; });
    Rng rng(derive_seed(spec.seed, c));
    rng.shuffle(std::span(members));
    const auto sizes = split_sizes(members.size(), spec);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t k = 0; k < sizes[s]; ++k) parts[s].push_back(*members[pos++]);
    }
  }

  for (std::size_t s = 0; s < 3; ++s) {
    auto& part = parts[s];
    std::sort(part.begin(), part.end(),
              [](const TweetRecord& a, const TweetRecord& b) { return a.id < b.id; });
    Rng rng(derive_seed(spec.seed, 1000 + s));
    rng.shuffle(std::span(part));
  }
  return {Corpus(scheme, std::move(parts[0])), Corpus(scheme, std::move(parts[1])),
          Corpus(scheme, std::move(parts[2]))};
}

std::vector<std::size_t> class_counts(const Corpus& corpus) {
  std::vector<std::size_t> counts(corpus.scheme().num_classes(), 0);
  for (const auto& r : corpus.records()) ++counts[r.label];
  return counts;
}

void write_manifest(const std::filesystem::path& path, const Corpus& corpus,
                    const std::string& split) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  csv::write_row(out, {"id", "split", "label"});
  for (const auto& r : corpus.records()) {
    csv::write_row(out, {r.id, split, corpus.scheme().classes[r.label]});
  }
  if (!out) throw Error(ErrorCode::kIoFailure, "short write to " + path.string());
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  const Table t = read_table(path);
  const auto id = require_column(t, "id", path);
  const auto split = require_column(t, "split", path);
  const auto label = require_column(t, "label", path);
  std::vector<ManifestRow> rows;
  rows.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    rows.push_back({row.fields[id], row.fields[split], row.fields[label]});
  }
  return rows;
}

Corpus select_manifest(const Corpus& corpus, const std::vector<ManifestRow>& rows) {
  std::unordered_map<std::string, const TweetRecord*> by_id;
  for (const auto& r : corpus.records()) by_id.emplace(r.id, &r);
  std::vector<TweetRecord> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    if (!corpus.scheme().index_of(row.label)) {
      throw Error(ErrorCode::kSchemeMismatch, "manifest label '" + row.label +
                                                  "' is not a class of scheme " +
                                                  corpus.scheme().name);
    }
    auto it = by_id.find(row.id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kMalformedRow, "manifest id " + row.id + " not found in corpus");
    }
    out.push_back(*it->second);
  }
  return Corpus(corpus.scheme(), std::move(out));
}

}  // namespace hsd
