#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hsd {

struct LabelScheme {
  std::string name;
  std::vector<std::string> classes;  // order fixes confusion-matrix axes

  static LabelScheme waseem();    // racism, sexism, neither
  static LabelScheme davidson();  // hate, offensive, neither
  static LabelScheme by_name(const std::string& name);

  std::size_t num_classes() const { return classes.size(); }
  std::optional<std::size_t> index_of(const std::string& label) const;

  friend bool operator==(const LabelScheme&, const LabelScheme&) = default;
};

struct TweetRecord {
  std::string id;
  std::string raw_text;
  std::string normalized_text;
  std::size_t label = 0;
  std::string source;
};

// Records under one scheme with unique ids.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(LabelScheme scheme) : scheme_(std::move(scheme)) {}
  // Throws UnknownLabel / MalformedRow when labels or ids break the invariants.
  Corpus(LabelScheme scheme, std::vector<TweetRecord> records);

  const LabelScheme& scheme() const { return scheme_; }
  const std::vector<TweetRecord>& records() const { return records_; }
  std::vector<TweetRecord>& mutable_records() { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

 private:
  LabelScheme scheme_;
  std::vector<TweetRecord> records_;
};

// Column names for CSV ingestion. An empty id column means ids are
// synthesized from the 0-based data-row index.
struct ColumnConfig {
  std::string id_col;
  std::string text_col;
  std::string label_col;
  std::string class_code_col;

  static ColumnConfig waseem_defaults();    // id, text, label
  static ColumnConfig davidson_defaults();  // (none), tweet, class
};

enum class WaseemVariant { kHovy16, kWaseem16 };
WaseemVariant parse_waseem_variant(const std::string& name);

struct LoadStats {
  std::size_t rows = 0;
  std::size_t dropped_both = 0;
  std::size_t duplicate_ids = 0;
};

// Labels are case-insensitive; "none" is read as neither. Rows labelled
// "both" are dropped for the waseem16 variant.
Corpus load_waseem(const std::filesystem::path& path, WaseemVariant variant,
                   const ColumnConfig& columns = ColumnConfig::waseem_defaults(),
                   LoadStats* stats = nullptr);

// Class codes 0 -> hate, 1 -> offensive, 2 -> neither.
Corpus load_davidson(const std::filesystem::path& path,
                     const ColumnConfig& columns = ColumnConfig::davidson_defaults(),
                     LoadStats* stats = nullptr);

struct MergeStats {
  std::size_t duplicates = 0;
  std::size_t label_conflicts = 0;
  std::vector<std::string> conflicting_ids;
};

// Union by id; on a duplicate id the record from `first` wins.
Corpus merge_corpora(const Corpus& first, const Corpus& second, MergeStats* stats = nullptr);

struct SplitSpec {
  std::array<double, 3> ratios = {0.8, 0.1, 0.1};  // train, validation, test
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitResult {
  Corpus train;
  Corpus validation;
  Corpus test;
};

inline constexpr std::array<const char*, 3> kSplitNames = {"train", "validation", "test"};

// Per class of size n: validation = floor(r_val n), test = floor(r_test n),
// the rest goes to train. Classes with no records are skipped; a present
// class with fewer than 3 records is rejected (ClassTooSmall).
SplitResult stratified_split(const Corpus& corpus, const SplitSpec& spec);

// Per-class sizes (train, validation, test) stratified_split assigns to n records.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec);

std::vector<std::size_t> class_counts(const Corpus& corpus);

// Split manifest CSV: header "id,split,label", label by class name.
struct ManifestRow {
  std::string id;
  std::string split;
  std::string label;
};

void write_manifest(const std::filesystem::path& path, const Corpus& corpus,
                    const std::string& split);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

// Records of `corpus` listed in the manifest, in manifest order. Throws
// SchemeMismatch when a manifest label is not a class of the corpus scheme
// and MalformedRow when an id is absent from the corpus.
Corpus select_manifest(const Corpus& corpus, const std::vector<ManifestRow>& rows);

}  // namespace hsd
