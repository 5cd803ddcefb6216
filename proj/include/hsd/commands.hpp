#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "hsd/eval_report.hpp"
#include "hsd/run_config.hpp"
#include "hsd/trainer.hpp"

namespace hsd::cli {

// Normalizes the text column of a CSV stream. Other columns pass through
// unchanged. Row errors name the 1-based input line.
void cmd_prep(std::istream& in, std::ostream& out, const std::string& text_col,
              const NormalizerConfig& config);
void cmd_prep(const std::filesystem::path& in_path, const std::filesystem::path& out_path,
              const std::string& text_col, const NormalizerConfig& config);

// Class-distribution table: rows Train / Validation / Test / Total, one
// column per class plus a Total column.
std::string format_split_table(const LabelScheme& scheme, const SplitResult& split);

// Writes <out>/manifests/{train,validation,test}.csv and prints the table.
SplitResult cmd_split(const RunConfig& config, std::ostream& out);

struct TrainOutcome {
  Checkpoint checkpoint;
  TrainHistory history;
  std::uint64_t encoder_checksum_before = 0;
  std::uint64_t encoder_checksum_after = 0;
};

// Splits, builds the backend, trains, and writes under <out>:
// resolved_config.json, manifests/, checkpoint/, history.csv, train_log.jsonl.
// One JSON line per epoch also goes to `log`.
TrainOutcome cmd_train(const RunConfig& config, std::ostream& log);

// Runs the checkpoint over the manifest records and writes the report bundle
// to `report_dir`. Throws SchemeMismatch when the checkpoint was trained on a
// different scheme than the configured dataset.
MetricsReport cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint_dir,
                       const std::filesystem::path& manifest_path,
                       const std::filesystem::path& report_dir, std::ostream& log);

struct ReferenceScores {
  double precision;
  double recall;
  double f1;
};

// Published weighted scores (percent) for a head on a dataset, if any.
std::optional<ReferenceScores> reference_scores(HeadKind head, const std::string& dataset);

// Prints measured weighted scores next to the published ones.
void cmd_report(const std::filesystem::path& metrics_path, HeadKind head,
                const std::string& dataset, std::ostream& out);

}  // namespace hsd::cli
