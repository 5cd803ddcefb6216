#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsd/corpus.hpp"
#include "hsd/encoder.hpp"
#include "hsd/heads.hpp"
#include "hsd/text_prep.hpp"
#include "hsd/trainer.hpp"

namespace hsd {

struct InputFile {
  std::filesystem::path path;
  std::string variant;  // "hovy16", "waseem16" or "davidson"
};

struct BackendConfig {
  std::string kind = "mini";  // "mini" or "pretrained"
  std::filesystem::path weights;
  std::filesystem::path vocab;
  bool expect_base = true;  // pretrained archives must be 12 x 768 x 12
  EncoderConfig mini;       // vocab_size is filled from the built vocabulary
  std::size_t mini_vocab_size = 4000;
};

// One JSON document describing a whole run. Relative paths resolve against
// the directory of the config file.
struct RunConfig {
  std::string dataset = "davidson";  // "waseem" or "davidson"
  std::vector<InputFile> inputs;     // waseem inputs are merged in order, first wins
  ColumnConfig columns;
  bool columns_set = false;
  NormalizerConfig normalizer;
  std::filesystem::path lexicon;
  SplitSpec split;
  BackendConfig backend;
  HeadConfig head;
  TrainConfig train;
  std::filesystem::path out = "out";
  std::size_t limit_errors = 20;

  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  LabelScheme scheme() const { return LabelScheme::by_name(dataset); }
  ColumnConfig effective_columns() const;
  // Sets every seed (split, train, head, mini encoder) at once.
  void set_seed(std::uint64_t seed);
  // Throws InvalidConfig; checks referenced files exist and head C matches the scheme.
  void validate(bool need_inputs = true) const;
};

// Loads and merges the configured inputs, then fills normalized_text.
Corpus load_dataset(const RunConfig& config, std::vector<std::string>* log = nullptr);

// Reads PIPELINE_PRECISION (32 or 64, default 64).
int pipeline_precision();

}  // namespace hsd
