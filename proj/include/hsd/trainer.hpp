#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsd/corpus.hpp"
#include "hsd/encoder.hpp"
#include "hsd/heads.hpp"
#include "hsd/rng.hpp"

namespace hsd {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 3;
  double learning_rate = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double dropout_p = 0.1;
  std::uint64_t seed = 0;
  bool freeze_encoder = false;
  std::size_t max_len = kDefaultMaxLen;
  std::size_t warmup_steps = 0;  // linear warmup; 0 keeps the rate constant
  double clip_norm = 0.0;        // global gradient-norm clip; 0 disables
  bool select_best = false;      // keep the best-validation-F1 epoch instead of the last

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// -ln(probs[target]) with probabilities floored at 1e-12.
double cross_entropy(const ClassProbs& probs, std::size_t target);

// Adam with bias correction over a named parameter set.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParameterSet& params, const ParameterSet& grads, double lr);
  std::size_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  ParameterSet m_, v_;
};

// Encoder, head, vocabulary and label scheme of one fine-tuned model.
struct Classifier {
  std::string backend = "mini";  // "mini" or "pretrained"
  LabelScheme scheme;
  Vocabulary vocab;
  Encoder encoder;
  std::unique_ptr<Head> head;

  TokenSequence encode(const std::string& normalized_text, std::size_t max_len) const;
  // Inference with dropout off.
  ClassProbs classify(const TokenSequence& seq) const;
};

struct Example {
  TokenSequence tokens;
  std::size_t label = 0;
};

// Tokenizes the normalized text of every record.
std::vector<Example> make_examples(const Corpus& corpus, const Vocabulary& vocab,
                                   std::size_t max_len);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_f1 = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  // "epoch,train_loss,val_loss,val_f1" with full round-trip precision.
  void write_csv(const std::filesystem::path& path) const;
};

struct Checkpoint {
  std::string backend;
  LabelScheme scheme;
  Vocabulary vocab;
  EncoderConfig encoder_config;
  ParameterSet encoder_params;
  HeadConfig head_config;
  ParameterSet head_params;
  TrainConfig train_config;
  std::size_t epoch = 0;
  std::string rng_state;

  Classifier restore() const;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);
// Throws VersionMismatch on an unknown checkpoint version or when the stored
// head kind differs from `expected_head`.
Checkpoint load_checkpoint(const std::filesystem::path& dir,
                           std::optional<HeadKind> expected_head = std::nullopt);

struct ValidationResult {
  double loss = 0.0;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
};

// Mean loss, weighted F1 and accuracy with dropout off. Never touches parameters.
ValidationResult evaluate(const Classifier& model, const std::vector<Example>& examples,
                          const LabelScheme& scheme);

// Stepwise fine-tuning loop. All randomness derives from config.seed.
class Trainer {
 public:
  Trainer(Classifier& model, TrainConfig config);

  // One pass over `train` in seeded shuffled order; returns the mean training loss.
  double run_epoch(const std::vector<Example>& train);
  std::size_t epochs_done() const { return epoch_; }
  const Rng& dropout_rng() const { return dropout_; }

  Checkpoint checkpoint() const;

 private:
  double learning_rate() const;

  Classifier& model_;
  TrainConfig config_;
  Rng dropout_;
  Adam encoder_opt_;
  Adam head_opt_;
  std::size_t epoch_ = 0;
  std::size_t step_ = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Runs config.epochs epochs, validating after each; returns the final (or,
// with select_best, the best-validation) checkpoint.
std::pair<Checkpoint, TrainHistory> train(Classifier& model, const Corpus& train_set,
                                          const Corpus& valid_set, const TrainConfig& config,
                                          const EpochCallback& on_epoch = {});

}  // namespace hsd
