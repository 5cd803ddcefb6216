#pragma once

#include <any>
#include <cstdint>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "hsd/encoder.hpp"
#include "hsd/rng.hpp"
#include "hsd/tensor.hpp"

namespace hsd {

enum class HeadKind { kLinear, kMlp, kBiLstm, kCnn };

const char* head_kind_name(HeadKind kind);
HeadKind parse_head_kind(const std::string& name);

struct HeadConfig {
  HeadKind kind = HeadKind::kLinear;
  std::size_t num_classes = 3;
  std::size_t mlp_hidden = 768;
  double leaky_slope = 0.01;
  std::size_t lstm_hidden = 0;  // 0 means the encoder hidden size
  std::size_t cnn_filters = 32;
  std::size_t cnn_window = 3;
  bool cnn_relu = true;
  double dropout_p = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static HeadConfig from_json(const nlohmann::json& j);
};

struct ClassProbs {
  Vector probs;

  std::size_t size() const { return static_cast<std::size_t>(probs.size()); }
  double operator[](std::size_t i) const { return probs(static_cast<Eigen::Index>(i)); }
};

// Forward result; `cache` is opaque state for backward.
struct HeadOutput {
  Vector logits;
  ClassProbs probs;
  std::any cache;
};

struct HeadGradients {
  ParameterSet params;
  EncoderStates states;
};

// Classifier on top of encoder states. Parameter matrices are stored as
// (out, in).
class Head {
 public:
  virtual ~Head() = default;

  // Builds and seeds a head for an encoder with the given depth and width.
  static std::unique_ptr<Head> create(const HeadConfig& config, std::size_t encoder_layers,
                                      std::size_t encoder_hidden);
  // Same, with existing parameters (shape-checked).
  static std::unique_ptr<Head> create(const HeadConfig& config, std::size_t encoder_layers,
                                      std::size_t encoder_hidden, ParameterSet params);

  const HeadConfig& config() const { return config_; }
  HeadKind kind() const { return config_.kind; }
  const ParameterSet& params() const { return params_; }
  ParameterSet& params() { return params_; }
  std::size_t encoder_layers() const { return layers_; }
  std::size_t encoder_hidden() const { return hidden_; }
  void set_dropout(double p);

  // Dropout is active iff `dropout` is non-null. `content_length` counts the
  // unmasked leading positions; only the Bi-LSTM head uses it.
  HeadOutput forward(const EncoderStates& states, std::size_t content_length,
                     Rng* dropout = nullptr) const;
  // Gradients of a scalar loss with gradient `d_logits` w.r.t. the logits.
  HeadGradients backward(const HeadOutput& out, const EncoderStates& states,
                         const Vector& d_logits) const;
  // Cross-entropy gradient: d_logits = probs - onehot(target).
  HeadGradients backward(const HeadOutput& out, const EncoderStates& states,
                         std::size_t target) const;

 protected:
  Head(HeadConfig config, std::size_t layers, std::size_t hidden)
      : config_(std::move(config)), layers_(layers), hidden_(hidden) {}

  void check_states(const EncoderStates& states) const;
  virtual std::vector<std::pair<std::string, std::vector<std::size_t>>> layout() const = 0;
  virtual void initialize(Rng& rng) = 0;
  virtual Vector logits(const EncoderStates& states, std::size_t content_length, Rng* dropout,
                        std::any& cache) const = 0;
  virtual void backprop(const std::any& cache, const EncoderStates& states,
                        const Vector& d_logits, HeadGradients& grads) const = 0;

  HeadConfig config_;
  std::size_t layers_;
  std::size_t hidden_;
  ParameterSet params_;
};

Vector softmax(const Vector& logits);
double leaky_relu(double x, double slope);

// argmax, ties to the lowest index
std::size_t predict(const ClassProbs& probs);

}  // namespace hsd
