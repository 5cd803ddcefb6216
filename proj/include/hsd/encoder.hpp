#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsd/tensor.hpp"

namespace hsd {

inline constexpr std::size_t kDefaultMaxLen = 64;

class Vocabulary {
 public:
  static constexpr const char* kPad = "[PAD]";
  static constexpr const char* kUnk = "[UNK]";
  static constexpr const char* kCls = "[CLS]";
  static constexpr const char* kSep = "[SEP]";
  static constexpr const char* kContinuation = "##";

  Vocabulary() = default;
  // Line number = id. Throws InvalidConfig when special tokens are missing
  // or [PAD] is not id 0.
  explicit Vocabulary(std::vector<std::string> tokens);

  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // Word-level vocabulary for the mini backend: specials, placeholders,
  // single letters with their "##" forms, then the most frequent words
  // (ties broken alphabetically) until `max_size` is reached.
  static Vocabulary build(std::span<const std::string> texts,
                          std::span<const std::string> placeholders, std::size_t max_size);

  // Makes each placeholder an atomic entry, reusing "[unusedN]" slots first and
  // appending only when `allow_growth`. Returns how many were appended.
  std::size_t register_placeholders(std::span<const std::string> placeholders,
                                    bool allow_growth);

  std::optional<std::int32_t> find(std::string_view token) const;
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::int32_t pad_id() const { return pad_; }
  std::int32_t unk_id() const { return unk_; }
  std::int32_t cls_id() const { return cls_; }
  std::int32_t sep_id() const { return sep_; }

 private:
  void index();

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
  std::int32_t pad_ = 0, unk_ = 0, cls_ = 0, sep_ = 0;
};

struct TokenSequence {
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> attention_mask;
  std::size_t content_length = 0;

  std::size_t length() const { return ids.size(); }
};

// Greedy longest-match-first WordPiece over whitespace tokens, framed as
// [CLS] pieces [SEP] and padded (or truncated, keeping the head) to max_len.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab,
                       std::size_t max_len = kDefaultMaxLen);

// The subword pieces alone, before framing.
std::vector<std::int32_t> wordpiece(std::string_view text, const Vocabulary& vocab);

struct EncoderConfig {
  std::size_t num_layers = 2;
  std::size_t hidden_size = 16;
  std::size_t num_heads = 2;
  std::size_t intermediate_size = 0;  // 0 means 4 * hidden_size
  std::size_t max_len = kDefaultMaxLen;
  std::size_t max_positions = 0;  // 0 means max_len
  std::size_t vocab_size = 0;
  std::size_t type_vocab_size = 2;
  double layer_norm_eps = 1e-12;
  std::uint64_t seed = 0;

  static EncoderConfig base(std::size_t vocab_size = 30522);  // 12 x 768, 12 heads
  static EncoderConfig mini(std::size_t vocab_size, std::uint64_t seed = 7);

  std::size_t ffn_size() const { return intermediate_size ? intermediate_size : 4 * hidden_size; }
  std::size_t positions() const { return max_positions ? max_positions : max_len; }
  void validate() const;

  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
};

// Per-layer hidden states of one sequence: layers x positions x hidden.
// Layer i is the output of transformer block i; the embedding output is not
// included. Padding positions are present and must be masked by consumers.
struct EncoderStates {
  Tensor values;

  EncoderStates() = default;
  EncoderStates(std::size_t layers, std::size_t seq, std::size_t hidden)
      : values({layers, seq, hidden}) {}

  std::size_t layers() const { return values.dim(0); }
  std::size_t seq() const { return values.dim(1); }
  std::size_t hidden() const { return values.dim(2); }

  MatrixMap layer(std::size_t l) {
    return {values.data.data() + l * seq() * hidden(), static_cast<Eigen::Index>(seq()),
            static_cast<Eigen::Index>(hidden())};
  }
  ConstMatrixMap layer(std::size_t l) const {
    return {values.data.data() + l * seq() * hidden(), static_cast<Eigen::Index>(seq()),
            static_cast<Eigen::Index>(hidden())};
  }
  // Final-layer [CLS] vector.
  Vector cls() const { return layer(layers() - 1).row(0).transpose(); }
};

struct EncoderCache;

class Encoder {
 public:
  // Throws MissingTensor / ShapeMismatch when `params` does not fit `config`.
  Encoder(EncoderConfig config, ParameterSet params);

  const EncoderConfig& config() const { return config_; }
  const ParameterSet& params() const { return params_; }
  ParameterSet& params() { return params_; }
  std::size_t parameter_count() const { return hsd::parameter_count(params_); }

  // Throws IdOutOfRange for ids outside the vocabulary.
  EncoderStates forward(const TokenSequence& seq) const;
  std::vector<EncoderStates> forward(std::span<const TokenSequence> batch) const;
  // Training forward; keeps what backward needs.
  EncoderStates forward(const TokenSequence& seq, EncoderCache& cache) const;
  // Accumulates parameter gradients of a loss whose gradient w.r.t. the
  // states is `d_states`.
  void backward(const EncoderCache& cache, const EncoderStates& d_states,
                ParameterSet& grads) const;

  // Rounds inference states through float when set to 32.
  void set_inference_precision(int bits) { precision_bits_ = bits; }
  int inference_precision() const { return precision_bits_; }

  void save(const std::filesystem::path& dir) const;

 private:
  EncoderConfig config_;
  ParameterSet params_;
  int precision_bits_ = 64;
};

struct LayerNormCache {
  Matrix normalized;  // rows x H
  Vector inv_std;     // rows
};

struct LayerCache {
  Matrix input;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head, content x content
  Matrix context;
  LayerNormCache norm1;
  Matrix after_attention;
  Matrix ffn_pre;
  Matrix ffn_act;
  LayerNormCache norm2;
};

struct EncoderCache {
  std::vector<std::int32_t> ids;
  std::size_t content_length = 0;
  LayerNormCache embedding_norm;
  std::vector<LayerCache> layers;
};

// Deterministic randomly initialized encoder: truncated normal (std 0.02)
// weights and embeddings, zero biases, unit layer-norm gains.
Encoder build_mini(const EncoderConfig& config);

// Closed-form parameter count of the architecture.
std::size_t encoder_parameter_count(const EncoderConfig& config);

struct PretrainedBackend {
  Encoder encoder;
  Vocabulary vocab;
};

struct Architecture {
  std::size_t num_layers;
  std::size_t hidden_size;
  std::size_t num_heads;

  static Architecture base() { return {12, 768, 12}; }
};

// Loads a named-tensor archive using BERT tensor names plus a vocabulary
// file. The architecture is read from the archive metadata when present and
// inferred from tensor shapes otherwise (heads = hidden / 64). Placeholders
// are mapped onto "[unusedN]" vocabulary slots. Throws ShapeMismatch when the
// archive does not match `expected` (pass nullopt to accept any size).
PretrainedBackend load_pretrained(const std::filesystem::path& weights_dir,
                                  const std::filesystem::path& vocab_path,
                                  std::span<const std::string> placeholders,
                                  std::optional<Architecture> expected = Architecture::base());

double gelu(double x);
double gelu_derivative(double x);

}  // namespace hsd
