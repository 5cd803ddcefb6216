#include <cmath>
#include <numbers>

#include "hsd/archive.hpp"
#include "hsd/encoder.hpp"
#include "hsd/error.hpp"
#include "hsd/rng.hpp"

namespace hsd {

namespace {

using nlohmann::json;

std::string layer_name(std::size_t l, const std::string& suffix) {
  return "encoder.layer." + std::to_string(l) + "." + suffix;
}

const char* const kWordEmb = "embeddings.word_embeddings.weight";
const char* const kPosEmb = "embeddings.position_embeddings.weight";
const char* const kTypeEmb = "embeddings.token_type_embeddings.weight";
const char* const kEmbNormW = "embeddings.LayerNorm.weight";
const char* const kEmbNormB = "embeddings.LayerNorm.bias";

// name -> shape for every tensor of the architecture
std::vector<std::pair<std::string, std::vector<std::size_t>>> tensor_layout(
    const EncoderConfig& c) {
  const std::size_t h = c.hidden_size, ffn = c.ffn_size();
  std::vector<std::pair<std::string, std::vector<std::size_t>>> out = {
      {kWordEmb, {c.vocab_size, h}},
      {kPosEmb, {c.positions(), h}},
      {kTypeEmb, {c.type_vocab_size, h}},
      {kEmbNormW, {h}},
      {kEmbNormB, {h}},
  };
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    for (const char* proj : {"query", "key", "value"}) {
      out.push_back({layer_name(l, std::string("attention.self.") + proj + ".weight"), {h, h}});
      out.push_back({layer_name(l, std::string("attention.self.") + proj + ".bias"), {h}});
    }
    out.push_back({layer_name(l, "attention.output.dense.weight"), {h, h}});
    out.push_back({layer_name(l, "attention.output.dense.bias"), {h}});
    out.push_back({layer_name(l, "attention.output.LayerNorm.weight"), {h}});
    out.push_back({layer_name(l, "attention.output.LayerNorm.bias"), {h}});
    out.push_back({layer_name(l, "intermediate.dense.weight"), {ffn, h}});
    out.push_back({layer_name(l, "intermediate.dense.bias"), {ffn}});
    out.push_back({layer_name(l, "output.dense.weight"), {h, ffn}});
    out.push_back({layer_name(l, "output.dense.bias"), {h}});
    out.push_back({layer_name(l, "output.LayerNorm.weight"), {h}});
    out.push_back({layer_name(l, "output.LayerNorm.bias"), {h}});
  }
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Matrix layer_norm(const Matrix& x, const Tensor& gain, const Tensor& bias, double eps,
                  LayerNormCache* cache) {
  const auto n = x.cols();
  Matrix normalized(x.rows(), n);
  Vector inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    normalized.row(r) = (x.row(r).array() - mean) * inv_std(r);
  }
  Matrix y = (normalized.array().rowwise() * gain.vector().transpose().array()).rowwise() +
             bias.vector().transpose().array();
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, const Tensor& gain,
                           Tensor& d_gain, Tensor& d_bias) {
  const Matrix& xhat = cache.normalized;
  d_gain.vector() += (dy.array() * xhat.array()).colwise().sum().transpose().matrix();
  d_bias.vector() += dy.colwise().sum().transpose();
  const Matrix dxhat = dy.array().rowwise() * gain.vector().transpose().array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double mean_d = dxhat.row(r).mean();
    const double mean_dx = (dxhat.row(r).array() * xhat.row(r).array()).mean();
    dx.row(r) = cache.inv_std(r) *
                (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx).matrix();
  }
  return dx;
}

// y = x W^T + b with W stored (out, in)
Matrix affine(const Matrix& x, const Tensor& w, const Tensor& b) {
  Matrix y = x * w.matrix().transpose();
  y.rowwise() += b.vector().transpose();
  return y;
}

void affine_backward(const Matrix& x, const Matrix& dy, Tensor& dw, Tensor& db) {
  dw.matrix() += dy.transpose() * x;
  db.vector() += dy.colwise().sum().transpose();
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

EncoderConfig EncoderConfig::base(std::size_t vocab_size) {
  EncoderConfig c;
  c.num_layers = 12;
  c.hidden_size = 768;
  c.num_heads = 12;
  c.intermediate_size = 3072;
  c.max_positions = 512;
  c.vocab_size = vocab_size;
  return c;
}

EncoderConfig EncoderConfig::mini(std::size_t vocab_size, std::uint64_t seed) {
  EncoderConfig c;
  c.vocab_size = vocab_size;
  c.seed = seed;
  return c;
}

void EncoderConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidConfig, msg); };
  if (num_layers < 1) fail("num_layers must be >= 1");
  if (hidden_size < 1 || num_heads < 1) fail("hidden_size and num_heads must be positive");
  if (hidden_size % num_heads != 0) fail("hidden_size must be divisible by num_heads");
  if (vocab_size < 1) fail("vocab_size must be positive");
  if (type_vocab_size < 1) fail("type_vocab_size must be positive");
  if (max_len < 2) fail("max_len must be >= 2");
  if (positions() < max_len) fail("max_positions must cover max_len");
  if (!(layer_norm_eps > 0.0)) fail("layer_norm_eps must be positive");
}

json EncoderConfig::to_json() const {
  return {{"num_layers", num_layers},
          {"hidden_size", hidden_size},
          {"num_heads", num_heads},
          {"intermediate_size", ffn_size()},
          {"max_len", max_len},
          {"max_positions", positions()},
          {"vocab_size", vocab_size},
          {"type_vocab_size", type_vocab_size},
          {"layer_norm_eps", layer_norm_eps},
          {"seed", seed}};
}

EncoderConfig EncoderConfig::from_json(const json& j) {
  EncoderConfig c;
  c.num_layers = j.value("num_layers", c.num_layers);
  c.hidden_size = j.value("hidden_size", c.hidden_size);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.intermediate_size = j.value("intermediate_size", c.intermediate_size);
  c.max_len = j.value("max_len", c.max_len);
  c.max_positions = j.value("max_positions", c.max_positions);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.type_vocab_size = j.value("type_vocab_size", c.type_vocab_size);
  c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
  c.seed = j.value("seed", c.seed);
  return c;
}

std::size_t encoder_parameter_count(const EncoderConfig& c) {
  std::size_t n = 0;
  for (const auto& [name, shape] : tensor_layout(c)) {
    std::size_t k = 1;
    for (auto d : shape) k *= d;
    n += k;
  }
  return n;
}

Encoder::Encoder(EncoderConfig config, ParameterSet params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  ParameterSet kept;
  for (const auto& [name, shape] : tensor_layout(config_)) {
    kept.emplace(name, require_tensor(params_, name, shape));
  }
  // tensors outside the architecture (e.g. a pooler) are dropped
  params_ = std::move(kept);
}

EncoderStates Encoder::forward(const TokenSequence& seq) const {
  EncoderCache cache;
  auto states = forward(seq, cache);
  if (precision_bits_ == 32) {
    for (auto& v : states.values.data) v = static_cast<double>(static_cast<float>(v));
  }
  return states;
}

std::vector<EncoderStates> Encoder::forward(std::span<const TokenSequence> batch) const {
  std::vector<EncoderStates> out;
  out.reserve(batch.size());
  for (const auto& seq : batch) out.push_back(forward(seq));
  return out;
}

EncoderStates Encoder::forward(const TokenSequence& seq, EncoderCache& cache) const {
  const auto& c = config_;
  const std::size_t S = seq.length();
  const std::size_t H = c.hidden_size;
  const std::size_t n = std::min(seq.content_length, S);
  if (S > c.positions()) {
    throw Error(ErrorCode::kShapeMismatch, "sequence length " + std::to_string(S) +
                                               " exceeds position table " +
                                               std::to_string(c.positions()));
  }
  for (auto id : seq.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size) {
      throw Error(ErrorCode::kIdOutOfRange, "token id " + std::to_string(id) +
                                                " outside vocabulary of size " +
                                                std::to_string(c.vocab_size));
    }
  }
  cache.ids = seq.ids;
  cache.content_length = n;
  cache.layers.assign(c.num_layers, {});

  const auto& word = params_.at(kWordEmb);
  const auto& pos = params_.at(kPosEmb);
  const auto& type = params_.at(kTypeEmb);
  Matrix emb(S, H);
  for (std::size_t t = 0; t < S; ++t) {
    emb.row(t) = word.matrix().row(seq.ids[t]) + pos.matrix().row(t) + type.matrix().row(0);
  }
  Matrix x = layer_norm(emb, params_.at(kEmbNormW), params_.at(kEmbNormB), c.layer_norm_eps,
                        &cache.embedding_norm);

  EncoderStates states(c.num_layers, S, H);
  const std::size_t heads = c.num_heads;
  const std::size_t d = H / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    auto& lc = cache.layers[l];
    auto p = [&](const std::string& s) -> const Tensor& { return params_.at(layer_name(l, s)); };
    lc.input = x;
    lc.q = affine(x, p("attention.self.query.weight"), p("attention.self.query.bias"));
    lc.k = affine(x, p("attention.self.key.weight"), p("attention.self.key.bias"));
    lc.v = affine(x, p("attention.self.value.weight"), p("attention.self.value.bias"));
    // padding queries attend to nothing and padding keys receive no weight
    lc.context = Matrix::Zero(S, H);
    lc.probs.assign(heads, Matrix());
    for (std::size_t h = 0; h < heads; ++h) {
      const auto col = static_cast<Eigen::Index>(h * d);
      const auto dd = static_cast<Eigen::Index>(d);
      const auto nn = static_cast<Eigen::Index>(n);
      Matrix scores = lc.q.block(0, col, nn, dd) * lc.k.block(0, col, nn, dd).transpose() * scale;
      for (Eigen::Index i = 0; i < nn; ++i) {
        const double mx = scores.row(i).maxCoeff();
        scores.row(i) = (scores.row(i).array() - mx).exp();
        scores.row(i) /= scores.row(i).sum();
      }
      lc.context.block(0, col, nn, dd) = scores * lc.v.block(0, col, nn, dd);
      lc.probs[h] = std::move(scores);
    }
    Matrix attn = affine(lc.context, p("attention.output.dense.weight"),
                         p("attention.output.dense.bias"));
    lc.after_attention = layer_norm(x + attn, p("attention.output.LayerNorm.weight"),
                                    p("attention.output.LayerNorm.bias"), c.layer_norm_eps,
                                    &lc.norm1);
    lc.ffn_pre = affine(lc.after_attention, p("intermediate.dense.weight"),
                        p("intermediate.dense.bias"));
    lc.ffn_act = lc.ffn_pre.unaryExpr([](double v) { return gelu(v); });
    Matrix ffn = affine(lc.ffn_act, p("output.dense.weight"), p("output.dense.bias"));
    x = layer_norm(lc.after_attention + ffn, p("output.LayerNorm.weight"),
                   p("output.LayerNorm.bias"), c.layer_norm_eps, &lc.norm2);
    states.layer(l) = x;
  }
  return states;
}

void Encoder::backward(const EncoderCache& cache, const EncoderStates& d_states,
                       ParameterSet& grads) const {
  const auto& c = config_;
  const std::size_t S = cache.ids.size();
  const std::size_t H = c.hidden_size;
  const std::size_t n = cache.content_length;
  const std::size_t heads = c.num_heads;
  const std::size_t d = H / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  if (d_states.layers() != c.num_layers || d_states.seq() != S || d_states.hidden() != H) {
    throw Error(ErrorCode::kShapeMismatch, "state gradient has shape " +
                                               shape_string(d_states.values.shape));
  }

  Matrix dx = Matrix::Zero(S, H);
  for (std::size_t li = c.num_layers; li-- > 0;) {
    const auto& lc = cache.layers[li];
    auto p = [&](const std::string& s) -> const Tensor& { return params_.at(layer_name(li, s)); };
    auto g = [&](const std::string& s) -> Tensor& { return grads.at(layer_name(li, s)); };
    dx += d_states.layer(li);

    // x_out = LN2(after_attention + ffn)
    Matrix d_res2 = layer_norm_backward(dx, lc.norm2, p("output.LayerNorm.weight"),
                                        g("output.LayerNorm.weight"), g("output.LayerNorm.bias"));
    affine_backward(lc.ffn_act, d_res2, g("output.dense.weight"), g("output.dense.bias"));
    Matrix d_act = d_res2 * p("output.dense.weight").matrix();
    Matrix d_pre = d_act.array() * lc.ffn_pre.unaryExpr([](double v) {
                                                 return gelu_derivative(v);
                                               }).array();
    affine_backward(lc.after_attention, d_pre, g("intermediate.dense.weight"),
                    g("intermediate.dense.bias"));
    Matrix d_mid = d_res2 + d_pre * p("intermediate.dense.weight").matrix();

    // after_attention = LN1(input + attn)
    Matrix d_res1 = layer_norm_backward(d_mid, lc.norm1, p("attention.output.LayerNorm.weight"),
                                        g("attention.output.LayerNorm.weight"),
                                        g("attention.output.LayerNorm.bias"));
    affine_backward(lc.context, d_res1, g("attention.output.dense.weight"),
                    g("attention.output.dense.bias"));
    Matrix d_ctx = d_res1 * p("attention.output.dense.weight").matrix();

    Matrix dq = Matrix::Zero(S, H), dk = Matrix::Zero(S, H), dv = Matrix::Zero(S, H);
    const auto nn = static_cast<Eigen::Index>(n);
    const auto dd = static_cast<Eigen::Index>(d);
    for (std::size_t h = 0; h < heads; ++h) {
      const auto col = static_cast<Eigen::Index>(h * d);
      const Matrix& probs = lc.probs[h];
      const Matrix d_ctx_h = d_ctx.block(0, col, nn, dd);
      const Matrix d_probs = d_ctx_h * lc.v.block(0, col, nn, dd).transpose();
      dv.block(0, col, nn, dd) = probs.transpose() * d_ctx_h;
      Matrix d_scores = probs.array() *
                        (d_probs.array().colwise() -
                         (probs.array() * d_probs.array()).rowwise().sum());
      dq.block(0, col, nn, dd) = d_scores * lc.k.block(0, col, nn, dd) * scale;
      dk.block(0, col, nn, dd) = d_scores.transpose() * lc.q.block(0, col, nn, dd) * scale;
    }
    affine_backward(lc.input, dq, g("attention.self.query.weight"), g("attention.self.query.bias"));
    affine_backward(lc.input, dk, g("attention.self.key.weight"), g("attention.self.key.bias"));
    affine_backward(lc.input, dv, g("attention.self.value.weight"), g("attention.self.value.bias"));
    dx = d_res1 + dq * p("attention.self.query.weight").matrix() +
         dk * p("attention.self.key.weight").matrix() +
         dv * p("attention.self.value.weight").matrix();
  }

  Matrix d_emb = layer_norm_backward(dx, cache.embedding_norm, params_.at(kEmbNormW),
                                     grads.at(kEmbNormW), grads.at(kEmbNormB));
  auto word = grads.at(kWordEmb).matrix();
  auto pos = grads.at(kPosEmb).matrix();
  auto type = grads.at(kTypeEmb).matrix();
  for (std::size_t t = 0; t < S; ++t) {
    word.row(cache.ids[t]) += d_emb.row(t);
    pos.row(t) += d_emb.row(t);
    type.row(0) += d_emb.row(t);
  }
}

void Encoder::save(const std::filesystem::path& dir) const {
  Archive archive;
  archive.meta["kind"] = "encoder";
  archive.meta["config"] = config_.to_json();
  archive.tensors = params_;
  write_archive(dir, archive);
}

Encoder build_mini(const EncoderConfig& config) {
  config.validate();
  ParameterSet params;
  for (const auto& [name, shape] : tensor_layout(config)) params.emplace(name, Tensor(shape));
  Rng rng(config.seed);
  for (auto& [name, t] : params) {
    if (ends_with(name, "LayerNorm.weight")) {
      std::fill(t.data.begin(), t.data.end(), 1.0);
    } else if (ends_with(name, "LayerNorm.bias") || ends_with(name, ".bias")) {
      t.set_zero();
    } else {
      for (auto& v : t.data) v = rng.truncated_normal(0.02);
    }
  }
  return Encoder(config, std::move(params));
}

PretrainedBackend load_pretrained(const std::filesystem::path& weights_dir,
                                  const std::filesystem::path& vocab_path,
                                  std::span<const std::string> placeholders,
                                  std::optional<Architecture> expected) {
  Archive archive = read_archive(weights_dir);
  const auto& t = archive.tensors;
  auto shape_of = [&](const std::string& name) -> const std::vector<std::size_t>& {
    auto it = t.find(name);
    if (it == t.end()) throw Error(ErrorCode::kMissingTensor, "missing tensor " + name);
    return it->second.shape;
  };

  EncoderConfig config;
  if (archive.meta.contains("config")) {
    config = EncoderConfig::from_json(archive.meta["config"]);
  } else {
    const auto& word = shape_of(kWordEmb);
    if (word.size() != 2) throw Error(ErrorCode::kShapeMismatch, "word embeddings must be 2-D");
    config.vocab_size = word[0];
    config.hidden_size = word[1];
    config.max_positions = shape_of(kPosEmb).at(0);
    config.type_vocab_size = shape_of(kTypeEmb).at(0);
    config.num_layers = 0;
    while (t.count(layer_name(config.num_layers, "output.dense.weight"))) ++config.num_layers;
    config.intermediate_size = shape_of(layer_name(0, "intermediate.dense.weight")).at(0);
    config.num_heads = std::max<std::size_t>(1, config.hidden_size / 64);
  }
  config.max_len = std::min(config.positions(), kDefaultMaxLen);
  if (expected && (config.num_layers != expected->num_layers ||
                   config.hidden_size != expected->hidden_size ||
                   config.num_heads != expected->num_heads)) {
    throw Error(ErrorCode::kShapeMismatch,
                "archive holds L=" + std::to_string(config.num_layers) +
                    " H=" + std::to_string(config.hidden_size) +
                    " heads=" + std::to_string(config.num_heads) + ", expected L=" +
                    std::to_string(expected->num_layers) + " H=" +
                    std::to_string(expected->hidden_size) +
                    " heads=" + std::to_string(expected->num_heads));
  }

  Vocabulary vocab = Vocabulary::load(vocab_path);
  vocab.register_placeholders(placeholders, /*allow_growth=*/false);
  if (vocab.size() != config.vocab_size) {
    throw Error(ErrorCode::kShapeMismatch, "vocabulary has " + std::to_string(vocab.size()) +
                                               " tokens but embeddings have " +
                                               std::to_string(config.vocab_size) + " rows");
  }
  Encoder encoder(config, std::move(archive.tensors));
  return {std::move(encoder), std::move(vocab)};
}

}  // namespace hsd
