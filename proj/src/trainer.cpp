#include "hsd/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "hsd/archive.hpp"
#include "hsd/error.hpp"
#include "hsd/eval_report.hpp"

namespace hsd {

using nlohmann::json;

namespace {

void add_into(ParameterSet& acc, const ParameterSet& g) {
  for (auto& [name, t] : acc) t.vector() += g.at(name).vector();
}

double squared_norm(const ParameterSet& g) {
  double s = 0.0;
  for (const auto& [name, t] : g) s += t.vector().squaredNorm();
  return s;
}

void scale(ParameterSet& g, double k) {
  for (auto& [name, t] : g) t.vector() *= k;
}

std::string format_double(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidConfig, m); };
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout_p must be in [0, 1)");
  if (max_len < 2) fail("max_len must be >= 2");
  if (clip_norm < 0.0) fail("clip_norm must be non-negative");
}

json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},       {"epochs", epochs},
          {"learning_rate", learning_rate}, {"beta1", beta1},
          {"beta2", beta2},                 {"adam_eps", adam_eps},
          {"dropout_p", dropout_p},         {"seed", seed},
          {"freeze_encoder", freeze_encoder}, {"max_len", max_len},
          {"warmup_steps", warmup_steps},   {"clip_norm", clip_norm},
          {"select_best", select_best}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.dropout_p = j.value("dropout_p", c.dropout_p);
  c.seed = j.value("seed", c.seed);
  c.freeze_encoder = j.value("freeze_encoder", c.freeze_encoder);
  c.max_len = j.value("max_len", c.max_len);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.select_best = j.value("select_best", c.select_best);
  return c;
}

double cross_entropy(const ClassProbs& probs, std::size_t target) {
  return -std::log(std::max(probs[target], 1e-12));
}

void Adam::step(ParameterSet& params, const ParameterSet& grads, double lr) {
  if (m_.empty()) {
    m_ = zeros_like(params);
    v_ = zeros_like(params);
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    const auto g = grads.at(name).vector();
    auto m = m_.at(name).vector();
    auto v = v_.at(name).vector();
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    p.vector().array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

TokenSequence Classifier::encode(const std::string& normalized_text, std::size_t max_len) const {
  return tokenize(normalized_text, vocab, max_len);
}

ClassProbs Classifier::classify(const TokenSequence& seq) const {
  const auto states = encoder.forward(seq);
  return head->forward(states, seq.content_length).probs;
}

std::vector<Example> make_examples(const Corpus& corpus, const Vocabulary& vocab,
                                   std::size_t max_len) {
  std::vector<Example> out;
  out.reserve(corpus.size());
  for (const auto& r : corpus.records()) {
    out.push_back({tokenize(r.normalized_text, vocab, max_len), r.label});
  }
  return out;
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  out << "epoch,train_loss,val_loss,val_f1\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss)
        << ',' << format_double(e.val_f1) << '\n';
  }
}

ValidationResult evaluate(const Classifier& model, const std::vector<Example>& examples,
                          const LabelScheme& scheme) {
  ValidationResult r;
  if (examples.empty()) return r;
  std::vector<std::size_t> preds, golds;
  double loss = 0.0;
  for (const auto& ex : examples) {
    const auto probs = model.classify(ex.tokens);
    loss += cross_entropy(probs, ex.label);
    preds.push_back(predict(probs));
    golds.push_back(ex.label);
  }
  const auto report = metrics(preds, golds, scheme);
  r.loss = loss / static_cast<double>(examples.size());
  r.weighted_f1 = report.weighted.f1;
  r.accuracy = report.accuracy;
  return r;
}

Trainer::Trainer(Classifier& model, TrainConfig config)
    : model_(model),
      config_(std::move(config)),
      dropout_(derive_seed(config_.seed, 1)),
      encoder_opt_(config_.beta1, config_.beta2, config_.adam_eps),
      head_opt_(config_.beta1, config_.beta2, config_.adam_eps) {
  config_.validate();
  if (model_.head->config().num_classes != model_.scheme.num_classes()) {
    throw Error(ErrorCode::kSchemeMismatch, "head has " +
                                                std::to_string(model_.head->config().num_classes) +
                                                " classes but scheme " + model_.scheme.name +
                                                " has " +
                                                std::to_string(model_.scheme.num_classes()));
  }
  model_.head->set_dropout(config_.dropout_p);
}

double Trainer::learning_rate() const {
  if (config_.warmup_steps == 0 || step_ >= config_.warmup_steps) return config_.learning_rate;
  return config_.learning_rate * static_cast<double>(step_ + 1) /
         static_cast<double>(config_.warmup_steps);
}

double Trainer::run_epoch(const std::vector<Example>& train) {
  if (train.empty()) throw Error(ErrorCode::kEmptyInput, "empty training set");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle(derive_seed(config_.seed, 100 + epoch_));
  shuffle.shuffle(std::span(order));

  const bool tune_encoder = !config_.freeze_encoder;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    const std::size_t end = std::min(order.size(), start + config_.batch_size);
    const double inv_batch = 1.0 / static_cast<double>(end - start);
    ParameterSet head_grads = zeros_like(model_.head->params());
    ParameterSet enc_grads;
    if (tune_encoder) enc_grads = zeros_like(model_.encoder.params());

    for (std::size_t k = start; k < end; ++k) {
      const Example& ex = train[order[k]];
      EncoderCache cache;
      const EncoderStates states =
          tune_encoder ? model_.encoder.forward(ex.tokens, cache) : model_.encoder.forward(ex.tokens);
      const HeadOutput out = model_.head->forward(states, ex.tokens.content_length, &dropout_);
      const double loss = cross_entropy(out.probs, ex.label);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::kNonFiniteLoss,
                    "non-finite loss at epoch " + std::to_string(epoch_ + 1) + ", example " +
                        std::to_string(order[k]) + ", step " + std::to_string(step_));
      }
      loss_sum += loss;
      Vector d_logits = out.probs.probs;
      d_logits(static_cast<Eigen::Index>(ex.label)) -= 1.0;
      d_logits *= inv_batch;
      HeadGradients g = model_.head->backward(out, states, d_logits);
      add_into(head_grads, g.params);
      if (tune_encoder) model_.encoder.backward(cache, g.states, enc_grads);
    }

    if (config_.clip_norm > 0.0) {
      const double norm = std::sqrt(squared_norm(head_grads) + squared_norm(enc_grads));
      if (norm > config_.clip_norm) {
        scale(head_grads, config_.clip_norm / norm);
        scale(enc_grads, config_.clip_norm / norm);
      }
    }
    const double lr = learning_rate();
    head_opt_.step(model_.head->params(), head_grads, lr);
    if (tune_encoder) encoder_opt_.step(model_.encoder.params(), enc_grads, lr);
    ++step_;
  }
  ++epoch_;
  return loss_sum / static_cast<double>(train.size());
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.backend = model_.backend;
  c.scheme = model_.scheme;
  c.vocab = model_.vocab;
  c.encoder_config = model_.encoder.config();
  c.encoder_params = model_.encoder.params();
  c.head_config = model_.head->config();
  c.head_params = model_.head->params();
  c.train_config = config_;
  c.epoch = epoch_;
  c.rng_state = dropout_.state();
  return c;
}

Classifier Checkpoint::restore() const {
  Encoder encoder(encoder_config, encoder_params);
  auto head = Head::create(head_config, encoder_config.num_layers, encoder_config.hidden_size,
                           head_params);
  return Classifier{backend, scheme, vocab, std::move(encoder), std::move(head)};
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& c) {
  Archive archive;
  archive.meta = {{"checkpoint_version", kCheckpointVersion},
                  {"backend", c.backend},
                  {"scheme", c.scheme.name},
                  {"classes", c.scheme.classes},
                  {"head_kind", head_kind_name(c.head_config.kind)},
                  {"head_config", c.head_config.to_json()},
                  {"encoder_config", c.encoder_config.to_json()},
                  {"train_config", c.train_config.to_json()},
                  {"epoch", c.epoch},
                  {"rng_state", c.rng_state}};
  for (const auto& [name, t] : c.encoder_params) archive.tensors.emplace("encoder/" + name, t);
  for (const auto& [name, t] : c.head_params) archive.tensors.emplace("head/" + name, t);
  write_archive(dir, archive);
  c.vocab.save(dir / "vocab.txt");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir, std::optional<HeadKind> expected_head) {
  Archive archive = read_archive(dir);
  const auto& meta = archive.meta;
  const int version = meta.value("checkpoint_version", -1);
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                "checkpoint version " + std::to_string(version) + " in " + dir.string() +
                    " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint c;
  c.head_config = HeadConfig::from_json(meta.at("head_config"));
  if (expected_head && *expected_head != c.head_config.kind) {
    throw Error(ErrorCode::kVersionMismatch,
                std::string("checkpoint holds a ") + head_kind_name(c.head_config.kind) +
                    " head, expected " + head_kind_name(*expected_head));
  }
  c.backend = meta.value("backend", std::string("mini"));
  c.scheme = LabelScheme{meta.at("scheme").get<std::string>(),
                         meta.at("classes").get<std::vector<std::string>>()};
  c.encoder_config = EncoderConfig::from_json(meta.at("encoder_config"));
  c.train_config = TrainConfig::from_json(meta.at("train_config"));
  c.epoch = meta.value("epoch", std::size_t{0});
  c.rng_state = meta.value("rng_state", std::string{});
  for (auto& [name, t] : archive.tensors) {
    if (name.rfind("encoder/", 0) == 0) {
      c.encoder_params.emplace(name.substr(8), std::move(t));
    } else if (name.rfind("head/", 0) == 0) {
      c.head_params.emplace(name.substr(5), std::move(t));
    }
  }
  c.vocab = Vocabulary::load(dir / "vocab.txt");
  return c;
}

std::pair<Checkpoint, TrainHistory> train(Classifier& model, const Corpus& train_set,
                                          const Corpus& valid_set, const TrainConfig& config,
                                          const EpochCallback& on_epoch) {
  if (!(train_set.scheme() == model.scheme) || !(valid_set.scheme() == model.scheme)) {
    throw Error(ErrorCode::kSchemeMismatch, "training corpora and model disagree on label scheme");
  }
  Trainer trainer(model, config);
  const auto train_ex = make_examples(train_set, model.vocab, config.max_len);
  const auto valid_ex = make_examples(valid_set, model.vocab, config.max_len);

  TrainHistory history;
  std::optional<Checkpoint> best;
  double best_f1 = -1.0;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = e + 1;
    rec.train_loss = trainer.run_epoch(train_ex);
    const auto val = evaluate(model, valid_ex, model.scheme);
    rec.val_loss = val.loss;
    rec.val_f1 = val.weighted_f1;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (config.select_best && rec.val_f1 > best_f1) {
      best_f1 = rec.val_f1;
      best = trainer.checkpoint();
    }
  }
  if (config.select_best && best) {
    Classifier restored = best->restore();
    model.encoder = std::move(restored.encoder);
    model.head = std::move(restored.head);
    return {std::move(*best), std::move(history)};
  }
  return {trainer.checkpoint(), std::move(history)};
}

}  // namespace hsd
