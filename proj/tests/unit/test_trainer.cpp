#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "../common/fixtures.hpp"
#include "hsd/error.hpp"
#include "hsd/trainer.hpp"
#include "support.hpp"

namespace hsd {
namespace {

using fixtures::ModelOptions;

std::vector<Example> examples_for(const Classifier& model, const Corpus& corpus) {
  return make_examples(corpus, model.vocab, 16);
}

TEST(CrossEntropy, KnownValues) {
  ClassProbs uniform{Vector::Constant(3, 1.0 / 3.0)};
  EXPECT_NEAR(cross_entropy(uniform, 0), std::log(3.0), 1e-15);
  ClassProbs onehot{Vector::Unit(3, 2)};
  EXPECT_DOUBLE_EQ(cross_entropy(onehot, 2), 0.0);
  ClassProbs p{Vector(3)};
  p.probs << 0.7, 0.2, 0.1;
  EXPECT_NEAR(cross_entropy(p, 1), 1.6094379124341003, 1e-15);
  // Zero probability is floored rather than producing infinity.
  EXPECT_NEAR(cross_entropy(onehot, 0), -std::log(1e-12), 1e-9);
}

TEST(Adam, MatchesHandCodedReference) {
  ParameterSet params;
  params["w"] = Tensor({3});
  params["w"].data = {0.5, -1.0, 2.0};
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.01;
  std::vector<double> ref = params["w"].data, m(3, 0.0), v(3, 0.0);
  Adam adam(b1, b2, eps);
  for (int t = 1; t <= 5; ++t) {
    ParameterSet grads;
    grads["w"] = Tensor({3});
    for (std::size_t i = 0; i < 3; ++i) grads["w"].data[i] = 0.3 * ref[i] + 0.1 * t - 0.2 * i;
    for (std::size_t i = 0; i < 3; ++i) {
      const double g = grads["w"].data[i];
      m[i] = b1 * m[i] + (1 - b1) * g;
      v[i] = b2 * v[i] + (1 - b2) * g * g;
      const double mh = m[i] / (1 - std::pow(b1, t));
      const double vh = v[i] / (1 - std::pow(b2, t));
      ref[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
    adam.step(params, grads, lr);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(params["w"].data[i], ref[i], 1e-12);
  }
  EXPECT_EQ(adam.steps(), 5u);
}

TEST(Adam, FirstStepMovesEachParameterByLearningRate) {
  ParameterSet params;
  params["w"] = Tensor({2});
  ParameterSet grads;
  grads["w"] = Tensor({2});
  grads["w"].data = {3.0, -0.5};
  Adam adam;
  adam.step(params, grads, 0.1);
  EXPECT_NEAR(params["w"].data[0], -0.1, 1e-8);
  EXPECT_NEAR(params["w"].data[1], 0.1, 1e-7);
}

TEST(Adam, ZeroLearningRateLeavesParameters) {
  ParameterSet params;
  params["w"] = Tensor({2});
  params["w"].data = {1.0, 2.0};
  ParameterSet grads = params;
  Adam adam;
  adam.step(params, grads, 0.0);
  EXPECT_EQ(params["w"].data, (std::vector<double>{1.0, 2.0}));
}

TEST(TrainConfig, ValidationAndJson) {
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.dropout_p = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.seed = 99;
  c.freeze_encoder = true;
  c.epochs = 4;
  const auto back = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(TrainConfig{}.batch_size, 32u);
  EXPECT_DOUBLE_EQ(TrainConfig{}.learning_rate, 2e-5);
}

TEST(Trainer, HeadSchemeMismatchRejected) {
  const auto corpus = fixtures::separable_corpus(LabelScheme::davidson(), 12, 1);
  auto model = fixtures::mini_classifier(corpus, {});
  model.scheme.classes.push_back("extra");
  EXPECT_THROW(Trainer(model, TrainConfig{}), Error);
}

TEST(Trainer, HistoryHasOneRowPerEpoch) {
  const auto train_set = fixtures::separable_corpus(LabelScheme::davidson(), 24, 2);
  const auto valid_set = fixtures::separable_corpus(LabelScheme::davidson(), 6, 3, 1000);
  auto model = fixtures::mini_classifier(train_set, {.kind = HeadKind::kLinear});
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.max_len = 16;
  std::vector<std::size_t> seen;
  auto [ckpt, history] =
      train(model, train_set, valid_set, cfg, [&](const EpochRecord& r) { seen.push_back(r.epoch); });
  ASSERT_EQ(history.epochs.size(), 3u);
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(ckpt.epoch, 3u);
  for (const auto& r : history.epochs) {
    EXPECT_TRUE(std::isfinite(r.train_loss));
    EXPECT_TRUE(std::isfinite(r.val_loss));
    EXPECT_GE(r.val_f1, 0.0);
    EXPECT_LE(r.val_f1, 1.0);
  }
  testing::TempDir tmp;
  history.write_csv(tmp.path() / "history.csv");
  const auto text = testing::read_text(tmp.path() / "history.csv");
  EXPECT_EQ(text.rfind("epoch,train_loss,val_loss,val_f1\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}

TEST(Trainer, SameSeedIsBitIdentical) {
  const auto train_set = fixtures::separable_corpus(LabelScheme::waseem(), 18, 4);
  const auto valid_set = fixtures::separable_corpus(LabelScheme::waseem(), 6, 5, 1000);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.max_len = 16;
  cfg.seed = 17;
  auto run = [&] {
    auto model = fixtures::mini_classifier(train_set, {.kind = HeadKind::kBiLstm, .seed = 3});
    return train(model, train_set, valid_set, cfg);
  };
  auto [a, ha] = run();
  auto [b, hb] = run();
  EXPECT_EQ(checksum(a.encoder_params), checksum(b.encoder_params));
  EXPECT_EQ(checksum(a.head_params), checksum(b.head_params));
  EXPECT_EQ(a.rng_state, b.rng_state);
  for (std::size_t i = 0; i < ha.epochs.size(); ++i) {
    EXPECT_EQ(ha.epochs[i].train_loss, hb.epochs[i].train_loss);
    EXPECT_EQ(ha.epochs[i].val_f1, hb.epochs[i].val_f1);
  }
}

TEST(Trainer, DifferentSeedsDiverge) {
  const auto train_set = fixtures::separable_corpus(LabelScheme::davidson(), 18, 4);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_len = 16;
  cfg.learning_rate = 1e-3;
  std::vector<std::uint64_t> sums;
  for (std::uint64_t seed : {1u, 2u}) {
    auto model = fixtures::mini_classifier(train_set, {.kind = HeadKind::kMlp});
    cfg.seed = seed;
    Trainer trainer(model, cfg);
    trainer.run_epoch(examples_for(model, train_set));
    sums.push_back(checksum(model.head->params()));
  }
  EXPECT_NE(sums[0], sums[1]);
}

TEST(Trainer, EvaluateNeverMutatesParameters) {
  const auto corpus = fixtures::separable_corpus(LabelScheme::davidson(), 12, 6);
  auto model = fixtures::mini_classifier(corpus, {.kind = HeadKind::kCnn});
  const auto enc = checksum(model.encoder.params());
  const auto head = checksum(model.head->params());
  const auto r1 = evaluate(model, examples_for(model, corpus), corpus.scheme());
  const auto r2 = evaluate(model, examples_for(model, corpus), corpus.scheme());
  EXPECT_EQ(checksum(model.encoder.params()), enc);
  EXPECT_EQ(checksum(model.head->params()), head);
  EXPECT_EQ(r1.loss, r2.loss);
  EXPECT_EQ(r1.weighted_f1, r2.weighted_f1);
}

TEST(Trainer, FrozenEncoderIsUntouched) {
  const auto corpus = fixtures::separable_corpus(LabelScheme::davidson(), 16, 7);
  auto model = fixtures::mini_classifier(corpus, {.kind = HeadKind::kLinear});
  const auto enc = checksum(model.encoder.params());
  const auto head = checksum(model.head->params());
  auto cfg = fixtures::relaxed_config(3);
  cfg.freeze_encoder = true;
  Trainer trainer(model, cfg);
  trainer.run_epoch(examples_for(model, corpus));
  EXPECT_EQ(checksum(model.encoder.params()), enc);
  EXPECT_NE(checksum(model.head->params()), head);
}

TEST(Trainer, LossDecreasesOnSeparableData) {
  const auto corpus = fixtures::separable_corpus(LabelScheme::davidson(), 24, 8);
  for (auto kind : {HeadKind::kLinear, HeadKind::kMlp, HeadKind::kBiLstm, HeadKind::kCnn}) {
    auto model = fixtures::mini_classifier(corpus, {.kind = kind, .dropout = 0.0});
    const auto examples = examples_for(model, corpus);
    const double before = evaluate(model, examples, corpus.scheme()).loss;
    Trainer trainer(model, fixtures::relaxed_config(11));
    for (int e = 0; e < 15; ++e) trainer.run_epoch(examples);
    const double after = evaluate(model, examples, corpus.scheme()).loss;
    EXPECT_LT(after, before) << head_kind_name(kind);
    EXPECT_EQ(trainer.epochs_done(), 15u);
  }
}

TEST(Trainer, NonFiniteParametersAbort) {
  const auto corpus = fixtures::separable_corpus(LabelScheme::davidson(), 8, 9);
  auto model = fixtures::mini_classifier(corpus, {});
  model.head->params().begin()->second.data[0] = std::nan("");
  Trainer trainer(model, fixtures::relaxed_config(1));
  try {
    trainer.run_epoch(examples_for(model, corpus));
    FAIL() << "expected NonFiniteLoss";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteLoss);
  }
}

TEST(Checkpoint, RoundTripGivesIdenticalOutputs) {
  const auto corpus = fixtures::separable_corpus(LabelScheme::davidson(), 12, 10);
  for (auto kind : {HeadKind::kLinear, HeadKind::kMlp, HeadKind::kBiLstm, HeadKind::kCnn}) {
    auto model = fixtures::mini_classifier(corpus, {.kind = kind, .mlp_hidden = 16});
    Trainer trainer(model, fixtures::relaxed_config(2));
    trainer.run_epoch(examples_for(model, corpus));
    testing::TempDir tmp;
    save_checkpoint(tmp.path(), trainer.checkpoint());
    const Classifier restored = load_checkpoint(tmp.path(), kind).restore();
    EXPECT_EQ(restored.vocab.tokens(), model.vocab.tokens());
    EXPECT_EQ(restored.scheme.classes, model.scheme.classes);
    for (const auto& r : corpus.records()) {
      const auto seq = model.encode(r.normalized_text, 16);
      const auto a = model.classify(seq);
      const auto b = restored.classify(restored.encode(r.normalized_text, 16));
      for (std::size_t c = 0; c < a.size(); ++c) EXPECT_EQ(a[c], b[c]);
    }
  }
}

TEST(Checkpoint, HeadKindMismatch) {
  const auto corpus = fixtures::separable_corpus(LabelScheme::davidson(), 6, 11);
  auto model = fixtures::mini_classifier(corpus, {.kind = HeadKind::kLinear});
  Trainer trainer(model, fixtures::relaxed_config(2));
  testing::TempDir tmp;
  save_checkpoint(tmp.path(), trainer.checkpoint());
  try {
    load_checkpoint(tmp.path(), HeadKind::kCnn);
    FAIL() << "expected VersionMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVersionMismatch);
  }
}

TEST(Checkpoint, LegacyVersionRejectedWithBothVersions) {
  try {
    load_checkpoint(testing::fixture("checkpoint_legacy"));
    FAIL() << "expected VersionMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVersionMismatch);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("version 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("expected 1"), std::string::npos) << msg;
  }
}

TEST(Checkpoint, MissingDirectory) {
  EXPECT_THROW(load_checkpoint("/nonexistent/checkpoint"), Error);
}

}  // namespace
}  // namespace hsd
