#pragma once

// Programmatic corpora and models shared by the trainer, cli and acceptance tests.

#include <memory>
#include <string>
#include <vector>

#include "hsd/corpus.hpp"
#include "hsd/heads.hpp"
#include "hsd/rng.hpp"
#include "hsd/text_prep.hpp"
#include "hsd/trainer.hpp"

namespace hsd::fixtures {

// Every text carries at least one keyword owned by its class, so a bag of
// words separates the classes. Texts are already normalized.
inline Corpus separable_corpus(const LabelScheme& scheme, std::size_t n, std::uint64_t seed,
                               std::size_t id_base = 0) {
  static const std::vector<std::vector<std::string>> keywords = {
      {"alpha", "bravo", "charlie", "delta"},
      {"echo", "foxtrot", "golf", "hotel"},
      {"india", "juliet", "kilo", "lima"}};
  static const std::vector<std::string> filler = {"the", "a", "is", "of", "and", "to", "we"};
  Rng rng(seed);
  std::vector<TweetRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % scheme.num_classes();
    std::vector<std::string> words;
    const auto& own = keywords[label % keywords.size()];
    words.push_back(own[rng.uniform_index(own.size())]);
    const auto extra = 1 + rng.uniform_index(4);
    for (std::size_t k = 0; k < extra; ++k) {
      words.push_back(rng.bernoulli(0.3) ? own[rng.uniform_index(own.size())]
                                         : filler[rng.uniform_index(filler.size())]);
    }
    rng.shuffle(std::span<std::string>(words));
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    records.push_back({std::to_string(id_base + i), text, text, label, "fixture"});
  }
  return Corpus(scheme, std::move(records));
}

struct ModelOptions {
  HeadKind kind = HeadKind::kLinear;
  std::uint64_t seed = 1;
  std::size_t max_len = 16;
  std::size_t mlp_hidden = 768;
  std::size_t cnn_filters = 32;
  double dropout = 0.1;
};

// Mini backend with a vocabulary built from the corpus texts.
inline Classifier mini_classifier(const Corpus& corpus, const ModelOptions& opt) {
  std::vector<std::string> texts;
  for (const auto& r : corpus.records()) texts.push_back(r.normalized_text);
  const auto ph = Placeholders{}.all();
  Vocabulary vocab = Vocabulary::build(texts, ph, 500);
  EncoderConfig ec = EncoderConfig::mini(vocab.size(), opt.seed);
  ec.max_len = opt.max_len;
  HeadConfig hc;
  hc.kind = opt.kind;
  hc.num_classes = corpus.scheme().num_classes();
  hc.mlp_hidden = opt.mlp_hidden;
  hc.cnn_filters = opt.cnn_filters;
  hc.dropout_p = opt.dropout;
  hc.seed = opt.seed;
  Encoder encoder = build_mini(ec);
  auto head = Head::create(hc, ec.num_layers, ec.hidden_size);
  return Classifier{"mini", corpus.scheme(), std::move(vocab), std::move(encoder), std::move(head)};
}

// Larger steps and no dropout, for memorization runs.
inline TrainConfig relaxed_config(std::uint64_t seed) {
  TrainConfig c;
  c.batch_size = 8;
  c.epochs = 200;
  c.learning_rate = 1e-3;
  c.dropout_p = 0.0;
  c.seed = seed;
  c.max_len = 16;
  return c;
}

}  // namespace hsd::fixtures
