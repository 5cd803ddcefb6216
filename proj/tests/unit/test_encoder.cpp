#include <cmath>

#include "hsd/archive.hpp"
#include "hsd/encoder.hpp"
#include "hsd/error.hpp"
#include "hsd/rng.hpp"
#include "hsd/text_prep.hpp"
#include "support.hpp"

namespace hsd {
namespace {

using testing::fixture;
using testing::TempDir;

Vocabulary toy_vocab() {
  return Vocabulary({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "not", "sex", "##ist"});
}

Vocabulary numbered_vocab(std::size_t size) {
  std::vector<std::string> tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  for (int i = 0; tokens.size() < size; ++i) tokens.push_back("w" + std::to_string(i));
  return Vocabulary(tokens);
}

TEST(Tokenize, ToyVocabularyTrace) {
  const auto v = toy_vocab();
  const auto seq = tokenize("not sexist", v);
  ASSERT_EQ(seq.length(), 64u);
  EXPECT_EQ(seq.content_length, 5u);
  const std::vector<std::int32_t> head = {2, 4, 5, 6, 3};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(seq.ids[i], head[i]);
  for (std::size_t i = 5; i < 64; ++i) EXPECT_EQ(seq.ids[i], 0);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(seq.attention_mask[i], i < 5 ? 1 : 0);
}

TEST(Tokenize, EmptyText) {
  const auto v = toy_vocab();
  const auto seq = tokenize("", v);
  EXPECT_EQ(seq.content_length, 2u);
  EXPECT_EQ(seq.ids[0], v.cls_id());
  EXPECT_EQ(seq.ids[1], v.sep_id());
  for (std::size_t i = 2; i < 64; ++i) EXPECT_EQ(seq.ids[i], v.pad_id());
}

TEST(Tokenize, TruncationKeepsHead) {
  const auto v = toy_vocab();
  std::string text;
  for (int i = 0; i < 50; ++i) text += "sexist ";  // 100 subwords
  const auto seq = tokenize(text, v);
  EXPECT_EQ(seq.content_length, 64u);
  EXPECT_EQ(seq.ids[63], v.sep_id());
  EXPECT_EQ(seq.ids[1], 5);
  EXPECT_EQ(seq.ids[2], 6);
  for (auto m : seq.attention_mask) EXPECT_EQ(m, 1);
}

TEST(Tokenize, UnknownPiecesBecomeUnk) {
  const auto v = toy_vocab();
  EXPECT_EQ(wordpiece("sexy", v), (std::vector<std::int32_t>{v.unk_id()}));
  EXPECT_EQ(wordpiece(std::string(101, 'a'), v), (std::vector<std::int32_t>{v.unk_id()}));
  EXPECT_EQ(wordpiece("not  sexist", v), (std::vector<std::int32_t>{4, 5, 6}));
}

TEST(Vocabulary, RequiresSpecialTokens) {
  EXPECT_THROW(Vocabulary({"[UNK]", "[PAD]", "[CLS]", "[SEP]"}), Error);
  EXPECT_THROW(Vocabulary({"[PAD]", "[CLS]", "[SEP]"}), Error);
}

TEST(Vocabulary, PlaceholdersUseUnusedSlots) {
  Vocabulary v({"[PAD]", "[unused0]", "[unused1]", "[UNK]", "[CLS]", "[SEP]", "x"});
  const std::vector<std::string> ph = {"<user>", "<url>"};
  EXPECT_EQ(v.register_placeholders(ph, false), 0u);
  EXPECT_EQ(v.find("<user>"), 1);
  EXPECT_EQ(v.find("<url>"), 2);
  EXPECT_EQ(v.size(), 7u);
  const std::vector<std::string> more = {"<number>"};
  EXPECT_THROW(v.register_placeholders(more, false), Error);
  EXPECT_EQ(v.register_placeholders(more, true), 1u);
  EXPECT_EQ(v.find("<number>"), 7);
}

TEST(Vocabulary, BuildKeepsPlaceholdersAtomic) {
  const std::vector<std::string> texts = {"<user> hello world", "hello <url> again", "hello"};
  const auto ph = Placeholders{}.all();
  const auto v = Vocabulary::build(texts, ph, 200);
  const auto seq = tokenize("<user> hello zzz", v);
  EXPECT_EQ(seq.ids[1], *v.find("<user>"));
  EXPECT_EQ(seq.ids[2], *v.find("hello"));
  // unseen word falls back to letter pieces, never [UNK]
  EXPECT_EQ(v.token(seq.ids[3]), "z");
  EXPECT_EQ(v.token(seq.ids[4]), "##z");
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  TempDir dir;
  const auto v = toy_vocab();
  v.save(dir / "vocab.txt");
  EXPECT_EQ(Vocabulary::load(dir / "vocab.txt").tokens(), v.tokens());
}

TEST(Encoder, OutputShape) {
  const auto v = numbered_vocab(64);
  const auto enc = build_mini(EncoderConfig::mini(v.size(), 7));
  const auto states = enc.forward(tokenize("w1 w2", v));
  EXPECT_EQ(states.layers(), 2u);
  EXPECT_EQ(states.seq(), 64u);
  EXPECT_EQ(states.hidden(), 16u);
}

TEST(Encoder, BuildIsDeterministic) {
  const auto c = EncoderConfig::mini(64, 7);
  EXPECT_EQ(build_mini(c).params(), build_mini(c).params());
  auto other = c;
  other.seed = 8;
  EXPECT_NE(checksum(build_mini(other).params()), checksum(build_mini(c).params()));
}

std::size_t closed_form_count(std::size_t V, std::size_t P, std::size_t T, std::size_t H,
                              std::size_t I, std::size_t L) {
  const std::size_t embeddings = V * H + P * H + T * H + 2 * H;
  const std::size_t attention = 4 * (H * H + H) + 2 * H;
  const std::size_t ffn = H * I + I + I * H + H + 2 * H;
  return embeddings + L * (attention + ffn);
}

TEST(Encoder, ParameterCountClosedForm) {
  const auto c = EncoderConfig::mini(64, 7);
  const std::size_t expected = closed_form_count(64, 64, 2, 16, 64, 2);
  EXPECT_EQ(encoder_parameter_count(c), expected);
  EXPECT_EQ(build_mini(c).parameter_count(), expected);
}

TEST(Encoder, BaseParameterCountNearOneHundredTenMillion) {
  const auto base = EncoderConfig::base();
  const std::size_t n = encoder_parameter_count(base);
  EXPECT_EQ(n, closed_form_count(30522, 512, 2, 768, 3072, 12));
  EXPECT_NEAR(static_cast<double>(n), 1.10e8, 0.02 * 1.10e8);
}

TEST(Encoder, AllPaddingInputIsFinite) {
  const auto v = numbered_vocab(64);
  const auto states = build_mini(EncoderConfig::mini(v.size(), 7)).forward(tokenize("", v));
  EXPECT_TRUE(states.values.all_finite());
}

TEST(Encoder, MaskInvariance) {
  const auto v = numbered_vocab(64);
  const auto enc = build_mini(EncoderConfig::mini(v.size(), 3));
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    auto seq = tokenize("w3 w9 w12 w30 w5", v);
    const auto base = enc.forward(seq);
    for (std::size_t i = seq.content_length; i < seq.length(); ++i) {
      seq.ids[i] = static_cast<std::int32_t>(rng.uniform_index(v.size()));
    }
    const auto perturbed = enc.forward(seq);
    for (std::size_t l = 0; l < 2; ++l) {
      for (std::size_t p = 0; p < seq.content_length; ++p) {
        for (std::size_t h = 0; h < 16; ++h) {
          ASSERT_EQ(base.values.data[(l * 64 + p) * 16 + h],
                    perturbed.values.data[(l * 64 + p) * 16 + h]);
        }
      }
    }
  }
}

TEST(Encoder, ForwardDeterministicAndBatchConsistent) {
  const auto v = numbered_vocab(64);
  const auto enc = build_mini(EncoderConfig::mini(v.size(), 7));
  const std::vector<TokenSequence> batch = {tokenize("w1 w2", v), tokenize("w9", v)};
  const auto out = enc.forward(std::span<const TokenSequence>(batch));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].values, enc.forward(batch[0]).values);
  EXPECT_EQ(out[1].values, enc.forward(batch[1]).values);
}

TEST(Encoder, RandomInputsStayFinite) {
  const auto v = numbered_vocab(64);
  const auto enc = build_mini(EncoderConfig::mini(v.size(), 7));
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    std::string text;
    const auto n = rng.uniform_index(70);
    for (std::size_t i = 0; i < n; ++i) text += "w" + std::to_string(rng.uniform_index(59)) + " ";
    ASSERT_TRUE(enc.forward(tokenize(text, v)).values.all_finite());
  }
}

TEST(Encoder, Float32InferenceIsClose) {
  const auto v = numbered_vocab(64);
  auto enc = build_mini(EncoderConfig::mini(v.size(), 7));
  const auto seq = tokenize("w1 w2 w3", v);
  const auto full = enc.forward(seq);
  enc.set_inference_precision(32);
  const auto reduced = enc.forward(seq);
  double worst = 0.0;
  for (std::size_t i = 0; i < full.values.numel(); ++i) {
    worst = std::max(worst, std::abs(full.values.data[i] - reduced.values.data[i]));
  }
  EXPECT_LT(worst, 1e-4);
}

// Weights, probe and states written once by make_encoder_golden.
TEST(EncoderGolden, SeedSevenParametersAndStates) {
  const auto dir = fixture("encoder/mini_seed7");
  const auto vocab = Vocabulary::load(dir / "vocab.txt");
  const auto enc = build_mini(EncoderConfig::mini(vocab.size(), 7));
  EXPECT_EQ(enc.params(), read_archive(dir / "weights").tensors);

  const auto golden = read_archive(dir / "states");
  const auto seq = tokenize("w1 w2 w3 w40 w7 w1", vocab);
  EXPECT_EQ(nlohmann::json(seq.ids), golden.meta["ids"]);
  const auto states = enc.forward(seq);
  EXPECT_EQ(states.values, golden.tensors.at("states"));
  EXPECT_EQ(checksum(states.values.data), 14339224209936429316ULL);
}

// The same weights run through the HuggingFace BertModel in float64.
TEST(EncoderGolden, AgreesWithReferenceBert) {
  const auto dir = fixture("encoder/mini_seed7");
  const auto vocab = Vocabulary::load(dir / "vocab.txt");
  const auto enc = build_mini(EncoderConfig::mini(vocab.size(), 7));
  const auto states = enc.forward(tokenize("w1 w2 w3 w40 w7 w1", vocab));
  const auto ref = read_archive(dir / "hf_states");
  const auto& expected = ref.tensors.at("states");
  const std::size_t n = expected.dim(1);
  for (std::size_t l = 0; l < 2; ++l) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t h = 0; h < 16; ++h) {
        EXPECT_NEAR(states.values.data[(l * 64 + p) * 16 + h],
                    expected.data[(l * n + p) * 16 + h], 1e-12);
      }
    }
  }
}

TEST(LoadPretrained, ForeignBertArchiveMatchesReference) {
  const auto dir = fixture("encoder/tiny_hf");
  const auto ph = Placeholders{}.all();
  const auto backend = load_pretrained(dir / "weights", dir / "vocab.txt", ph, std::nullopt);
  const auto& c = backend.encoder.config();
  EXPECT_EQ(c.num_layers, 3u);
  EXPECT_EQ(c.hidden_size, 24u);
  EXPECT_EQ(c.num_heads, 3u);
  EXPECT_EQ(backend.encoder.params().count("pooler.dense.weight"), 0u);

  const auto ref = read_archive(dir / "hf_states");
  const auto seq = tokenize(ref.meta["text"].get<std::string>(), backend.vocab,
                            ref.meta["max_len"].get<std::size_t>());
  EXPECT_EQ(nlohmann::json(seq.ids), ref.meta["ids"]);
  const auto states = backend.encoder.forward(seq);
  const auto& expected = ref.tensors.at("states");
  const std::size_t S = seq.length(), n = expected.dim(1), H = 24;
  for (std::size_t l = 0; l < 3; ++l) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t h = 0; h < H; ++h) {
        EXPECT_NEAR(states.values.data[(l * S + p) * H + h], expected.data[(l * n + p) * H + h],
                    1e-10);
      }
    }
  }
}

TEST(LoadPretrained, RejectsNonBaseArchitecture) {
  const auto dir = fixture("encoder/tiny_hf");
  const auto ph = Placeholders{}.all();
  try {
    load_pretrained(dir / "weights", dir / "vocab.txt", ph);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(LoadPretrained, TruncatedArchiveIsMissingTensor) {
  TempDir dir;
  std::filesystem::copy(fixture("encoder/tiny_hf"), dir.path(),
                        std::filesystem::copy_options::recursive);
  const auto bin = dir / "weights/tensors.bin";
  std::filesystem::resize_file(bin, std::filesystem::file_size(bin) / 2);
  const auto ph = Placeholders{}.all();
  try {
    load_pretrained(dir / "weights", dir / "vocab.txt", ph, std::nullopt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingTensor);
  }
}

TEST(LoadPretrained, VocabularySizeMismatch) {
  TempDir dir;
  toy_vocab().save(dir / "vocab.txt");
  const std::vector<std::string> none;
  try {
    load_pretrained(fixture("encoder/tiny_hf/weights"), dir / "vocab.txt", none, std::nullopt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(Gelu, KnownValues) {
  EXPECT_DOUBLE_EQ(gelu(0.0), 0.0);
  EXPECT_NEAR(gelu(1.0), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(gelu(-1.0), -0.15865525393145707, 1e-15);
  const double h = 1e-6;
  for (double x : {-2.0, -0.3, 0.0, 0.7, 3.0}) {
    EXPECT_NEAR(gelu_derivative(x), (gelu(x + h) - gelu(x - h)) / (2 * h), 1e-8);
  }
}

}  // namespace
}  // namespace hsd
