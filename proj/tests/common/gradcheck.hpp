#pragma once

// Central finite-difference check of the analytic gradients of
// cross-entropy(head(encoder(ids))) with respect to head and encoder parameters.

#include <algorithm>
#include <cmath>
#include <string>

#include "hsd/encoder.hpp"
#include "hsd/heads.hpp"
#include "hsd/rng.hpp"
#include "hsd/trainer.hpp"

namespace hsd::gradcheck {

struct Options {
  std::size_t layers = 2;
  std::size_t hidden = 16;
  std::size_t heads = 2;
  std::size_t seq = 8;
  std::size_t classes = 3;
  std::size_t vocab = 24;
  double eps = 1e-5;
  // Relative error denominator floor. Structurally zero gradients (key
  // biases, for one) come out of the difference quotient as roundoff of about
  // 1e-10, so components below the floor are held to an absolute 1e-9.
  double floor = 1e-5;
  // Encoder components sampled per instance; 0 checks all of them.
  std::size_t encoder_samples = 0;
};

struct Result {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Parameters far from initialization so that every path carries gradient.
inline void scramble(ParameterSet& params, Rng& rng, double scale) {
  for (auto& [name, t] : params) {
    const bool gain = name.size() >= 16 && name.compare(name.size() - 16, 16, "LayerNorm.weight") == 0;
    for (auto& v : t.data) v = (gain ? 1.0 : 0.0) + scale * rng.normal();
  }
}

inline Result check(HeadKind kind, std::uint64_t seed, const Options& opt = {}) {
  Rng rng(seed);
  EncoderConfig ec;
  ec.num_layers = opt.layers;
  ec.hidden_size = opt.hidden;
  ec.num_heads = opt.heads;
  ec.max_len = opt.seq;
  ec.vocab_size = opt.vocab;
  ec.seed = seed;
  Encoder encoder = build_mini(ec);
  scramble(encoder.params(), rng, 0.3);

  HeadConfig hc;
  hc.kind = kind;
  hc.num_classes = opt.classes;
  hc.mlp_hidden = 12;
  hc.lstm_hidden = 6;
  hc.cnn_filters = 4;
  hc.cnn_window = 3;
  hc.dropout_p = 0.0;
  hc.seed = seed;
  auto head = Head::create(hc, opt.layers, opt.hidden);
  scramble(head->params(), rng, 0.5);

  TokenSequence seq;
  seq.content_length = 3 + rng.uniform_index(opt.seq - 2);
  for (std::size_t i = 0; i < opt.seq; ++i) {
    const bool content = i < seq.content_length;
    seq.ids.push_back(content ? static_cast<std::int32_t>(4 + rng.uniform_index(opt.vocab - 4)) : 0);
    seq.attention_mask.push_back(content ? 1 : 0);
  }
  const auto target = static_cast<std::size_t>(rng.uniform_index(opt.classes));

  // Exact log-softmax loss. cross_entropy floors probabilities at 1e-12,
  // which flattens the loss on confidently wrong instances.
  auto loss = [&] {
    const auto states = encoder.forward(seq);
    const Vector z = head->forward(states, seq.content_length).logits;
    const double top = z.maxCoeff();
    return top + std::log((z.array() - top).exp().sum()) - z(static_cast<Eigen::Index>(target));
  };

  EncoderCache cache;
  const auto states = encoder.forward(seq, cache);
  const auto out = head->forward(states, seq.content_length);
  auto grads = head->backward(out, states, target);
  ParameterSet enc_grads = zeros_like(encoder.params());
  encoder.backward(cache, grads.states, enc_grads);

  Result r;
  auto probe = [&](const std::string& where, double& value, double analytic) {
    const double saved = value;
    value = saved + opt.eps;
    const double up = loss();
    value = saved - opt.eps;
    const double down = loss();
    value = saved;
    const double numeric = (up - down) / (2 * opt.eps);
    const double err = relative_error(analytic, numeric, opt.floor);
    ++r.checked;
    if (err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst = where + " analytic=" + std::to_string(analytic) +
                " numeric=" + std::to_string(numeric);
    }
  };

  for (auto& [name, t] : head->params()) {
    const auto& g = grads.params.at(name);
    for (std::size_t i = 0; i < t.numel(); ++i) {
      probe("head " + name + "[" + std::to_string(i) + "]", t.data[i], g.data[i]);
    }
  }

  std::vector<std::pair<std::string, std::size_t>> slots;
  for (const auto& [name, t] : encoder.params()) {
    for (std::size_t i = 0; i < t.numel(); ++i) slots.emplace_back(name, i);
  }
  if (opt.encoder_samples && opt.encoder_samples < slots.size()) {
    rng.shuffle(std::span<std::pair<std::string, std::size_t>>(slots));
    slots.resize(opt.encoder_samples);
  }
  for (const auto& [name, i] : slots) {
    probe("encoder " + name + "[" + std::to_string(i) + "]", encoder.params().at(name).data[i],
          enc_grads.at(name).data[i]);
  }
  return r;
}

}  // namespace hsd::gradcheck
