#include "hsd/heads.hpp"

#include <algorithm>
#include <cmath>

#include "hsd/archive.hpp"
#include "hsd/error.hpp"

namespace hsd {

using nlohmann::json;

namespace {

Vector dropout_mask(std::size_t n, double p, Rng* rng) {
  Vector mask = Vector::Ones(static_cast<Eigen::Index>(n));
  if (!rng || p <= 0.0) return mask;
  const double keep = 1.0 - p;
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
  return mask;
}

void init_normal(Tensor& t, Rng& rng) {
  for (auto& v : t.data) v = rng.truncated_normal(0.02);
}

// Rows in blocks of `block` are made orthonormal (Gram-Schmidt on normals).
void init_orthogonal_blocks(Tensor& t, std::size_t block, Rng& rng) {
  auto m = t.matrix();
  for (Eigen::Index b0 = 0; b0 < m.rows(); b0 += static_cast<Eigen::Index>(block)) {
    const auto rows = std::min<Eigen::Index>(static_cast<Eigen::Index>(block), m.rows() - b0);
    for (Eigen::Index r = 0; r < rows; ++r) {
      Vector v(m.cols());
      double norm = 0.0;
      do {
        for (Eigen::Index c = 0; c < v.size(); ++c) v(c) = rng.normal();
        for (Eigen::Index q = 0; q < r; ++q) {
          const Vector prev = m.row(b0 + q).transpose();
          v -= prev.dot(v) * prev;
        }
        norm = v.norm();
      } while (norm < 1e-8 && r < m.cols());
      m.row(b0 + r) = (norm > 0.0 ? v / norm : v).transpose();
    }
  }
}

Vector sigmoid(const Vector& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

class LinearHead final : public Head {
 public:
  LinearHead(HeadConfig c, std::size_t layers, std::size_t hidden)
      : Head(std::move(c), layers, hidden) {}

 protected:
  struct Cache {
    Vector input;
    Vector mask;
  };

  std::vector<std::pair<std::string, std::vector<std::size_t>>> layout() const override {
    return {{"out.weight", {config_.num_classes, hidden_}}, {"out.bias", {config_.num_classes}}};
  }

  void initialize(Rng& rng) override { init_normal(params_.at("out.weight"), rng); }

  Vector logits(const EncoderStates& states, std::size_t, Rng* dropout,
                std::any& cache) const override {
    Cache c;
    c.mask = dropout_mask(hidden_, config_.dropout_p, dropout);
    c.input = states.cls().cwiseProduct(c.mask);
    Vector z = params_.at("out.weight").matrix() * c.input + params_.at("out.bias").vector();
    cache = std::move(c);
    return z;
  }

  void backprop(const std::any& cache, const EncoderStates& states, const Vector& d_logits,
                HeadGradients& grads) const override {
    const auto& c = std::any_cast<const Cache&>(cache);
    grads.params.at("out.weight").matrix() += d_logits * c.input.transpose();
    grads.params.at("out.bias").vector() += d_logits;
    const Vector d_in = params_.at("out.weight").matrix().transpose() * d_logits;
    grads.states.layer(states.layers() - 1).row(0) += d_in.cwiseProduct(c.mask).transpose();
  }
};

class MlpHead final : public Head {
 public:
  MlpHead(HeadConfig c, std::size_t layers, std::size_t hidden)
      : Head(std::move(c), layers, hidden) {}

 protected:
  struct Cache {
    Vector mask0, input;
    Vector pre1, mask1, h1;
    Vector pre2, mask2, h2;
  };

  std::vector<std::pair<std::string, std::vector<std::size_t>>> layout() const override {
    const auto m = config_.mlp_hidden, k = config_.num_classes;
    return {{"fc1.weight", {m, hidden_}}, {"fc1.bias", {m}}, {"fc2.weight", {m, m}},
            {"fc2.bias", {m}},            {"out.weight", {k, m}}, {"out.bias", {k}}};
  }

  void initialize(Rng& rng) override {
    for (const char* name : {"fc1.weight", "fc2.weight", "out.weight"}) {
      init_normal(params_.at(name), rng);
    }
  }

  Vector activate(const Vector& v) const {
    return v.unaryExpr([s = config_.leaky_slope](double x) { return leaky_relu(x, s); });
  }
  Vector activate_grad(const Vector& pre, const Vector& d) const {
    const double s = config_.leaky_slope;
    return d.binaryExpr(pre, [s](double g, double x) { return x >= 0.0 ? g : s * g; });
  }

  Vector logits(const EncoderStates& states, std::size_t, Rng* dropout,
                std::any& cache) const override {
    const double p = config_.dropout_p;
    Cache c;
    c.mask0 = dropout_mask(hidden_, p, dropout);
    c.input = states.cls().cwiseProduct(c.mask0);
    c.pre1 = params_.at("fc1.weight").matrix() * c.input + params_.at("fc1.bias").vector();
    c.mask1 = dropout_mask(config_.mlp_hidden, p, dropout);
    c.h1 = activate(c.pre1).cwiseProduct(c.mask1);
    c.pre2 = params_.at("fc2.weight").matrix() * c.h1 + params_.at("fc2.bias").vector();
    c.mask2 = dropout_mask(config_.mlp_hidden, p, dropout);
    c.h2 = activate(c.pre2).cwiseProduct(c.mask2);
    Vector z = params_.at("out.weight").matrix() * c.h2 + params_.at("out.bias").vector();
    cache = std::move(c);
    return z;
  }

  void backprop(const std::any& cache, const EncoderStates& states, const Vector& d_logits,
                HeadGradients& grads) const override {
    const auto& c = std::any_cast<const Cache&>(cache);
    auto& g = grads.params;
    g.at("out.weight").matrix() += d_logits * c.h2.transpose();
    g.at("out.bias").vector() += d_logits;
    const Vector d_h2 = params_.at("out.weight").matrix().transpose() * d_logits;
    const Vector d_pre2 = activate_grad(c.pre2, d_h2.cwiseProduct(c.mask2));
    g.at("fc2.weight").matrix() += d_pre2 * c.h1.transpose();
    g.at("fc2.bias").vector() += d_pre2;
    const Vector d_h1 = params_.at("fc2.weight").matrix().transpose() * d_pre2;
    const Vector d_pre1 = activate_grad(c.pre1, d_h1.cwiseProduct(c.mask1));
    g.at("fc1.weight").matrix() += d_pre1 * c.input.transpose();
    g.at("fc1.bias").vector() += d_pre1;
    const Vector d_in = params_.at("fc1.weight").matrix().transpose() * d_pre1;
    grads.states.layer(states.layers() - 1).row(0) += d_in.cwiseProduct(c.mask0).transpose();
  }
};

class BiLstmHead final : public Head {
 public:
  BiLstmHead(HeadConfig c, std::size_t layers, std::size_t hidden)
      : Head(std::move(c), layers, hidden) {}

 protected:
  struct Step {
    Vector i, f, g, o, c, h;
  };
  struct Direction {
    std::vector<std::size_t> positions;  // visiting order
    std::vector<Step> steps;
  };
  struct Cache {
    std::size_t length = 0;
    Matrix inputs;  // content rows after dropout
    Matrix masks;
    Direction fwd, bwd;
    Vector summary;
  };

  std::size_t units() const { return config_.lstm_hidden ? config_.lstm_hidden : hidden_; }

  std::vector<std::pair<std::string, std::vector<std::size_t>>> layout() const override {
    const auto u = units();
    std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
    for (const char* dir : {"forward", "backward"}) {
      const std::string pre = std::string("lstm.") + dir + ".";
      out.push_back({pre + "w_ih", {4 * u, hidden_}});
      out.push_back({pre + "w_hh", {4 * u, u}});
      out.push_back({pre + "bias", {4 * u}});
    }
    out.push_back({"out.weight", {config_.num_classes, 2 * u}});
    out.push_back({"out.bias", {config_.num_classes}});
    return out;
  }

  void initialize(Rng& rng) override {
    for (const char* dir : {"forward", "backward"}) {
      const std::string pre = std::string("lstm.") + dir + ".";
      init_normal(params_.at(pre + "w_ih"), rng);
      init_orthogonal_blocks(params_.at(pre + "w_hh"), units(), rng);
    }
    init_normal(params_.at("out.weight"), rng);
  }

  void run(const std::string& dir, const Matrix& inputs, Direction& d) const {
    const auto u = static_cast<Eigen::Index>(units());
    const auto w_ih = params_.at("lstm." + dir + ".w_ih").matrix();
    const auto w_hh = params_.at("lstm." + dir + ".w_hh").matrix();
    const auto bias = params_.at("lstm." + dir + ".bias").vector();
    Vector h = Vector::Zero(u), c = Vector::Zero(u);
    d.steps.clear();
    for (auto t : d.positions) {
      const Vector z = w_ih * inputs.row(static_cast<Eigen::Index>(t)).transpose() + w_hh * h + bias;
      Step s;
      s.i = sigmoid(z.segment(0, u));
      s.f = sigmoid(z.segment(u, u));
      s.g = z.segment(2 * u, u).array().tanh().matrix();
      s.o = sigmoid(z.segment(3 * u, u));
      c = s.f.cwiseProduct(c) + s.i.cwiseProduct(s.g);
      h = s.o.cwiseProduct(c.array().tanh().matrix());
      s.c = c;
      s.h = h;
      d.steps.push_back(std::move(s));
    }
  }

  void run_backward(const std::string& dir, const Cache& cache, const Direction& d,
                    Vector d_h, HeadGradients& grads, Matrix& d_inputs) const {
    const auto u = static_cast<Eigen::Index>(units());
    const auto w_ih = params_.at("lstm." + dir + ".w_ih").matrix();
    const auto w_hh = params_.at("lstm." + dir + ".w_hh").matrix();
    auto g_ih = grads.params.at("lstm." + dir + ".w_ih").matrix();
    auto g_hh = grads.params.at("lstm." + dir + ".w_hh").matrix();
    auto g_b = grads.params.at("lstm." + dir + ".bias").vector();
    Vector d_c = Vector::Zero(u);
    for (std::size_t k = d.steps.size(); k-- > 0;) {
      const Step& s = d.steps[k];
      const Vector c_prev = k ? d.steps[k - 1].c : Vector::Zero(u);
      const Vector h_prev = k ? d.steps[k - 1].h : Vector::Zero(u);
      const Vector tanh_c = s.c.array().tanh().matrix();
      const Vector d_o = d_h.cwiseProduct(tanh_c);
      d_c += d_h.cwiseProduct(s.o).cwiseProduct((1.0 - tanh_c.array().square()).matrix());
      Vector dz(4 * u);
      dz.segment(0, u) = d_c.cwiseProduct(s.g).cwiseProduct(s.i.cwiseProduct((1.0 - s.i.array()).matrix()));
      dz.segment(u, u) = d_c.cwiseProduct(c_prev).cwiseProduct(s.f.cwiseProduct((1.0 - s.f.array()).matrix()));
      dz.segment(2 * u, u) = d_c.cwiseProduct(s.i).cwiseProduct((1.0 - s.g.array().square()).matrix());
      dz.segment(3 * u, u) = d_o.cwiseProduct(s.o.cwiseProduct((1.0 - s.o.array()).matrix()));
      const auto row = static_cast<Eigen::Index>(d.positions[k]);
      g_ih += dz * cache.inputs.row(row);
      g_hh += dz * h_prev.transpose();
      g_b += dz;
      d_inputs.row(row) += (w_ih.transpose() * dz).transpose();
      d_h = w_hh.transpose() * dz;
      d_c = d_c.cwiseProduct(s.f);
    }
  }

  Vector logits(const EncoderStates& states, std::size_t content_length, Rng* dropout,
                std::any& cache) const override {
    Cache c;
    c.length = std::clamp<std::size_t>(content_length, 1, states.seq());
    const auto n = static_cast<Eigen::Index>(c.length);
    const auto top = states.layer(states.layers() - 1);
    c.masks.resize(n, static_cast<Eigen::Index>(hidden_));
    for (Eigen::Index t = 0; t < n; ++t) {
      c.masks.row(t) = dropout_mask(hidden_, config_.dropout_p, dropout).transpose();
    }
    c.inputs = top.topRows(n).cwiseProduct(c.masks);
    for (std::size_t t = 0; t < c.length; ++t) {
      c.fwd.positions.push_back(t);
      c.bwd.positions.push_back(c.length - 1 - t);
    }
    run("forward", c.inputs, c.fwd);
    run("backward", c.inputs, c.bwd);
    const auto u = static_cast<Eigen::Index>(units());
    c.summary.resize(2 * u);
    c.summary << c.fwd.steps.back().h, c.bwd.steps.back().h;
    Vector z = params_.at("out.weight").matrix() * c.summary + params_.at("out.bias").vector();
    cache = std::move(c);
    return z;
  }

  void backprop(const std::any& cache, const EncoderStates& states, const Vector& d_logits,
                HeadGradients& grads) const override {
    const auto& c = std::any_cast<const Cache&>(cache);
    grads.params.at("out.weight").matrix() += d_logits * c.summary.transpose();
    grads.params.at("out.bias").vector() += d_logits;
    const Vector d_summary = params_.at("out.weight").matrix().transpose() * d_logits;
    const auto u = static_cast<Eigen::Index>(units());
    Matrix d_inputs = Matrix::Zero(c.inputs.rows(), c.inputs.cols());
    run_backward("forward", c, c.fwd, d_summary.segment(0, u), grads, d_inputs);
    run_backward("backward", c, c.bwd, d_summary.segment(u, u), grads, d_inputs);
    grads.states.layer(states.layers() - 1).topRows(c.inputs.rows()) +=
        d_inputs.cwiseProduct(c.masks);
  }
};

class CnnHead final : public Head {
 public:
  CnnHead(HeadConfig c, std::size_t layers, std::size_t hidden)
      : Head(std::move(c), layers, hidden) {}

 protected:
  struct Cache {
    std::vector<std::size_t> argmax;  // per (layer, filter)
    std::vector<double> conv_at_max;
    Vector pooled;
    Vector mask;
    Vector input;
  };

  std::size_t width() const { return config_.cnn_window * hidden_; }

  std::vector<std::pair<std::string, std::vector<std::size_t>>> layout() const override {
    const auto f = config_.cnn_filters;
    return {{"conv.weight", {f, width()}},
            {"conv.bias", {f}},
            {"out.weight", {config_.num_classes, layers_ * f}},
            {"out.bias", {config_.num_classes}}};
  }

  void initialize(Rng& rng) override {
    init_normal(params_.at("conv.weight"), rng);
    init_normal(params_.at("out.weight"), rng);
  }

  Vector logits(const EncoderStates& states, std::size_t, Rng* dropout,
                std::any& cache) const override {
    const std::size_t w = config_.cnn_window;
    if (states.seq() < w) {
      throw Error(ErrorCode::kShapeMismatch, "sequence shorter than the convolution window");
    }
    const std::size_t F = config_.cnn_filters;
    const std::size_t positions = states.seq() - w + 1;
    const auto kernel = params_.at("conv.weight").matrix();
    const auto kbias = params_.at("conv.bias").vector();
    Cache c;
    c.pooled.resize(static_cast<Eigen::Index>(layers_ * F));
    c.argmax.assign(layers_ * F, 0);
    c.conv_at_max.assign(layers_ * F, 0.0);
    for (std::size_t l = 0; l < layers_; ++l) {
      const double* base = states.values.data.data() + l * states.seq() * hidden_;
      for (std::size_t f = 0; f < F; ++f) {
        double best = 0.0;
        std::size_t best_pos = 0;
        for (std::size_t p = 0; p < positions; ++p) {
          // a window of w consecutive rows is contiguous in row-major storage
          ConstVectorMap window(base + p * hidden_, static_cast<Eigen::Index>(width()));
          const double conv = kernel.row(static_cast<Eigen::Index>(f)).dot(window) +
                              kbias(static_cast<Eigen::Index>(f));
          if (p == 0 || conv > best) {
            best = conv;
            best_pos = p;
          }
        }
        const std::size_t idx = l * F + f;
        c.argmax[idx] = best_pos;
        c.conv_at_max[idx] = best;
        // relu commutes with max
        c.pooled(static_cast<Eigen::Index>(idx)) = config_.cnn_relu ? std::max(best, 0.0) : best;
      }
    }
    c.mask = dropout_mask(layers_ * F, config_.dropout_p, dropout);
    c.input = c.pooled.cwiseProduct(c.mask);
    Vector z = params_.at("out.weight").matrix() * c.input + params_.at("out.bias").vector();
    cache = std::move(c);
    return z;
  }

  void backprop(const std::any& cache, const EncoderStates& states, const Vector& d_logits,
                HeadGradients& grads) const override {
    const auto& c = std::any_cast<const Cache&>(cache);
    grads.params.at("out.weight").matrix() += d_logits * c.input.transpose();
    grads.params.at("out.bias").vector() += d_logits;
    const Vector d_pooled =
        (params_.at("out.weight").matrix().transpose() * d_logits).cwiseProduct(c.mask);
    const std::size_t F = config_.cnn_filters;
    const auto kernel = params_.at("conv.weight").matrix();
    auto g_kernel = grads.params.at("conv.weight").matrix();
    auto g_kbias = grads.params.at("conv.bias").vector();
    const auto W = static_cast<Eigen::Index>(width());
    for (std::size_t l = 0; l < layers_; ++l) {
      const double* base = states.values.data.data() + l * states.seq() * hidden_;
      double* d_base = grads.states.values.data.data() + l * states.seq() * hidden_;
      for (std::size_t f = 0; f < F; ++f) {
        const std::size_t idx = l * F + f;
        if (config_.cnn_relu && !(c.conv_at_max[idx] > 0.0)) continue;
        const double d = d_pooled(static_cast<Eigen::Index>(idx));
        const std::size_t p = c.argmax[idx];
        ConstVectorMap window(base + p * hidden_, W);
        VectorMap d_window(d_base + p * hidden_, W);
        g_kernel.row(static_cast<Eigen::Index>(f)) += d * window.transpose();
        g_kbias(static_cast<Eigen::Index>(f)) += d;
        d_window += d * kernel.row(static_cast<Eigen::Index>(f)).transpose();
      }
    }
  }
};

}  // namespace

const char* head_kind_name(HeadKind kind) {
  switch (kind) {
    case HeadKind::kLinear: return "linear";
    case HeadKind::kMlp: return "mlp";
    case HeadKind::kBiLstm: return "bilstm";
    case HeadKind::kCnn: return "cnn";
  }
  return "?";
}

HeadKind parse_head_kind(const std::string& name) {
  for (auto k : {HeadKind::kLinear, HeadKind::kMlp, HeadKind::kBiLstm, HeadKind::kCnn}) {
    if (name == head_kind_name(k)) return k;
  }
  throw Error(ErrorCode::kUsage, "unknown head kind '" + name +
                                     "' (expected linear, mlp, bilstm or cnn)");
}

void HeadConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidConfig, m); };
  if (num_classes < 2) fail("num_classes must be >= 2");
  if (mlp_hidden < 1 || cnn_filters < 1 || cnn_window < 1) fail("head sizes must be positive");
  if (cnn_window > kDefaultMaxLen) fail("cnn_window must be <= 64");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout_p must be in [0, 1)");
  if (!(leaky_slope >= 0.0)) fail("leaky_slope must be non-negative");
}

json HeadConfig::to_json() const {
  return {{"kind", head_kind_name(kind)}, {"num_classes", num_classes},
          {"mlp_hidden", mlp_hidden},     {"leaky_slope", leaky_slope},
          {"lstm_hidden", lstm_hidden},   {"cnn_filters", cnn_filters},
          {"cnn_window", cnn_window},     {"cnn_relu", cnn_relu},
          {"dropout_p", dropout_p},       {"seed", seed}};
}

HeadConfig HeadConfig::from_json(const json& j) {
  HeadConfig c;
  if (j.contains("kind")) c.kind = parse_head_kind(j.at("kind").get<std::string>());
  c.num_classes = j.value("num_classes", c.num_classes);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
  c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
  c.cnn_filters = j.value("cnn_filters", c.cnn_filters);
  c.cnn_window = j.value("cnn_window", c.cnn_window);
  c.cnn_relu = j.value("cnn_relu", c.cnn_relu);
  c.dropout_p = j.value("dropout_p", c.dropout_p);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {

std::unique_ptr<Head> make_head(const HeadConfig& config, std::size_t layers, std::size_t hidden);

}  // namespace

std::unique_ptr<Head> Head::create(const HeadConfig& config, std::size_t layers,
                                   std::size_t hidden) {
  auto head = make_head(config, layers, hidden);
  for (const auto& [name, shape] : head->layout()) head->params_.emplace(name, Tensor(shape));
  Rng rng(config.seed);
  head->initialize(rng);
  return head;
}

std::unique_ptr<Head> Head::create(const HeadConfig& config, std::size_t layers,
                                   std::size_t hidden, ParameterSet params) {
  auto head = make_head(config, layers, hidden);
  for (const auto& [name, shape] : head->layout()) {
    head->params_.emplace(name, require_tensor(params, name, shape));
  }
  return head;
}

namespace {

std::unique_ptr<Head> make_head(const HeadConfig& config, std::size_t layers, std::size_t hidden) {
  config.validate();
  if (layers < 1 || hidden < 1) {
    throw Error(ErrorCode::kInvalidConfig, "encoder depth and width must be positive");
  }
  switch (config.kind) {
    case HeadKind::kLinear: return std::unique_ptr<Head>(new LinearHead(config, layers, hidden));
    case HeadKind::kMlp: return std::unique_ptr<Head>(new MlpHead(config, layers, hidden));
    case HeadKind::kBiLstm: return std::unique_ptr<Head>(new BiLstmHead(config, layers, hidden));
    case HeadKind::kCnn: return std::unique_ptr<Head>(new CnnHead(config, layers, hidden));
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown head kind");
}

}  // namespace

void Head::set_dropout(double p) {
  HeadConfig next = config_;
  next.dropout_p = p;
  next.validate();
  config_ = next;
}

void Head::check_states(const EncoderStates& states) const {
  if (states.values.rank() != 3 || states.layers() != layers_ || states.hidden() != hidden_) {
    throw Error(ErrorCode::kShapeMismatch,
                "head expects states (" + std::to_string(layers_) + ", *, " +
                    std::to_string(hidden_) + "), got " + shape_string(states.values.shape));
  }
}

HeadOutput Head::forward(const EncoderStates& states, std::size_t content_length,
                         Rng* dropout) const {
  check_states(states);
  HeadOutput out;
  out.logits = logits(states, content_length, dropout, out.cache);
  out.probs.probs = softmax(out.logits);
  return out;
}

HeadGradients Head::backward(const HeadOutput& out, const EncoderStates& states,
                             const Vector& d_logits) const {
  check_states(states);
  if (static_cast<std::size_t>(d_logits.size()) != config_.num_classes) {
    throw Error(ErrorCode::kShapeMismatch, "logit gradient has wrong length");
  }
  HeadGradients grads;
  grads.params = zeros_like(params_);
  grads.states = EncoderStates(states.layers(), states.seq(), states.hidden());
  backprop(out.cache, states, d_logits, grads);
  return grads;
}

HeadGradients Head::backward(const HeadOutput& out, const EncoderStates& states,
                             std::size_t target) const {
  Vector d = out.probs.probs;
  d(static_cast<Eigen::Index>(target)) -= 1.0;
  return backward(out, states, d);
}

Vector softmax(const Vector& logits) {
  const double mx = logits.maxCoeff();
  Vector e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

double leaky_relu(double x, double slope) { return x >= 0.0 ? x : slope * x; }

std::size_t predict(const ClassProbs& probs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

}  // namespace hsd
