#include "hsd/run_config.hpp"

#include <cstdlib>
#include <fstream>

#include "hsd/error.hpp"

namespace hsd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return base / path;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base) {
  RunConfig c;
  try {
    c.dataset = j.value("dataset", c.dataset);
    if (j.contains("inputs")) {
      for (const auto& in : j.at("inputs")) {
        c.inputs.push_back({resolve(base, in.at("path").get<std::string>()),
                            in.value("variant", c.dataset == "waseem" ? "waseem16" : "davidson")});
      }
    }
    if (j.contains("columns")) {
      const auto& col = j.at("columns");
      c.columns_set = true;
      c.columns.id_col = col.value("id_col", "");
      c.columns.text_col = col.value("text_col", "");
      c.columns.label_col = col.value("label_col", "");
      c.columns.class_code_col = col.value("class_code_col", "");
    }
    if (j.contains("normalizer")) {
      const auto& n = j.at("normalizer");
      c.normalizer.elongation_run_threshold =
          n.value("elongation_run_threshold", c.normalizer.elongation_run_threshold);
      c.normalizer.lowercase = n.value("lowercase", c.normalizer.lowercase);
      if (n.contains("lexicon")) c.lexicon = resolve(base, n.at("lexicon").get<std::string>());
      if (n.contains("placeholders")) {
        const auto& p = n.at("placeholders");
        auto& ph = c.normalizer.placeholders;
        ph.user = p.value("user", ph.user);
        ph.number = p.value("number", ph.number);
        ph.hashtag = p.value("hashtag", ph.hashtag);
        ph.url = p.value("url", ph.url);
        ph.emoticon = p.value("emoticon", ph.emoticon);
      }
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      c.split.seed = s.value("seed", c.split.seed);
      if (s.contains("ratios")) c.split.ratios = s.at("ratios").get<std::array<double, 3>>();
    }
    if (j.contains("backend")) {
      const auto& b = j.at("backend");
      c.backend.kind = b.value("kind", c.backend.kind);
      c.backend.weights = resolve(base, b.value("weights", ""));
      c.backend.vocab = resolve(base, b.value("vocab", ""));
      c.backend.expect_base = b.value("expect_base", c.backend.expect_base);
      c.backend.mini_vocab_size = b.value("mini_vocab_size", c.backend.mini_vocab_size);
      if (b.contains("mini")) c.backend.mini = EncoderConfig::from_json(b.at("mini"));
    }
    if (j.contains("head")) c.head = HeadConfig::from_json(j.at("head"));
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
    if (j.contains("out")) c.out = resolve(base, j.at("out").get<std::string>());
    c.limit_errors = j.value("limit_errors", c.limit_errors);
    if (j.contains("seed")) c.set_seed(j.at("seed").get<std::uint64_t>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("bad run config: ") + e.what());
  }
  if (!c.lexicon.empty()) {
    c.normalizer.lexicon = std::make_shared<Lexicon>(Lexicon::load(c.lexicon));
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, "config " + path.string() + " is not JSON: " + e.what());
  }
  return from_json(j, path.parent_path());
}

json RunConfig::to_json() const {
  json inputs_j = json::array();
  for (const auto& in : inputs) inputs_j.push_back({{"path", in.path.string()}, {"variant", in.variant}});
  const auto col = effective_columns();
  const auto& ph = normalizer.placeholders;
  json mini = backend.mini.to_json();
  return {
      {"dataset", dataset},
      {"inputs", inputs_j},
      {"columns",
       {{"id_col", col.id_col},
        {"text_col", col.text_col},
        {"label_col", col.label_col},
        {"class_code_col", col.class_code_col}}},
      {"normalizer",
       {{"elongation_run_threshold", normalizer.elongation_run_threshold},
        {"lowercase", normalizer.lowercase},
        {"lexicon", lexicon.string()},
        {"placeholders",
         {{"user", ph.user},
          {"number", ph.number},
          {"hashtag", ph.hashtag},
          {"url", ph.url},
          {"emoticon", ph.emoticon}}}}},
      {"split", {{"seed", split.seed}, {"ratios", split.ratios}}},
      {"backend",
       {{"kind", backend.kind},
        {"weights", backend.weights.string()},
        {"vocab", backend.vocab.string()},
        {"expect_base", backend.expect_base},
        {"mini_vocab_size", backend.mini_vocab_size},
        {"mini", mini}}},
      {"head", head.to_json()},
      {"train", train.to_json()},
      {"out", out.string()},
      {"limit_errors", limit_errors},
  };
}

ColumnConfig RunConfig::effective_columns() const {
  if (columns_set) return columns;
  return dataset == "waseem" ? ColumnConfig::waseem_defaults() : ColumnConfig::davidson_defaults();
}

void RunConfig::set_seed(std::uint64_t seed) {
  split.seed = seed;
  train.seed = seed;
  head.seed = seed;
  backend.mini.seed = seed;
}

void RunConfig::validate(bool need_inputs) const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidConfig, m); };
  const auto s = scheme();
  if (need_inputs) {
    if (inputs.empty()) fail("no input files configured");
    for (const auto& in : inputs) {
      if (!fs::exists(in.path)) fail("input file " + in.path.string() + " does not exist");
      if (dataset == "waseem" && in.variant != "hovy16" && in.variant != "waseem16") {
        fail("waseem inputs need variant hovy16 or waseem16");
      }
      if (dataset == "davidson" && in.variant != "davidson") fail("davidson inputs need variant davidson");
    }
  }
  if (head.num_classes != s.num_classes()) {
    fail("head has " + std::to_string(head.num_classes) + " classes, scheme " + s.name + " has " +
         std::to_string(s.num_classes()));
  }
  if (backend.kind != "mini" && backend.kind != "pretrained") {
    fail("backend must be mini or pretrained");
  }
  if (backend.kind == "pretrained") {
    if (!fs::exists(backend.weights)) fail("weights " + backend.weights.string() + " do not exist");
    if (!fs::exists(backend.vocab)) fail("vocabulary " + backend.vocab.string() + " does not exist");
  }
  normalizer.validate();
  split.validate();
  head.validate();
  train.validate();
}

Corpus load_dataset(const RunConfig& config, std::vector<std::string>* log) {
  const auto columns = config.effective_columns();
  std::optional<Corpus> corpus;
  for (const auto& in : config.inputs) {
    LoadStats stats;
    Corpus part = config.dataset == "waseem"
                      ? load_waseem(in.path, parse_waseem_variant(in.variant), columns, &stats)
                      : load_davidson(in.path, columns, &stats);
    if (log) {
      log->push_back(in.path.string() + ": " + std::to_string(stats.rows) + " rows, " +
                     std::to_string(stats.dropped_both) + " dropped as both, " +
                     std::to_string(stats.duplicate_ids) + " duplicate ids");
    }
    if (!corpus) {
      corpus = std::move(part);
    } else {
      MergeStats ms;
      corpus = merge_corpora(*corpus, part, &ms);
      if (log) {
        log->push_back("merged " + in.path.string() + ": " + std::to_string(ms.duplicates) +
                       " duplicate ids, " + std::to_string(ms.label_conflicts) +
                       " label conflicts");
      }
    }
  }
  if (!corpus) throw Error(ErrorCode::kInvalidConfig, "no input files configured");
  for (auto& r : corpus->mutable_records()) {
    r.normalized_text = normalize(r.raw_text, config.normalizer).text;
  }
  return std::move(*corpus);
}

int pipeline_precision() {
  const char* v = std::getenv("PIPELINE_PRECISION");
  if (!v || !*v) return 64;
  const std::string s(v);
  if (s == "64") return 64;
  if (s == "32") return 32;
  throw Error(ErrorCode::kInvalidConfig, "PIPELINE_PRECISION must be 32 or 64, got " + s);
}

}  // namespace hsd
