#include "hsd/commands.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "hsd/csv.hpp"
#include "hsd/error.hpp"

namespace hsd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void check_scheme(const Checkpoint& ckpt, const RunConfig& config) {
  if (ckpt.scheme != config.scheme()) {
    throw Error(ErrorCode::kSchemeMismatch, "checkpoint was trained on scheme " + ckpt.scheme.name +
                                                " but the dataset is " + config.dataset);
  }
}

}  // namespace

void cmd_prep(std::istream& in, std::ostream& out, const std::string& text_col,
              const NormalizerConfig& config) {
  config.validate();
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) throw Error(ErrorCode::kEmptyFile, "input has no header row");
  const auto col = csv::find_column(header->fields, text_col);
  if (!col) throw Error(ErrorCode::kMissingColumn, "missing text column '" + text_col + "'");
  csv::write_row(out, header->fields);
  while (auto row = reader.next()) {
    if (row->fields.size() == 1 && row->fields[0].empty()) continue;
    if (row->fields.size() != header->fields.size()) {
      throw Error(ErrorCode::kMalformedRow,
                  "line " + std::to_string(row->line) + ": expected " +
                      std::to_string(header->fields.size()) + " fields, got " +
                      std::to_string(row->fields.size()));
    }
    row->fields[*col] = normalize(row->fields[*col], config).text;
    csv::write_row(out, row->fields);
  }
}

void cmd_prep(const fs::path& in_path, const fs::path& out_path, const std::string& text_col,
              const NormalizerConfig& config) {
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot read " + in_path.string());
  auto out = open_out(out_path);
  cmd_prep(in, out, text_col, config);
}

std::string format_split_table(const LabelScheme& scheme, const SplitResult& split) {
  const std::array<const Corpus*, 3> parts = {&split.train, &split.validation, &split.test};
  const std::array<const char*, 3> titles = {"Train", "Validation", "Test"};
  std::vector<std::string> header = {""};
  for (const auto& c : scheme.classes) {
    std::string t = c;
    t[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
    header.push_back(t);
  }
  header.push_back("Total");

  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> totals(scheme.num_classes(), 0);
  for (std::size_t s = 0; s < 3; ++s) {
    const auto counts = class_counts(*parts[s]);
    std::vector<std::string> row = {titles[s]};
    std::size_t sum = 0;
    for (std::size_t c = 0; c < scheme.num_classes(); ++c) {
      row.push_back(std::to_string(counts[c]));
      totals[c] += counts[c];
      sum += counts[c];
    }
    row.push_back(std::to_string(sum));
    rows.push_back(row);
  }
  std::vector<std::string> total_row = {"Total"};
  for (auto t : totals) total_row.push_back(std::to_string(t));
  total_row.push_back("");
  rows.push_back(total_row);

  std::vector<std::size_t> width(header.size(), 0);
  auto widen = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  };
  widen(header);
  for (const auto& r : rows) widen(r);

  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i == 0) {
        os << std::left << std::setw(static_cast<int>(width[i])) << r[i];
      } else {
        os << "  " << std::right << std::setw(static_cast<int>(width[i])) << r[i];
      }
    }
    os << '\n';
  };
  emit(header);
  for (const auto& r : rows) emit(r);
  return os.str();
}

SplitResult cmd_split(const RunConfig& config, std::ostream& out) {
  config.validate();
  const Corpus corpus = load_dataset(config);
  SplitResult split = stratified_split(corpus, config.split);
  const fs::path dir = config.out / "manifests";
  fs::create_directories(dir);
  write_manifest(dir / "train.csv", split.train, "train");
  write_manifest(dir / "validation.csv", split.validation, "validation");
  write_manifest(dir / "test.csv", split.test, "test");
  out << format_split_table(corpus.scheme(), split);
  return split;
}

namespace {

Classifier build_classifier(const RunConfig& config, const Corpus& train_set) {
  const auto& ph = config.normalizer.placeholders.all();
  if (config.backend.kind == "pretrained") {
    std::optional<Architecture> expected;
    if (config.backend.expect_base) expected = Architecture::base();
    auto backend = load_pretrained(config.backend.weights, config.backend.vocab, ph, expected);
    const auto& ec = backend.encoder.config();
    auto head = Head::create(config.head, ec.num_layers, ec.hidden_size);
    return Classifier{"pretrained", config.scheme(), std::move(backend.vocab),
                      std::move(backend.encoder), std::move(head)};
  }
  std::vector<std::string> texts;
  texts.reserve(train_set.size());
  for (const auto& r : train_set.records()) texts.push_back(r.normalized_text);
  Vocabulary vocab = Vocabulary::build(texts, ph, config.backend.mini_vocab_size);
  EncoderConfig ec = config.backend.mini;
  ec.vocab_size = vocab.size();
  ec.max_len = config.train.max_len;
  Encoder encoder = build_mini(ec);
  auto head = Head::create(config.head, ec.num_layers, ec.hidden_size);
  return Classifier{"mini", config.scheme(), std::move(vocab), std::move(encoder), std::move(head)};
}

}  // namespace

TrainOutcome cmd_train(const RunConfig& config, std::ostream& log) {
  config.validate();
  const int precision = pipeline_precision();
  fs::create_directories(config.out);
  write_json(config.out / "resolved_config.json", config.to_json());

  std::vector<std::string> load_log;
  const Corpus corpus = load_dataset(config, &load_log);
  for (const auto& line : load_log) log << json{{"event", "load"}, {"detail", line}}.dump() << '\n';
  const SplitResult split = stratified_split(corpus, config.split);
  const fs::path manifests = config.out / "manifests";
  fs::create_directories(manifests);
  write_manifest(manifests / "train.csv", split.train, "train");
  write_manifest(manifests / "validation.csv", split.validation, "validation");
  write_manifest(manifests / "test.csv", split.test, "test");

  Classifier model = build_classifier(config, split.train);
  model.encoder.set_inference_precision(precision);

  TrainOutcome outcome;
  outcome.encoder_checksum_before = checksum(model.encoder.params());
  auto epoch_log = open_out(config.out / "train_log.jsonl");
  auto on_epoch = [&](const EpochRecord& r) {
    const std::string line = json{{"event", "epoch"},
                                  {"epoch", r.epoch},
                                  {"train_loss", r.train_loss},
                                  {"val_loss", r.val_loss},
                                  {"val_f1", r.val_f1}}
                                 .dump();
    epoch_log << line << '\n';
    log << line << '\n';
  };
  auto [checkpoint, history] = train(model, split.train, split.validation, config.train, on_epoch);
  outcome.encoder_checksum_after = checksum(checkpoint.encoder_params);
  save_checkpoint(config.out / "checkpoint", checkpoint);
  history.write_csv(config.out / "history.csv");
  outcome.checkpoint = std::move(checkpoint);
  outcome.history = std::move(history);
  return outcome;
}

MetricsReport cmd_eval(const RunConfig& config, const fs::path& checkpoint_dir,
                       const fs::path& manifest_path, const fs::path& report_dir,
                       std::ostream& log) {
  config.validate();
  const int precision = pipeline_precision();
  const Checkpoint ckpt = load_checkpoint(checkpoint_dir);
  check_scheme(ckpt, config);
  const auto rows = read_manifest(manifest_path);
  const Corpus corpus = load_dataset(config);
  const Corpus selected = select_manifest(corpus, rows);

  Classifier model = ckpt.restore();
  model.encoder.set_inference_precision(precision);
  std::vector<std::size_t> preds, golds;
  std::vector<std::vector<double>> probs;
  preds.reserve(selected.size());
  for (const auto& r : selected.records()) {
    const auto p = model.classify(model.encode(r.normalized_text, ckpt.train_config.max_len));
    preds.push_back(predict(p));
    golds.push_back(r.label);
    probs.emplace_back(p.probs.data(), p.probs.data() + p.probs.size());
  }
  const MetricsReport report = metrics(preds, golds, selected.scheme());
  const ConfusionMatrix matrix = confusion(preds, golds, selected.scheme());
  const auto errors = error_table(selected, preds, probs, config.limit_errors);
  render_report(report, matrix, errors, selected.scheme(), report_dir);
  log << json{{"event", "eval"},
              {"records", selected.size()},
              {"accuracy", report.accuracy},
              {"weighted_f1", report.weighted.f1}}
             .dump()
      << '\n';
  return report;
}

std::optional<ReferenceScores> reference_scores(HeadKind head, const std::string& dataset) {
  const bool waseem = dataset == "waseem";
  if (!waseem && dataset != "davidson") return std::nullopt;
  switch (head) {
    case HeadKind::kLinear:
      return waseem ? ReferenceScores{81, 81, 81} : ReferenceScores{91, 91, 91};
    case HeadKind::kMlp:
      return waseem ? ReferenceScores{73, 85, 76} : ReferenceScores{76, 78, 77};
    case HeadKind::kBiLstm:
      return waseem ? ReferenceScores{87, 86, 86} : ReferenceScores{91, 92, 92};
    case HeadKind::kCnn:
      return waseem ? ReferenceScores{89, 87, 88} : ReferenceScores{92, 92, 92};
  }
  return std::nullopt;
}

void cmd_report(const fs::path& metrics_path, HeadKind head, const std::string& dataset,
                std::ostream& out) {
  std::ifstream in(metrics_path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot read " + metrics_path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, metrics_path.string() + " is not JSON: " + e.what());
  }
  const MetricsReport report = MetricsReport::from_json(j);
  const auto ref = reference_scores(head, dataset);
  out << std::fixed << std::setprecision(2);
  out << "method: " << head_kind_name(head) << ", dataset: " << dataset << '\n';
  out << "             precision  recall  f1\n";
  out << "measured  " << std::setw(12) << 100 * report.weighted.precision << std::setw(8)
      << 100 * report.weighted.recall << std::setw(6) << 100 * report.weighted.f1 << '\n';
  if (ref) {
    out << "published " << std::setw(12) << ref->precision << std::setw(8) << ref->recall
        << std::setw(6) << ref->f1 << '\n';
    out << "f1 gap    " << std::setw(26) << 100 * report.weighted.f1 - ref->f1 << '\n';
  } else {
    out << "published    (none for this dataset)\n";
  }
}

}  // namespace hsd::cli
