#include "hsd/cli_app.hpp"

#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hsd/commands.hpp"
#include "hsd/error.hpp"

namespace hsd::cli {

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config;
  std::string dataset;
  std::string backend;
  std::string head;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool freeze_encoder = false;
  std::optional<std::size_t> limit_errors;
  std::optional<std::size_t> epochs;
  std::vector<std::string> inputs;
  std::string variant;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run config");
  cmd->add_option("--dataset", o.dataset, "waseem or davidson");
  cmd->add_option("--seed", o.seed, "seed for split, initialization and training");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--input", o.inputs, "input CSV (repeatable, replaces configured inputs)");
  cmd->add_option("--variant", o.variant, "input variant: hovy16, waseem16 or davidson");
}

// Flags win over the JSON config.
RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
  if (!o.dataset.empty()) {
    LabelScheme::by_name(o.dataset);
    c.dataset = o.dataset;
    c.columns_set = false;
  }
  if (!o.inputs.empty()) {
    const std::string variant =
        !o.variant.empty() ? o.variant : (c.dataset == "waseem" ? "waseem16" : "davidson");
    c.inputs.clear();
    for (const auto& p : o.inputs) c.inputs.push_back({p, variant});
  }
  if (!o.backend.empty()) {
    if (o.backend != "mini" && o.backend != "pretrained") {
      throw Error(ErrorCode::kUsage, "unknown backend '" + o.backend + "'");
    }
    c.backend.kind = o.backend;
  }
  if (!o.head.empty()) c.head.kind = parse_head_kind(o.head);
  if (o.seed) c.set_seed(*o.seed);
  if (!o.out.empty()) c.out = o.out;
  if (o.freeze_encoder) c.train.freeze_encoder = true;
  if (o.limit_errors) c.limit_errors = *o.limit_errors;
  if (o.epochs) c.train.epochs = *o.epochs;
  return c;
}

void report_error(std::ostream& err, const std::string& code, const std::string& message) {
  err << nlohmann::json{{"error", code}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Hate speech detection pipeline: prep, split, train, eval, report"};
  app.name("hsd");
  app.require_subcommand(1);

  Overrides o;
  std::string prep_in = "-", prep_out = "-", text_col;
  auto* prep = app.add_subcommand("prep", "normalize the text column of a CSV");
  prep->add_option("--config", o.config, "JSON run config");
  prep->add_option("--dataset", o.dataset, "waseem or davidson (sets the default text column)");
  prep->add_option("--in", prep_in, "input CSV, - for stdin");
  prep->add_option("--output", prep_out, "output CSV, - for stdout");
  prep->add_option("--text-col", text_col, "name of the text column");

  std::vector<double> ratios;
  auto* split = app.add_subcommand("split", "write stratified train/validation/test manifests");
  add_common(split, o);
  split->add_option("--ratios", ratios, "train,validation,test fractions")->delimiter(',')->expected(3);

  auto* train = app.add_subcommand("train", "fine-tune a classifier");
  add_common(train, o);
  train->add_option("--backend", o.backend, "mini or pretrained");
  train->add_option("--head", o.head, "linear, mlp, bilstm or cnn");
  train->add_flag("--freeze-encoder", o.freeze_encoder, "train only the head");
  train->add_option("--epochs", o.epochs, "number of epochs");

  std::string checkpoint, manifest, report_dir;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
  add_common(eval, o);
  eval->add_option("--checkpoint", checkpoint, "checkpoint directory (default <out>/checkpoint)");
  eval->add_option("--manifest", manifest, "split manifest (default <out>/manifests/test.csv)");
  eval->add_option("--report-dir", report_dir, "report directory (default <out>/report)");
  eval->add_option("--limit-errors", o.limit_errors, "number of error cases to list");

  std::string metrics_path, report_head = "cnn", report_dataset = "davidson";
  auto* report = app.add_subcommand("report", "compare metrics.json with published scores");
  report->add_option("--metrics", metrics_path, "metrics.json from eval")->required();
  report->add_option("--head", report_head, "head the metrics belong to");
  report->add_option("--dataset", report_dataset, "waseem or davidson");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error(err, "Usage", e.what());
    return 2;
  }

  try {
    if (prep->parsed()) {
      RunConfig c = resolve(o);
      const std::string col = !text_col.empty() ? text_col : c.effective_columns().text_col;
      if (prep_in == "-" && prep_out == "-") {
        cmd_prep(in, out, col, c.normalizer);
      } else if (prep_in == "-") {
        std::ofstream f(prep_out, std::ios::binary);
        if (!f) throw Error(ErrorCode::kIoFailure, "cannot write " + prep_out);
        cmd_prep(in, f, col, c.normalizer);
      } else if (prep_out == "-") {
        std::ifstream f(prep_in, std::ios::binary);
        if (!f) throw Error(ErrorCode::kIoFailure, "cannot read " + prep_in);
        cmd_prep(f, out, col, c.normalizer);
      } else {
        cmd_prep(fs::path(prep_in), fs::path(prep_out), col, c.normalizer);
      }
    } else if (split->parsed()) {
      RunConfig c = resolve(o);
      if (!ratios.empty()) c.split.ratios = {ratios[0], ratios[1], ratios[2]};
      cmd_split(c, out);
    } else if (train->parsed()) {
      RunConfig c = resolve(o);
      cmd_train(c, out);
    } else if (eval->parsed()) {
      RunConfig c = resolve(o);
      const fs::path ckpt = checkpoint.empty() ? c.out / "checkpoint" : fs::path(checkpoint);
      const fs::path man = manifest.empty() ? c.out / "manifests" / "test.csv" : fs::path(manifest);
      const fs::path rep = report_dir.empty() ? c.out / "report" : fs::path(report_dir);
      cmd_eval(c, ckpt, man, rep, out);
    } else if (report->parsed()) {
      cmd_report(metrics_path, parse_head_kind(report_head), report_dataset, out);
    }
  } catch (const Error& e) {
    report_error(err, e.code_name(), e.what());
    return e.code() == ErrorCode::kUsage ? 2 : 1;
  } catch (const std::exception& e) {
    report_error(err, "Internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace hsd::cli
