// SPDX-License-Identifier: Apache-2.0
//
// chemix: dataset statistics, SMILES encoding, fingerprints, training,
// evaluation and prediction for multi-input property models.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "chemix/data.hpp"
#include "chemix/trainer.hpp"

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;
using namespace chemix;

namespace {

/// Plain line logger: mirrors every line to stderr and a log file. No
/// timestamps, so identical runs produce identical logs.
class RunLog {
 public:
  explicit RunLog(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw std::runtime_error("cannot write log file " + path);
    }
  }
  void line(const std::string& s) {
    std::cerr << s << '\n';
    if (file_.is_open()) file_ << s << '\n';
  }

 private:
  std::ofstream file_;
};

struct DataFlags {
  std::string path;
  std::string smiles_col = "smiles";
  std::string target_col;
  std::string id_col;
  std::string fingerprints;  // optional sidecar CSV

  void attach(CLI::App* cmd, bool need_target) {
    cmd->add_option("--data", path, "dataset CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--smiles-col", smiles_col, "SMILES column name");
    auto* t = cmd->add_option("--target-col", target_col, "target column name");
    if (need_target) t->required();
    cmd->add_option("--id-col", id_col, "id column name (default: row index)");
    cmd->add_option("--fingerprints", fingerprints, "sidecar fingerprint CSV joined on id")
        ->check(CLI::ExistingFile);
  }

  std::vector<DatasetRecord> load(RunLog& log) const {
    auto records = load_dataset(path, {smiles_col, target_col, id_col});
    log.line("loaded " + std::to_string(records.size()) + " records from " + path);
    if (!fingerprints.empty()) {
      const auto by_id = import_fingerprints(fingerprints);
      attach_fingerprints(records, by_id, /*require_all=*/true);
      log.line("attached imported fingerprints from " + fingerprints);
    }
    return records;
  }
};

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::string format_g17(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int run_stats(const DataFlags& data, const std::string& out_path) {
  RunLog log(out_path + ".log");
  const auto records = data.load(log);
  const DatasetStats stats = dataset_stats(records);
  json j;
  j["dataset"] = data.path;
  j["records"] = stats.record_count;
  j["vocab_size"] = stats.vocab_size;
  j["max_sequence_length"] = stats.max_sequence_length;
  if (stats.class_balance) j["class_balance"] = *stats.class_balance;
  write_json(out_path, j);
  const std::string line = "vocab_size=" + std::to_string(stats.vocab_size) +
                           " max_sequence_length=" + std::to_string(stats.max_sequence_length) +
                           " records=" + std::to_string(stats.record_count);
  log.line(line);
  std::cout << line << '\n';
  return 0;
}

int run_encode(const DataFlags& data, Index max_len_flag, const std::string& vocab_out,
               const std::string& out_path) {
  RunLog log(out_path + ".log");
  const auto records = data.load(log);
  std::vector<std::string> corpus;
  corpus.reserve(records.size());
  for (const auto& r : records) corpus.push_back(r.smiles);
  const Vocabulary vocab = Vocabulary::build(corpus);
  Index max_len = 0;
  for (const auto& r : records) max_len = std::max(max_len, static_cast<Index>(r.smiles.size()));
  if (max_len_flag > 0) {
    if (max_len_flag < max_len)
      throw TooLong("--max-len " + std::to_string(max_len_flag) +
                    " is below the longest string (" + std::to_string(max_len) + ")");
    max_len = max_len_flag;
  }
  if (!vocab_out.empty()) {
    vocab.save(vocab_out);
    log.line("wrote vocabulary (" + std::to_string(vocab.size()) + " symbols) to " + vocab_out);
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  for (const auto& r : records) {
    const OneHotSequence seq = encode_one_hot(r.smiles, vocab, max_len);
    json j;
    j["id"] = r.id;
    j["true_length"] = seq.true_length;
    j["max_len"] = seq.max_len;
    j["vocab_size"] = vocab.size();
    j["indices"] = encode_indices(r.smiles, vocab, max_len);  // one-hot column = index - 1
    out << j.dump() << '\n';
  }
  log.line("encoded " + std::to_string(records.size()) + " sequences (max_len " +
           std::to_string(max_len) + ", vocab " + std::to_string(vocab.size()) + ") to " +
           out_path);
  return 0;
}

int run_fingerprint(const std::string& single, const DataFlags& data,
                    const std::string& out_path) {
  RunLog log(out_path.empty() ? "" : out_path + ".log");
  std::vector<std::pair<std::string, FingerprintVector>> rows;
  if (!single.empty()) {
    rows.emplace_back("input", compute_keys(parse_smiles(single)));
    std::cout << rows.back().second.to_bitstring() << '\n';
  } else {
    const auto records = data.load(log);
    for (const auto& r : records) rows.emplace_back(r.id, compute_keys(parse_smiles(r.smiles)));
  }
  if (!out_path.empty()) {
    write_fingerprints(out_path, rows);
    log.line("wrote " + std::to_string(rows.size()) + " fingerprints to " + out_path);
  }
  return 0;
}

MetricKind metric_for(const ArchitectureSpec& spec) {
  return spec.task == Task::Classification ? MetricKind::Auc : MetricKind::Mape;
}

int run_train(const DataFlags& data, const std::string& arch_path, std::uint64_t seed,
              Index batch_size, Index epochs, Index patience, Scalar lr, bool balance,
              bool no_standardize, Index max_len_flag, const std::string& out_dir) {
  fs::create_directories(out_dir);
  RunLog log(out_dir + "/run.log");
  const ArchitectureSpec spec = load_arch_config(arch_path);
  log.line("family " + family_to_string(spec.family) + ", task " + task_to_string(spec.task));

  auto records = data.load(log);
  if (balance) {
    records = undersample_majority(records, seed);
    log.line("balanced classes by undersampling: " + std::to_string(records.size()) +
             " records remain");
  }
  if (spec.needs_fingerprint() && data.fingerprints.empty()) {
    compute_missing_fingerprints(records);
    log.line("computed fingerprints for all records (no sidecar given)");
  }

  std::vector<std::string> corpus;
  for (const auto& r : records) corpus.push_back(r.smiles);
  const Vocabulary vocab = Vocabulary::build(corpus);
  Index max_len = 0;
  for (const auto& r : records) max_len = std::max(max_len, static_cast<Index>(r.smiles.size()));
  if (max_len_flag > 0) max_len = std::max(max_len, max_len_flag);
  log.line("vocab_size=" + std::to_string(vocab.size()) + " max_len=" + std::to_string(max_len));

  const DatasetSplit split = split_dataset(records, seed);
  log.line("split: train=" + std::to_string(split.train.size()) +
           " val=" + std::to_string(split.validation.size()) +
           " test=" + std::to_string(split.test.size()) + " (seed " + std::to_string(seed) + ")");

  ModelInstance model = build_model(spec, vocab.size(), max_len, seed);
  log.line("parameters: " + std::to_string(model.actual_parameter_count()));

  TrainingConfig config;
  config.learning_rate = lr;
  config.batch_size = batch_size;
  config.max_epochs = epochs;
  config.early_stop_patience = patience;
  config.seed = seed;
  config.normalization =
      spec.task == Task::Regression && !no_standardize ? TargetNorm::Standardize : TargetNorm::None;

  const TrainOutcome outcome = train(model, vocab, split, config);
  for (const EpochRecord& e : outcome.history.epochs)
    log.line("epoch " + std::to_string(e.epoch) + ": train_loss=" + format_g17(e.train_loss) +
             " val_loss=" + format_g17(e.val_loss) + " val_metric=" + format_g17(e.val_metric));
  log.line("best_epoch=" + std::to_string(outcome.history.best_epoch) +
           " stopped_epoch=" + std::to_string(outcome.history.stopped_epoch));

  outcome.history.save_csv(out_dir + "/history.csv");
  save_checkpoint(out_dir + "/checkpoint.ckpt", model, vocab, outcome.scaler, config);

  const MetricKind metric = metric_for(spec);
  const EvaluationReport report =
      evaluate(model, vocab, split.test, metric, outcome.scaler, data.path, seed);

  json j;
  j["dataset"] = data.path;
  j["family"] = family_to_string(spec.family);
  j["task"] = task_to_string(spec.task);
  j["seed"] = seed;
  j["n_train"] = split.train.size();
  j["n_validation"] = split.validation.size();
  j["n_test"] = split.test.size();
  j["vocab_size"] = vocab.size();
  j["max_len"] = max_len;
  j["parameters"] = model.actual_parameter_count();
  j["best_epoch"] = outcome.history.best_epoch;
  j["stopped_epoch"] = outcome.history.stopped_epoch;
  j["metric"] = metric == MetricKind::Auc ? "auc" : "mape";
  j["test_metric"] = report.value;
  j["checkpoint"] = out_dir + "/checkpoint.ckpt";
  j["history"] = out_dir + "/history.csv";
  write_json(out_dir + "/result.json", j);
  log.line("test " + std::string(metric == MetricKind::Auc ? "auc" : "mape") + " = " +
           format_g17(report.value));
  std::cout << "test_" << (metric == MetricKind::Auc ? "auc" : "mape") << "="
            << format_g17(report.value) << '\n';
  return 0;
}

int run_evaluate(const DataFlags& data, const std::string& ckpt_path,
                 const std::string& metric_flag, const std::string& out_path) {
  RunLog log(out_path + ".log");
  const CheckpointData ckpt = load_checkpoint(ckpt_path);
  log.line("loaded checkpoint: family " + family_to_string(ckpt.model.spec.family));
  auto records = data.load(log);
  if (ckpt.model.spec.needs_fingerprint() && data.fingerprints.empty()) {
    compute_missing_fingerprints(records);
    log.line("computed fingerprints for all records (no sidecar given)");
  }
  MetricKind metric = metric_for(ckpt.model.spec);
  if (metric_flag == "mape") metric = MetricKind::Mape;
  else if (metric_flag == "auc") metric = MetricKind::Auc;
  else if (!metric_flag.empty()) throw std::runtime_error("unknown metric " + metric_flag);

  const EvaluationReport report = evaluate(ckpt.model, ckpt.vocab, records, metric, ckpt.scaler,
                                           data.path, ckpt.config.seed);
  json j;
  j["dataset"] = report.dataset;
  j["metric"] = metric == MetricKind::Auc ? "auc" : "mape";
  j["value"] = report.value;
  j["n_test"] = report.n_test;
  j["seed"] = report.seed;
  write_json(out_path, j);
  const std::string line = std::string(metric == MetricKind::Auc ? "auc" : "mape") + "=" +
                           format_g17(report.value) + " n=" + std::to_string(report.n_test);
  log.line(line);
  std::cout << line << '\n';
  return 0;
}

int run_predict(const DataFlags& data, const std::string& ckpt_path, const std::string& out_path) {
  RunLog log(out_path + ".log");
  const CheckpointData ckpt = load_checkpoint(ckpt_path);
  auto records = data.load(log);
  if (ckpt.model.spec.needs_fingerprint() && data.fingerprints.empty()) {
    compute_missing_fingerprints(records);
    log.line("computed fingerprints for all records (no sidecar given)");
  }
  const auto preds = predict(ckpt.model, ckpt.vocab, records, ckpt.scaler);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << "id,prediction\n";
  for (std::size_t i = 0; i < records.size(); ++i)
    out << records[i].id << ',' << format_g17(preds[i]) << '\n';
  log.line("wrote " + std::to_string(preds.size()) + " predictions to " + out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-input molecular property models over SMILES and MACCS fingerprints"};
  app.require_subcommand(1);

  // stats
  DataFlags stats_data;
  std::string stats_out = "stats.json";
  auto* stats_cmd = app.add_subcommand("stats", "vocabulary / length statistics of a dataset");
  stats_data.attach(stats_cmd, /*need_target=*/false);
  stats_cmd->add_option("--out", stats_out, "result JSON path");

  // encode
  DataFlags enc_data;
  std::string enc_out = "encoded.jsonl";
  std::string vocab_out;
  Index enc_max_len = 0;
  auto* enc_cmd = app.add_subcommand("encode", "one-hot encode SMILES sequences");
  enc_data.attach(enc_cmd, /*need_target=*/false);
  enc_cmd->add_option("--max-len", enc_max_len, "pad/validate to this length");
  enc_cmd->add_option("--vocab-out", vocab_out, "also write the vocabulary file");
  enc_cmd->add_option("--out", enc_out, "output JSON-lines path");

  // fingerprint
  DataFlags fp_data;
  std::string fp_in, fp_out;
  auto* fp_cmd = app.add_subcommand("fingerprint", "compute MACCS-layout fingerprints");
  fp_cmd->add_option("--in", fp_in, "single SMILES string; prints the 167-bit string");
  fp_cmd->add_option("--data", fp_data.path, "dataset CSV")->check(CLI::ExistingFile);
  fp_cmd->add_option("--smiles-col", fp_data.smiles_col, "SMILES column name");
  fp_cmd->add_option("--id-col", fp_data.id_col, "id column name");
  fp_cmd->add_option("--out", fp_out, "output fingerprint CSV path");

  // train
  DataFlags train_data;
  std::string arch_path, train_out = "chemix-run";
  std::uint64_t seed = 0;
  Index batch_size = 32, epochs = 200, patience = 10, train_max_len = 0;
  Scalar lr = 1e-3;
  bool balance = false, no_standardize = false;
  auto* train_cmd = app.add_subcommand("train", "train a model from a dataset and arch config");
  train_data.attach(train_cmd, /*need_target=*/true);
  train_cmd->add_option("--arch", arch_path, "architecture config")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--seed", seed, "run seed (splits, shuffling, init)");
  train_cmd->add_option("--batch-size", batch_size, "mini-batch size");
  train_cmd->add_option("--epochs", epochs, "epoch cap");
  train_cmd->add_option("--patience", patience, "early-stopping patience");
  train_cmd->add_option("--lr", lr, "Adam learning rate");
  train_cmd->add_flag("--balance", balance, "undersample the majority class before splitting");
  train_cmd->add_flag("--no-standardize", no_standardize, "keep raw regression targets");
  train_cmd->add_option("--max-len", train_max_len, "minimum padded length");
  train_cmd->add_option("--out", train_out, "output directory");

  // evaluate
  DataFlags eval_data;
  std::string eval_ckpt, eval_metric, eval_out = "evaluation.json";
  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on a dataset");
  eval_data.attach(eval_cmd, /*need_target=*/true);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--metric", eval_metric, "mape or auc (default: by task)");
  eval_cmd->add_option("--out", eval_out, "result JSON path");

  // predict
  DataFlags pred_data;
  std::string pred_ckpt, pred_out = "predictions.csv";
  auto* pred_cmd = app.add_subcommand("predict", "per-record predictions from a checkpoint");
  pred_data.attach(pred_cmd, /*need_target=*/false);
  pred_cmd->add_option("--checkpoint", pred_ckpt, "checkpoint path")
      ->required()
      ->check(CLI::ExistingFile);
  pred_cmd->add_option("--out", pred_out, "output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);  // prints the message / help text
    return rc == 0 ? 0 : 2;     // 2 on usage errors, 0 for --help
  }

  try {
    if (stats_cmd->parsed()) return run_stats(stats_data, stats_out);
    if (enc_cmd->parsed()) return run_encode(enc_data, enc_max_len, vocab_out, enc_out);
    if (fp_cmd->parsed()) {
      if (fp_in.empty() && fp_data.path.empty())
        throw std::runtime_error("fingerprint needs --in or --data");
      return run_fingerprint(fp_in, fp_data, fp_out);
    }
    if (train_cmd->parsed())
      return run_train(train_data, arch_path, seed, batch_size, epochs, patience, lr, balance,
                       no_standardize, train_max_len, train_out);
    if (eval_cmd->parsed()) return run_evaluate(eval_data, eval_ckpt, eval_metric, eval_out);
    if (pred_cmd->parsed()) return run_predict(pred_data, pred_ckpt, pred_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
