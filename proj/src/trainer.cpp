// SPDX-License-Identifier: Apache-2.0
#include "chemix/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "chemix/optimizer.hpp"
#include "chemix/rng.hpp"

namespace chemix {

namespace {

std::string format_scalar(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct EncodedRecord {
  std::vector<int> indices;
  const FingerprintVector* fingerprint = nullptr;
  Scalar raw_target = 0;
};

std::vector<EncodedRecord> encode_records(const std::vector<DatasetRecord>& records,
                                          const Vocabulary& vocab, Index max_len,
                                          bool need_fp) {
  std::vector<EncodedRecord> out;
  out.reserve(records.size());
  for (const DatasetRecord& r : records) {
    EncodedRecord e;
    e.indices = encode_indices(r.smiles, vocab, max_len);
    if (need_fp) {
      if (!r.fingerprint)
        throw MissingFingerprints("record '" + r.id + "' has no fingerprint");
      e.fingerprint = &*r.fingerprint;
    }
    e.raw_target = r.target;
    out.push_back(std::move(e));
  }
  return out;
}

struct TrainGraph {
  std::unique_ptr<ComputeGraph> graph;
  NodeRef seq, fp, target, output, loss;
};

TrainGraph make_train_graph(const ModelInstance& model, Index batch) {
  BuiltGraph bg = model.build_forward(batch);
  TrainGraph tg;
  tg.graph = std::move(bg.graph);
  tg.seq = bg.seq_input;
  tg.fp = bg.fp_input;
  tg.output = bg.output;
  tg.target = tg.graph->input("target", {batch, 1});
  tg.loss = model.spec.task == Task::Classification ? bce_loss(tg.output, tg.target)
                                                    : mse_loss(tg.output, tg.target);
  return tg;
}

class BatchBuffers {
 public:
  BatchBuffers(const ModelInstance& model, bool with_target)
      : needs_seq_(model.spec.needs_sequence()),
        needs_fp_(model.spec.needs_fingerprint()),
        max_len_(model.max_len),
        with_target_(with_target) {}

  /// Fills tensors for records[order[begin..end)] and returns the bindings.
  std::map<std::string, const Tensor*> fill(const std::vector<EncodedRecord>& records,
                                            const std::vector<std::size_t>& order,
                                            std::size_t begin, std::size_t end,
                                            const TargetScaler& scaler) {
    const Index batch = static_cast<Index>(end - begin);
    std::map<std::string, const Tensor*> bindings;
    if (needs_seq_) {
      if (seq_.shape() != Shape{batch, max_len_}) seq_ = Tensor({batch, max_len_});
      for (Index b = 0; b < batch; ++b) {
        const auto& idx = records[order[begin + static_cast<std::size_t>(b)]].indices;
        for (Index i = 0; i < max_len_; ++i)
          seq_[b * max_len_ + i] = static_cast<Scalar>(idx[static_cast<std::size_t>(i)]);
      }
      bindings["seq"] = &seq_;
    }
    if (needs_fp_) {
      if (fp_.shape() != Shape{batch, kFingerprintWidth}) fp_ = Tensor({batch, kFingerprintWidth});
      for (Index b = 0; b < batch; ++b) {
        const FingerprintVector& v = *records[order[begin + static_cast<std::size_t>(b)]].fingerprint;
        for (Index i = 0; i < kFingerprintWidth; ++i)
          fp_[b * kFingerprintWidth + i] = v.bit(static_cast<int>(i)) ? 1.0 : 0.0;
      }
      bindings["fp"] = &fp_;
    }
    if (with_target_) {
      if (target_.shape() != Shape{batch, 1}) target_ = Tensor({batch, 1});
      for (Index b = 0; b < batch; ++b)
        target_[b] = scaler.apply(records[order[begin + static_cast<std::size_t>(b)]].raw_target);
      bindings["target"] = &target_;
    }
    return bindings;
  }

 private:
  bool needs_seq_, needs_fp_;
  Index max_len_;
  bool with_target_;
  Tensor seq_, fp_, target_;
};

std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  return order;
}

/// Full pass: mean loss over the list plus raw-scale predictions.
struct EvalPass {
  Scalar loss = 0;
  std::vector<Scalar> predictions;  // de-standardized
};

EvalPass eval_records(const ModelInstance& model, std::map<Index, TrainGraph>& cache,
                      BatchBuffers& buffers, const std::vector<EncodedRecord>& records,
                      const TargetScaler& scaler, Index batch_size) {
  EvalPass out;
  const std::vector<std::size_t> order = identity_order(records.size());
  Scalar loss_sum = 0;
  for (std::size_t begin = 0; begin < records.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(records.size(), begin + static_cast<std::size_t>(batch_size));
    const Index batch = static_cast<Index>(end - begin);
    auto it = cache.find(batch);
    if (it == cache.end()) it = cache.emplace(batch, make_train_graph(model, batch)).first;
    TrainGraph& tg = it->second;
    const auto bindings = buffers.fill(records, order, begin, end, scaler);
    tg.graph->forward(model.params, bindings);
    loss_sum += tg.graph->value(tg.loss)[0] * static_cast<Scalar>(batch);
    const Tensor& pred = tg.graph->value(tg.output);
    for (Index b = 0; b < batch; ++b) out.predictions.push_back(scaler.invert(pred[b]));
  }
  out.loss = loss_sum / static_cast<Scalar>(records.size());
  return out;
}

Scalar validation_metric(const ModelInstance& model, const EvalPass& pass,
                         const std::vector<EncodedRecord>& records) {
  std::vector<Scalar> targets;
  targets.reserve(records.size());
  for (const EncodedRecord& r : records) targets.push_back(r.raw_target);
  try {
    if (model.spec.task == Task::Classification) return auc(pass.predictions, targets);
    return mape(pass.predictions, targets);
  } catch (const MetricError&) {
    return std::numeric_limits<Scalar>::quiet_NaN();  // e.g. single-class validation batch
  }
}

}  // namespace

std::string TrainingHistory::to_csv() const {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss,val_metric\n";
  for (const EpochRecord& e : epochs)
    os << e.epoch << ',' << format_scalar(e.train_loss) << ',' << format_scalar(e.val_loss)
       << ',' << format_scalar(e.val_metric) << '\n';
  return os.str();
}

void TrainingHistory::save_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TrainerError("cannot write history file " + path);
  out << to_csv();
}

TrainOutcome train(ModelInstance& model, const Vocabulary& vocab, const DatasetSplit& split,
                   const TrainingConfig& config) {
  if (split.train.empty() || split.validation.empty())
    throw TrainerError("degenerate split: train and validation must be non-empty");
  if (config.batch_size < 1 || config.early_stop_patience < 1 || config.max_epochs < 1)
    throw TrainerError("batch_size, patience and max_epochs must be >= 1");

  const bool classification = model.spec.task == Task::Classification;
  TargetScaler scaler;
  if (!classification && config.normalization == TargetNorm::Standardize) {
    Scalar mean = 0;
    for (const DatasetRecord& r : split.train) mean += r.target;
    mean /= static_cast<Scalar>(split.train.size());
    Scalar var = 0;
    for (const DatasetRecord& r : split.train) var += (r.target - mean) * (r.target - mean);
    var /= static_cast<Scalar>(split.train.size());
    scaler.mean = mean;
    scaler.stddev = var > 1e-24 ? std::sqrt(var) : 1.0;
  }

  const bool need_fp = model.spec.needs_fingerprint();
  const auto train_enc = encode_records(split.train, vocab, model.max_len, need_fp);
  const auto val_enc = encode_records(split.validation, vocab, model.max_len, need_fp);

  std::map<Index, TrainGraph> cache;
  BatchBuffers buffers(model, /*with_target=*/true);

  AdamState adam(model.params, config.learning_rate);
  for (const std::string& name : model.frozen_row0) adam.pin_row_zero(name);

  SplitMix64 order_rng(config.seed);
  std::vector<std::size_t> order = identity_order(train_enc.size());

  TrainingHistory history;
  ParamMap best_params = model.params;
  Scalar best_val = std::numeric_limits<Scalar>::infinity();
  Index epochs_without_improvement = 0;

  for (Index epoch = 1; epoch <= config.max_epochs; ++epoch) {
    deterministic_shuffle(order, order_rng);
    Scalar loss_sum = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      const Index batch = static_cast<Index>(end - begin);
      auto it = cache.find(batch);
      if (it == cache.end()) it = cache.emplace(batch, make_train_graph(model, batch)).first;
      TrainGraph& tg = it->second;
      const auto bindings = buffers.fill(train_enc, order, begin, end, scaler);
      try {
        tg.graph->forward(model.params, bindings);
        const Scalar loss = tg.graph->value(tg.loss)[0];
        tg.graph->backward(tg.loss);
        adam.step(model.params, *tg.graph);
        loss_sum += loss * static_cast<Scalar>(batch);
      } catch (const NonFiniteValue& e) {
        throw NonFiniteLoss("epoch " + std::to_string(epoch) + ", batch at record " +
                            std::to_string(begin) + ": " + e.what());
      } catch (const NonFiniteGradient& e) {
        throw NonFiniteLoss("epoch " + std::to_string(epoch) + ", batch at record " +
                            std::to_string(begin) + ": " + e.what());
      }
    }

    const EvalPass val = eval_records(model, cache, buffers, val_enc, scaler, config.batch_size);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<Scalar>(train_enc.size());
    rec.val_loss = val.loss;
    rec.val_metric = validation_metric(model, val, val_enc);
    history.epochs.push_back(rec);
    history.stopped_epoch = epoch;

    if (val.loss < best_val) {
      best_val = val.loss;
      best_params = model.params;
      history.best_epoch = epoch;
      epochs_without_improvement = 0;
    } else {
      ++epochs_without_improvement;
      if (epochs_without_improvement >= config.early_stop_patience) break;
    }
    if (config.train_loss_goal > 0 && rec.train_loss < config.train_loss_goal) break;
  }

  model.params = best_params;
  return TrainOutcome{std::move(history), scaler};
}

std::vector<Scalar> predict(const ModelInstance& model, const Vocabulary& vocab,
                            const std::vector<DatasetRecord>& records,
                            const TargetScaler& scaler, Index batch_size) {
  if (records.empty()) throw EmptyDataset("predict on empty record list");
  const auto enc = encode_records(records, vocab, model.max_len, model.spec.needs_fingerprint());
  const std::vector<std::size_t> order = identity_order(enc.size());
  BatchBuffers buffers(model, /*with_target=*/false);
  std::map<Index, BuiltGraph> cache;
  std::vector<Scalar> out;
  out.reserve(records.size());
  TargetScaler id;
  for (std::size_t begin = 0; begin < enc.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(enc.size(), begin + static_cast<std::size_t>(batch_size));
    const Index batch = static_cast<Index>(end - begin);
    auto it = cache.find(batch);
    if (it == cache.end()) it = cache.emplace(batch, model.build_forward(batch)).first;
    BuiltGraph& bg = it->second;
    const auto bindings = buffers.fill(enc, order, begin, end, id);
    bg.graph->forward(model.params, bindings);
    const Tensor& pred = bg.graph->value(bg.output);
    for (Index b = 0; b < batch; ++b) out.push_back(scaler.invert(pred[b]));
  }
  return out;
}

EvaluationReport evaluate(const ModelInstance& model, const Vocabulary& vocab,
                          const std::vector<DatasetRecord>& records, MetricKind metric,
                          const TargetScaler& scaler, const std::string& dataset_name,
                          std::uint64_t seed) {
  if (records.empty()) throw EmptyDataset("evaluate on empty record list");
  const std::vector<Scalar> preds = predict(model, vocab, records, scaler);
  std::vector<Scalar> targets;
  targets.reserve(records.size());
  for (const DatasetRecord& r : records) targets.push_back(r.target);

  EvaluationReport report;
  report.dataset = dataset_name;
  report.metric = metric;
  report.n_test = records.size();
  report.seed = seed;
  report.value = metric == MetricKind::Auc ? auc(preds, targets) : mape(preds, targets);
  return report;
}

// ---------------------------------------------------------------------------
// checkpoint io

namespace {

constexpr const char* kCkptMagic = "chemix-ckpt v1\n";
constexpr const char* kCkptTail = "chemix-ckpt-end\n";

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_i64(std::ostream& out, std::int64_t v) { put_u64(out, static_cast<std::uint64_t>(v)); }
void put_f64(std::ostream& out, Scalar v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw CorruptFile("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw CorruptFile("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::int64_t get_i64(std::istream& in) { return static_cast<std::int64_t>(get_u64(in)); }
Scalar get_f64(std::istream& in) { return std::bit_cast<Scalar>(get_u64(in)); }

std::string get_string(std::istream& in, std::uint32_t max_len = 1u << 26) {
  const std::uint32_t n = get_u32(in);
  if (n > max_len) throw CorruptFile("checkpoint string length " + std::to_string(n));
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) throw CorruptFile("checkpoint truncated");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelInstance& model, const Vocabulary& vocab,
                     const TargetScaler& scaler, const TrainingConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TrainerError("cannot write checkpoint " + path);
  out << kCkptMagic;
  put_string(out, arch_config_to_string(model.spec));
  put_string(out, vocab.to_text());
  put_f64(out, scaler.mean);
  put_f64(out, scaler.stddev);
  put_f64(out, config.learning_rate);
  put_i64(out, config.batch_size);
  put_i64(out, config.max_epochs);
  put_i64(out, config.early_stop_patience);
  put_u64(out, config.seed);
  out.put(config.normalization == TargetNorm::Standardize ? 1 : 0);
  put_i64(out, model.vocab_size);
  put_i64(out, model.max_len);
  put_u64(out, model.seed);
  put_u32(out, static_cast<std::uint32_t>(model.params.size()));
  for (const auto& [name, t] : model.params) {
    put_string(out, name);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (Index d : t.shape()) put_i64(out, d);
    for (Index i = 0; i < t.size(); ++i) put_f64(out, t[i]);
  }
  out << kCkptTail;
  if (!out) throw TrainerError("write failed for checkpoint " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptFile("cannot read checkpoint " + path);
  std::string magic(std::strlen(kCkptMagic), '\0');
  if (!in.read(magic.data(), static_cast<std::streamsize>(magic.size())))
    throw CorruptFile("checkpoint too short for header");
  if (magic != kCkptMagic) {
    if (magic.rfind("chemix-ckpt v", 0) == 0)
      throw VersionMismatch("unsupported checkpoint version: " + magic.substr(0, magic.find('\n')));
    throw CorruptFile("not a checkpoint file: " + path);
  }

  CheckpointData data;
  const std::string arch_text = get_string(in);
  const std::string vocab_text = get_string(in);
  data.model.spec = parse_arch_config(arch_text);
  data.vocab = Vocabulary::from_text(vocab_text);
  data.scaler.mean = get_f64(in);
  data.scaler.stddev = get_f64(in);
  data.config.learning_rate = get_f64(in);
  data.config.batch_size = static_cast<Index>(get_i64(in));
  data.config.max_epochs = static_cast<Index>(get_i64(in));
  data.config.early_stop_patience = static_cast<Index>(get_i64(in));
  data.config.seed = get_u64(in);
  const int norm = in.get();
  if (norm != 0 && norm != 1) throw CorruptFile("bad normalization flag");
  data.config.normalization = norm == 1 ? TargetNorm::Standardize : TargetNorm::None;
  data.model.vocab_size = static_cast<Index>(get_i64(in));
  data.model.max_len = static_cast<Index>(get_i64(in));
  data.model.seed = get_u64(in);

  const std::uint32_t n_params = get_u32(in);
  if (n_params > 4096) throw CorruptFile("implausible parameter count");
  for (std::uint32_t p = 0; p < n_params; ++p) {
    const std::string name = get_string(in);
    const std::uint32_t rank = get_u32(in);
    if (rank == 0 || rank > 8) throw CorruptFile("bad tensor rank for " + name);
    Shape shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<Index>(get_i64(in));
    for (Index d : shape)
      if (d < 1 || d > (1 << 24)) throw CorruptFile("bad tensor dim for " + name);
    Tensor t(shape);
    for (Index i = 0; i < t.size(); ++i) t[i] = get_f64(in);
    data.model.params.emplace(name, std::move(t));
  }
  std::string tail(std::strlen(kCkptTail), '\0');
  if (!in.read(tail.data(), static_cast<std::streamsize>(tail.size())) || tail != kCkptTail)
    throw CorruptFile("checkpoint tail marker missing");

  if (data.model.spec.needs_sequence()) data.model.frozen_row0 = {"embed.table"};
  return data;
}

}  // namespace chemix
