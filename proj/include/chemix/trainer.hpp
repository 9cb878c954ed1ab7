// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chemix/data.hpp"
#include "chemix/metrics.hpp"
#include "chemix/model.hpp"

namespace chemix {

struct TrainerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingFingerprints : TrainerError {
  using TrainerError::TrainerError;
};
struct NonFiniteLoss : TrainerError {
  using TrainerError::TrainerError;
};
struct VersionMismatch : TrainerError {
  using TrainerError::TrainerError;
};
struct CorruptFile : TrainerError {
  using TrainerError::TrainerError;
};

enum class TargetNorm { None, Standardize };

struct TrainingConfig {
  Scalar learning_rate = 1e-3;
  Index batch_size = 32;
  Index max_epochs = 200;
  Index early_stop_patience = 10;
  std::uint64_t seed = 0;
  TargetNorm normalization = TargetNorm::Standardize;  // regression only
  Scalar train_loss_goal = 0;  // > 0: stop once the epoch training loss drops below
};

struct EpochRecord {
  Index epoch = 0;  // 1-based
  Scalar train_loss = 0;
  Scalar val_loss = 0;
  Scalar val_metric = 0;  // MAPE in raw target units, or AUC
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  Index best_epoch = 0;    // epoch with minimum validation loss
  Index stopped_epoch = 0;

  std::string to_csv() const;  // "epoch,train_loss,val_loss,val_metric"
  void save_csv(const std::string& path) const;
};

/// Standardization constants fitted on the training split; identity for
/// classification or when normalization is off.
struct TargetScaler {
  Scalar mean = 0;
  Scalar stddev = 1;
  Scalar apply(Scalar t) const { return (t - mean) / stddev; }
  Scalar invert(Scalar y) const { return y * stddev + mean; }
};

struct TrainOutcome {
  TrainingHistory history;
  TargetScaler scaler;
};

/// Mini-batch Adam with per-epoch reshuffling (last partial batch kept),
/// early stopping on validation loss, and best-epoch parameter restore.
/// Deterministic given (seed, data, config, spec). Records must already
/// carry fingerprints when the architecture needs them.
TrainOutcome train(ModelInstance& model, const Vocabulary& vocab, const DatasetSplit& split,
                   const TrainingConfig& config);

/// Model outputs per record, in record order, de-standardized for regression.
std::vector<Scalar> predict(const ModelInstance& model, const Vocabulary& vocab,
                            const std::vector<DatasetRecord>& records,
                            const TargetScaler& scaler, Index batch_size = 256);

struct EvaluationReport {
  std::string dataset;
  MetricKind metric = MetricKind::Mape;
  Scalar value = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
};

EvaluationReport evaluate(const ModelInstance& model, const Vocabulary& vocab,
                          const std::vector<DatasetRecord>& records, MetricKind metric,
                          const TargetScaler& scaler, const std::string& dataset_name = "",
                          std::uint64_t seed = 0);

/// Versioned checkpoint container ("chemix-ckpt v1"): arch config text,
/// vocabulary, scaler, training config, and parameter tensors as named,
/// shape-tagged little-endian 64-bit float blocks.
struct CheckpointData {
  ModelInstance model;
  Vocabulary vocab;
  TargetScaler scaler;
  TrainingConfig config;
};

void save_checkpoint(const std::string& path, const ModelInstance& model, const Vocabulary& vocab,
                     const TargetScaler& scaler, const TrainingConfig& config);
CheckpointData load_checkpoint(const std::string& path);

}  // namespace chemix
