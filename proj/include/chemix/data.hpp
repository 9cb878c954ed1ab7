// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chemix/fingerprint.hpp"
#include "chemix/vocab.hpp"

namespace chemix {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingColumn : DataError {
  using DataError::DataError;
};
struct BadTarget : DataError {
  using DataError::DataError;
};
struct EmptyFile : DataError {
  using DataError::DataError;
};
struct TooFewRecords : DataError {
  using DataError::DataError;
};
struct NotClassification : DataError {
  using DataError::DataError;
};
struct EmptyDataset : DataError {
  using DataError::DataError;
};

struct DatasetRecord {
  std::string id;
  std::string smiles;
  Scalar target = 0;
  std::optional<FingerprintVector> fingerprint;
};

struct ColumnSchema {
  std::string smiles_col = "smiles";
  std::string target_col;  // empty: targets default to 0 (stats/encode workflows)
  std::string id_col;      // empty: 0-based data row index becomes the id
};

struct DatasetSplit {
  std::vector<DatasetRecord> train;
  std::vector<DatasetRecord> validation;
  std::vector<DatasetRecord> test;
  std::uint64_t seed = 0;
};

struct DatasetStats {
  int vocab_size = 0;
  Index max_sequence_length = 0;
  std::size_t record_count = 0;
  std::optional<Scalar> class_balance;  // fraction of 1s when targets are all binary
};

/// Strict CSV reader: header row required; quoted fields may contain commas,
/// doubled quotes escape a quote; LF or CRLF endings.
std::vector<DatasetRecord> load_dataset(const std::string& path, const ColumnSchema& schema);

/// 4:1 test split of the whole set, then 9:1 validation split of the
/// remainder, by seeded shuffle: n_test = floor(N/5), n_val =
/// floor((N - n_test)/10). Membership is pinned by SplitMix64(seed) and the
/// documented Fisher-Yates procedure.
DatasetSplit split_dataset(const std::vector<DatasetRecord>& records, std::uint64_t seed);

/// Balances a binary classification set by shrinking the majority class to
/// the minority size via seeded sampling; record order is preserved.
std::vector<DatasetRecord> undersample_majority(const std::vector<DatasetRecord>& records,
                                                std::uint64_t seed);

DatasetStats dataset_stats(const std::vector<DatasetRecord>& records);

/// Joins sidecar fingerprints onto records by id. Records without a row in
/// the map are left untouched unless require_all.
void attach_fingerprints(std::vector<DatasetRecord>& records,
                         const std::map<std::string, FingerprintVector>& by_id,
                         bool require_all = false);

/// Computes fingerprints for every record that lacks one (memoized per
/// distinct SMILES string).
void compute_missing_fingerprints(std::vector<DatasetRecord>& records);

}  // namespace chemix
