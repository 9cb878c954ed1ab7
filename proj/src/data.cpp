// SPDX-License-Identifier: Apache-2.0
#include "chemix/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "chemix/rng.hpp"

namespace chemix {

namespace {

std::vector<std::string> parse_csv_line(const std::string& line, std::size_t row) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      if (!cur.empty())
        throw BadTarget("row " + std::to_string(row) + ": stray quote mid-field");
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw BadTarget("row " + std::to_string(row) + ": unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

Scalar parse_target(const std::string& s, std::size_t row) {
  if (s.empty()) throw BadTarget("row " + std::to_string(row) + ": empty target");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v))
    throw BadTarget("row " + std::to_string(row) + ": unparseable target '" + s + "'");
  return v;
}

}  // namespace

std::vector<DatasetRecord> load_dataset(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EmptyFile("cannot open dataset file " + path);
  std::string line;
  if (!std::getline(in, line)) throw EmptyFile("dataset file has no header: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = parse_csv_line(line, 1);
  auto column = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw MissingColumn("column '" + name + "' not found in " + path);
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t smiles_idx = column(schema.smiles_col);
  const std::optional<std::size_t> target_idx =
      schema.target_col.empty() ? std::nullopt : std::optional(column(schema.target_col));
  const std::optional<std::size_t> id_idx =
      schema.id_col.empty() ? std::nullopt : std::optional(column(schema.id_col));

  std::vector<DatasetRecord> records;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = parse_csv_line(line, row);
    if (fields.size() != header.size())
      throw BadTarget("row " + std::to_string(row) + ": has " + std::to_string(fields.size()) +
                      " fields, header has " + std::to_string(header.size()));
    DatasetRecord rec;
    rec.smiles = fields[smiles_idx];
    if (rec.smiles.empty()) throw BadTarget("row " + std::to_string(row) + ": empty SMILES");
    rec.id = id_idx ? fields[*id_idx] : std::to_string(records.size());
    if (target_idx) rec.target = parse_target(fields[*target_idx], row);
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw EmptyFile("dataset file has no data rows: " + path);
  return records;
}

DatasetSplit split_dataset(const std::vector<DatasetRecord>& records, std::uint64_t seed) {
  const std::size_t n = records.size();
  if (n < 10) throw TooFewRecords("need at least 10 records, got " + std::to_string(n));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  SplitMix64 rng(seed);
  deterministic_shuffle(order, rng);

  const std::size_t n_test = n / 5;
  const std::size_t pool = n - n_test;
  const std::size_t n_val = pool / 10;

  DatasetSplit split;
  split.seed = seed;
  split.test.reserve(n_test);
  split.validation.reserve(n_val);
  split.train.reserve(pool - n_val);
  for (std::size_t i = 0; i < n; ++i) {
    const DatasetRecord& r = records[order[i]];
    if (i < n_test) split.test.push_back(r);
    else if (i < n_test + n_val) split.validation.push_back(r);
    else split.train.push_back(r);
  }
  return split;
}

std::vector<DatasetRecord> undersample_majority(const std::vector<DatasetRecord>& records,
                                                std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Scalar t = records[i].target;
    if (t == 1.0) pos.push_back(i);
    else if (t == 0.0) neg.push_back(i);
    else throw NotClassification("target " + std::to_string(t) + " at record " +
                                 std::to_string(i) + " is not binary");
  }
  if (pos.size() == neg.size()) return records;

  std::vector<std::size_t>& majority = pos.size() > neg.size() ? pos : neg;
  const std::size_t keep_count = std::min(pos.size(), neg.size());
  SplitMix64 rng(seed);
  deterministic_shuffle(majority, rng);
  majority.resize(keep_count);

  std::vector<char> keep(records.size(), 0);
  for (std::size_t i : pos.size() > neg.size() ? neg : pos) keep[i] = 1;
  for (std::size_t i : majority) keep[i] = 1;

  std::vector<DatasetRecord> out;
  out.reserve(2 * keep_count);
  for (std::size_t i = 0; i < records.size(); ++i)
    if (keep[i]) out.push_back(records[i]);
  return out;
}

DatasetStats dataset_stats(const std::vector<DatasetRecord>& records) {
  if (records.empty()) throw EmptyDataset("dataset_stats on empty record list");
  std::vector<std::string> corpus;
  corpus.reserve(records.size());
  Index max_len = 0;
  bool all_binary = true;
  std::size_t ones = 0;
  for (const DatasetRecord& r : records) {
    corpus.push_back(r.smiles);
    max_len = std::max(max_len, static_cast<Index>(r.smiles.size()));
    if (r.target == 1.0) ++ones;
    else if (r.target != 0.0) all_binary = false;
  }
  DatasetStats stats;
  stats.vocab_size = Vocabulary::build(corpus).size();
  stats.max_sequence_length = max_len;
  stats.record_count = records.size();
  if (all_binary)
    stats.class_balance = static_cast<Scalar>(ones) / static_cast<Scalar>(records.size());
  return stats;
}

void attach_fingerprints(std::vector<DatasetRecord>& records,
                         const std::map<std::string, FingerprintVector>& by_id,
                         bool require_all) {
  for (DatasetRecord& r : records) {
    auto it = by_id.find(r.id);
    if (it != by_id.end()) {
      r.fingerprint = it->second;
    } else if (require_all) {
      throw DataError("no fingerprint for record id '" + r.id + "'");
    }
  }
}

void compute_missing_fingerprints(std::vector<DatasetRecord>& records) {
  std::unordered_map<std::string, FingerprintVector> cache;
  for (DatasetRecord& r : records) {
    if (r.fingerprint) continue;
    auto it = cache.find(r.smiles);
    if (it == cache.end())
      it = cache.emplace(r.smiles, compute_keys(parse_smiles(r.smiles))).first;
    r.fingerprint = it->second;
  }
}

}  // namespace chemix
