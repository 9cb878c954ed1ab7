// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "chemix/data.hpp"
#include "chemix/rng.hpp"

using namespace chemix;

namespace {

std::vector<DatasetRecord> make_records(std::size_t n) {
  std::vector<DatasetRecord> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({std::to_string(i), "CC", static_cast<Scalar>(i), std::nullopt});
  return out;
}

std::set<std::string> ids_of(const std::vector<DatasetRecord>& v) {
  std::set<std::string> s;
  for (const auto& r : v) s.insert(r.id);
  return s;
}

}  // namespace

TEST_CASE("split sizes follow the 4:1 then 9:1 protocol") {
  const auto records = make_records(100);
  const DatasetSplit split = split_dataset(records, 42);
  CHECK(split.test.size() == 20);
  CHECK(split.validation.size() == 8);
  CHECK(split.train.size() == 72);
  CHECK(split.seed == 42);
}

TEST_CASE("same seed gives identical splits, different seeds differ") {
  const auto records = make_records(137);
  const DatasetSplit a = split_dataset(records, 7);
  const DatasetSplit b = split_dataset(records, 7);
  CHECK(ids_of(a.test) == ids_of(b.test));
  CHECK(ids_of(a.validation) == ids_of(b.validation));
  CHECK(ids_of(a.train) == ids_of(b.train));
  for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].id == b.train[i].id);

  const DatasetSplit c = split_dataset(records, 8);
  CHECK(ids_of(a.test) != ids_of(c.test));
  CHECK(c.test.size() == a.test.size());
}

TEST_CASE("splits are disjoint and exhaustive for fuzzed sizes") {
  SplitMix64 rng(1001);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 10 + rng.next_below(400);
    const auto records = make_records(n);
    const DatasetSplit split = split_dataset(records, rng.next_u64());
    CHECK(split.test.size() == n / 5);
    CHECK(split.validation.size() == (n - n / 5) / 10);
    CHECK(split.train.size() + split.validation.size() + split.test.size() == n);

    std::set<std::string> all = ids_of(split.train);
    for (const auto& r : split.validation) CHECK(all.insert(r.id).second);
    for (const auto& r : split.test) CHECK(all.insert(r.id).second);
    CHECK(all.size() == n);

    // records pass through unchanged
    for (const auto& r : split.train) {
      const std::size_t i = static_cast<std::size_t>(std::stoul(r.id));
      CHECK(r.target == static_cast<Scalar>(i));
      CHECK(r.smiles == "CC");
    }
  }
}

TEST_CASE("split rejects fewer than 10 records") {
  CHECK_THROWS_AS(split_dataset(make_records(9), 1), TooFewRecords);
}

TEST_CASE("undersample_majority balances classes exactly") {
  std::vector<DatasetRecord> records;
  for (int i = 0; i < 100; ++i)
    records.push_back({std::to_string(i), "CC", i < 30 ? 1.0 : 0.0, std::nullopt});
  const auto balanced = undersample_majority(records, 5);
  CHECK(balanced.size() == 60);
  std::size_t pos = 0;
  for (const auto& r : balanced) pos += r.target == 1.0 ? 1 : 0;
  CHECK(pos == 30);

  SUBCASE("output is a subset of the input, in input order") {
    const std::set<std::string> input_ids = ids_of(records);
    std::size_t last = 0;
    bool first = true;
    for (const auto& r : balanced) {
      CHECK(input_ids.count(r.id));
      const std::size_t i = static_cast<std::size_t>(std::stoul(r.id));
      if (!first) CHECK(i > last);
      last = i;
      first = false;
    }
  }
  SUBCASE("deterministic given the seed") {
    const auto again = undersample_majority(records, 5);
    CHECK(ids_of(again) == ids_of(balanced));
    const auto other = undersample_majority(records, 6);
    CHECK(ids_of(other) != ids_of(balanced));
  }
}

TEST_CASE("already balanced input is returned unchanged") {
  std::vector<DatasetRecord> records;
  for (int i = 0; i < 10; ++i)
    records.push_back({std::to_string(i), "CC", i % 2 ? 1.0 : 0.0, std::nullopt});
  const auto out = undersample_majority(records, 99);
  CHECK(out.size() == records.size());
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].id == records[i].id);
}

TEST_CASE("undersample rejects non-binary targets") {
  std::vector<DatasetRecord> records = make_records(12);  // targets 0..11
  CHECK_THROWS_AS(undersample_majority(records, 1), NotClassification);
}

TEST_CASE("dataset_stats") {
  std::vector<DatasetRecord> records{{"0", "CC", 0.5, std::nullopt}};
  const DatasetStats one = dataset_stats(records);
  CHECK(one.vocab_size == 1);
  CHECK(one.max_sequence_length == 2);
  CHECK(one.record_count == 1);
  CHECK_FALSE(one.class_balance.has_value());

  records.push_back({"1", "c1ccccc1", 1.0, std::nullopt});
  const DatasetStats two = dataset_stats(records);
  CHECK(two.vocab_size == 3);  // C, c, 1
  CHECK(two.max_sequence_length == 8);

  SUBCASE("permutation invariant") {
    std::vector<DatasetRecord> swapped{records[1], records[0]};
    const DatasetStats s = dataset_stats(swapped);
    CHECK(s.vocab_size == two.vocab_size);
    CHECK(s.max_sequence_length == two.max_sequence_length);
  }
  SUBCASE("binary targets produce a class balance") {
    std::vector<DatasetRecord> binary{{"0", "CC", 0.0, std::nullopt},
                                      {"1", "CC", 1.0, std::nullopt},
                                      {"2", "CC", 1.0, std::nullopt},
                                      {"3", "CC", 1.0, std::nullopt}};
    const DatasetStats s = dataset_stats(binary);
    REQUIRE(s.class_balance.has_value());
    CHECK(*s.class_balance == doctest::Approx(0.75));
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(dataset_stats({}), EmptyDataset);
  }
}

TEST_CASE("load_dataset parses CSV with schema mapping") {
  const std::string path = "/tmp/chemix_data_test.csv";
  {
    std::ofstream out(path);
    out << "name,smiles,logS,junk\n";
    out << "aspirin,CC(=O)Oc1ccccc1C(=O)O,-2.1,x\n";
    out << "\"salt, table\",[Na+].[Cl-],0.5,y\n";
    out << "ethanol,CCO,-0.77,z\n";
  }
  const auto records = load_dataset(path, {"smiles", "logS", "name"});
  REQUIRE(records.size() == 3);
  CHECK(records[0].id == "aspirin");
  CHECK(records[1].id == "salt, table");  // quoted comma survives
  CHECK(records[1].smiles == "[Na+].[Cl-]");
  CHECK(records[2].target == doctest::Approx(-0.77));

  SUBCASE("row-index ids when no id column is mapped") {
    const auto anon = load_dataset(path, {"smiles", "logS", ""});
    CHECK(anon[0].id == "0");
    CHECK(anon[2].id == "2");
  }
  SUBCASE("missing column") {
    CHECK_THROWS_AS(load_dataset(path, {"SMILES", "logS", ""}), MissingColumn);
    CHECK_THROWS_AS(load_dataset(path, {"smiles", "nope", ""}), MissingColumn);
  }
  SUBCASE("bad target reports the row number") {
    std::ofstream out(path);
    out << "smiles,y\nCC,1.0\nCCO,abc\n";
    out.close();
    try {
      load_dataset(path, {"smiles", "y", ""});
      FAIL("expected BadTarget");
    } catch (const BadTarget& e) {
      CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
  }
  SUBCASE("empty file errors") {
    std::ofstream out(path);
    out << "smiles,y\n";
    out.close();
    CHECK_THROWS_AS(load_dataset(path, {"smiles", "y", ""}), EmptyFile);
    CHECK_THROWS_AS(load_dataset("/tmp/does_not_exist_chemix.csv", {"smiles", "y", ""}),
                    EmptyFile);
  }
  std::remove(path.c_str());
}

TEST_CASE("bundled corpora reproduce the published statistics") {
#ifdef CHEMIX_DATA_DIR
  const std::string dir = CHEMIX_DATA_DIR;
  const auto esol = load_dataset(dir + "/esol.csv", {"smiles", "log_solubility", "id"});
  CHECK(esol.size() == 1128);
  const DatasetStats esol_stats = dataset_stats(esol);
  CHECK(esol_stats.vocab_size == 33);
  CHECK(esol_stats.max_sequence_length == 98);

  const auto freesolv = load_dataset(dir + "/freesolv.csv", {"smiles", "calc", "id"});
  CHECK(freesolv.size() == 643);
  const DatasetStats fs_stats = dataset_stats(freesolv);
  CHECK(fs_stats.vocab_size == 32);
  CHECK(fs_stats.max_sequence_length == 83);

  const auto cep = load_dataset(dir + "/cep_50k.csv", {"smiles", "homo", "id"});
  CHECK(cep.size() == 50000);
  const DatasetStats cep_stats = dataset_stats(cep);
  CHECK(cep_stats.vocab_size == 23);
  CHECK(cep_stats.max_sequence_length == 83);
#endif
}

TEST_CASE("fingerprint attachment and computation") {
  std::vector<DatasetRecord> records{{"a", "C=C", 1.0, std::nullopt},
                                     {"b", "c1ccccc1", 0.0, std::nullopt}};
  SUBCASE("compute_missing_fingerprints fills every record") {
    compute_missing_fingerprints(records);
    REQUIRE(records[0].fingerprint.has_value());
    CHECK(records[0].fingerprint->bit(99));
    CHECK(records[1].fingerprint->bit(165));
  }
  SUBCASE("attach joins by id and can require completeness") {
    std::map<std::string, FingerprintVector> by_id;
    std::string bits(167, '0');
    bits[99] = '1';
    by_id.emplace("a", FingerprintVector::from_bitstring(bits, FingerprintVector::Provenance::Imported));
    attach_fingerprints(records, by_id);
    CHECK(records[0].fingerprint.has_value());
    CHECK_FALSE(records[1].fingerprint.has_value());
    CHECK_THROWS_AS(attach_fingerprints(records, by_id, /*require_all=*/true), DataError);
  }
}
