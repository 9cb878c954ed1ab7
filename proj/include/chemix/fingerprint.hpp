// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "chemix/molgraph.hpp"

namespace chemix {

struct FingerprintError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FingerprintMalformedRow : FingerprintError {
  using FingerprintError::FingerprintError;
};
struct DuplicateId : FingerprintError {
  using FingerprintError::FingerprintError;
};

/// 167-slot binary vector in MACCS key layout. Slot i answers key i; slot 0
/// is unused and always 0. Width is fixed regardless of how many keys were
/// actually evaluated.
class FingerprintVector {
 public:
  static constexpr int kSlots = 167;

  enum class Provenance { Computed, Imported };

  FingerprintVector() { bits_.fill(0); }

  bool bit(int key) const { return bits_[check(key)] != 0; }
  void set_bit(int key, bool value = true) { bits_[check(key)] = value ? 1 : 0; }

  Provenance provenance() const { return provenance_; }
  void set_provenance(Provenance p) { provenance_ = p; }

  int popcount() const;

  /// 167 characters, slot 0 first.
  std::string to_bitstring() const;
  static FingerprintVector from_bitstring(const std::string& s, Provenance prov);

  bool operator==(const FingerprintVector& other) const { return bits_ == other.bits_; }

 private:
  static std::size_t check(int key) {
    if (key < 0 || key >= kSlots)
      throw FingerprintError("fingerprint key " + std::to_string(key) + " out of range");
    return static_cast<std::size_t>(key);
  }
  std::array<unsigned char, kSlots> bits_{};
  Provenance provenance_ = Provenance::Computed;
};

/// Structural predicates this engine can evaluate from a MolecularGraph.
enum class KeyPredicate {
  ElementAny,          // any atom's element in arg list
  ElementCountGreater, // count of atoms with element args[0] > threshold
  RingSize,            // a simple cycle with exactly `ring` vertices exists
  RingSizeCountGreater,// more than `threshold` simple cycles of size `ring`
  BondDoubleCC,        // some double bond with both endpoints carbon
  BondTripleCC,        // some triple bond with both endpoints carbon
  BondTripleCN,        // some triple bond joining carbon and nitrogen
  AromaticAtom,        // any aromatic atom
  AromaticRingsGreater,// aromatic_ring_count > threshold
  RingPresent,         // cycle_rank >= 1
  ChargePresent,       // any atom with nonzero formal charge
  FragmentsGreater,    // connected_components > threshold
};

struct KeyDef {
  int key = 0;               // MACCS slot
  KeyPredicate pred{};
  std::vector<std::string> elements;  // ElementAny / ElementCountGreater
  int ring = 0;              // ring size
  int threshold = 0;
  std::string name;          // human-readable catalog name
};

/// Catalog of the implemented MACCS keys. Shipped as a versioned data file so
/// runs record exactly which slots were live; the builtin table and the file
/// are kept identical by a unit test.
class KeyTable {
 public:
  static const KeyTable& builtin();
  static KeyTable load(const std::string& path);

  const std::vector<KeyDef>& keys() const { return keys_; }
  std::string to_text() const;
  void save(const std::string& path) const;

  explicit KeyTable(std::vector<KeyDef> keys) : keys_(std::move(keys)) {}

 private:
  std::vector<KeyDef> keys_;
};

/// Evaluates the implemented key set against a molecular graph; every slot
/// outside the table stays 0. Deterministic and reindexing-invariant.
FingerprintVector compute_keys(const MolecularGraph& g);
FingerprintVector compute_keys(const MolecularGraph& g, const KeyTable& table);

/// Fingerprint CSV: header "id,bits"; bits is a string of exactly 167
/// characters of 0/1, slot 0 first.
std::map<std::string, FingerprintVector> import_fingerprints(const std::string& path);
void write_fingerprints(const std::string& path,
                        const std::vector<std::pair<std::string, FingerprintVector>>& rows);

}  // namespace chemix
