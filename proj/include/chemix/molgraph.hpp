// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace chemix {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyInput : ParseError {
  using ParseError::ParseError;
};
struct UnbalancedParenthesis : ParseError {
  using ParseError::ParseError;
};
struct UnmatchedRingClosure : ParseError {
  using ParseError::ParseError;
};
struct UnknownToken : ParseError {
  using ParseError::ParseError;
};

enum class BondOrder { Single, Double, Triple, Aromatic };

struct Atom {
  std::string element;  // canonical symbol, e.g. "C", "Cl", "Se"
  bool aromatic = false;
  int charge = 0;
  int index = 0;
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;
};

struct MolecularGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  int connected_components = 0;

  std::vector<std::vector<int>> adjacency() const;
};

/// Parses the supported SMILES subset into an explicit graph: organic-subset
/// atoms (with lowercase aromatic forms), bracket atoms with charge and
/// discarded H-count/isotope/chirality, bond symbols - = # :, ring closures
/// 1-9 and %nn, branches, dot disconnection. Stereo tokens / \ @ are accepted
/// and ignored. Returns a complete graph or throws; never a partial result.
MolecularGraph parse_smiles(const std::string& s);

/// |bonds| - |atoms| + connected_components: number of independent cycles.
int cycle_rank(const MolecularGraph& g);

/// Cycle rank of the subgraph induced by aromatic bonds (and their atoms):
/// benzene 1, biphenyl 2, naphthalene 2.
int aromatic_ring_count(const MolecularGraph& g);

/// counts[k] = number of distinct simple cycles with exactly k vertices,
/// for k in 3..max_len (max_len <= 8). Distinct cycles that share a vertex
/// set (fused systems) are counted separately.
std::array<int, 9> count_simple_cycles(const MolecularGraph& g, int max_len = 8);

/// One atom per line, then one bond per line; for corpus tests and debugging.
std::string debug_listing(const MolecularGraph& g);

const char* bond_order_name(BondOrder o);

}  // namespace chemix
