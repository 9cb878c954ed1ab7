// SPDX-License-Identifier: Apache-2.0
#include "chemix/molgraph.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

namespace chemix {

namespace {

const std::set<std::string>& element_symbols() {
  static const std::set<std::string> table = {
      "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",
      "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
      "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh",
      "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
      "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re",
      "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
      "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr"};
  return table;
}

// lowercase aromatic forms allowed inside brackets
const std::map<std::string, std::string>& aromatic_bracket_symbols() {
  static const std::map<std::string, std::string> table = {
      {"b", "B"}, {"c", "C"}, {"n", "N"}, {"o", "O"}, {"p", "P"},
      {"s", "S"}, {"se", "Se"}, {"as", "As"}, {"te", "Te"}};
  return table;
}

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) { parent[static_cast<std::size_t>(find(a))] = find(b); }
};

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  MolecularGraph run() {
    if (s_.empty()) throw EmptyInput("empty SMILES string");
    while (pos_ < s_.size()) step();
    finish();
    return std::move(graph_);
  }

 private:
  [[noreturn]] void fail_token(const std::string& what) {
    throw UnknownToken(what + " at position " + std::to_string(pos_) + " in '" + s_ + "'");
  }

  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  char take() { return s_[pos_++]; }
  bool done() const { return pos_ >= s_.size(); }

  void step() {
    const char c = peek();
    switch (c) {
      case '(': {
        ++pos_;
        if (prev_ < 0) throw UnbalancedParenthesis("branch with no preceding atom in '" + s_ + "'");
        branch_stack_.push_back(prev_);
        break;
      }
      case ')': {
        ++pos_;
        if (pending_bond_)
          fail_token("bond symbol before ')'");
        if (branch_stack_.empty())
          throw UnbalancedParenthesis("unexpected ')' in '" + s_ + "'");
        prev_ = branch_stack_.back();
        branch_stack_.pop_back();
        break;
      }
      case '.': {
        ++pos_;
        if (pending_bond_) fail_token("bond symbol before '.'");
        prev_ = -1;
        break;
      }
      case '-': case '=': case '#': case ':': {
        ++pos_;
        if (pending_bond_) fail_token("doubled bond symbol");
        switch (c) {
          case '-': pending_bond_ = BondOrder::Single; break;
          case '=': pending_bond_ = BondOrder::Double; break;
          case '#': pending_bond_ = BondOrder::Triple; break;
          case ':': pending_bond_ = BondOrder::Aromatic; break;
        }
        break;
      }
      case '/': case '\\': {
        // stereo bond markers: recorded as plain single bonds
        ++pos_;
        if (pending_bond_) fail_token("doubled bond symbol");
        pending_bond_ = BondOrder::Single;
        break;
      }
      case '@': {
        ++pos_;  // stray chirality marker: accepted and ignored
        break;
      }
      case '%': {
        ++pos_;
        if (done() || !std::isdigit(static_cast<unsigned char>(peek())))
          fail_token("'%' needs two digits");
        const char d1 = take();
        if (done() || !std::isdigit(static_cast<unsigned char>(peek())))
          fail_token("'%' needs two digits");
        const char d2 = take();
        ring_event((d1 - '0') * 10 + (d2 - '0'));
        break;
      }
      default: {
        if (std::isdigit(static_cast<unsigned char>(c))) {
          ++pos_;
          ring_event(c - '0');
          break;
        }
        if (c == '[') {
          bracket_atom();
          break;
        }
        organic_atom();
        break;
      }
    }
  }

  void organic_atom() {
    const char c = peek();
    // two-letter organic-subset symbols first
    if (c == 'C' && pos_ + 1 < s_.size() && s_[pos_ + 1] == 'l') {
      pos_ += 2;
      add_atom("Cl", false, 0);
      return;
    }
    if (c == 'B' && pos_ + 1 < s_.size() && s_[pos_ + 1] == 'r') {
      pos_ += 2;
      add_atom("Br", false, 0);
      return;
    }
    static const std::string organic = "BCNOPSFI";
    static const std::string aromatic = "bcnops";
    if (organic.find(c) != std::string::npos) {
      ++pos_;
      add_atom(std::string(1, c), false, 0);
      return;
    }
    if (aromatic.find(c) != std::string::npos) {
      ++pos_;
      add_atom(std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c)))),
               true, 0);
      return;
    }
    fail_token(std::string("unexpected character '") + c + "'");
  }

  void bracket_atom() {
    ++pos_;  // '['
    // isotope: accepted and discarded
    while (!done() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    if (done()) fail_token("unterminated bracket atom");

    std::string element;
    bool aromatic = false;
    const char c0 = peek();
    if (std::isupper(static_cast<unsigned char>(c0))) {
      element.push_back(take());
      if (!done() && std::islower(static_cast<unsigned char>(peek()))) {
        const std::string two = element + peek();
        if (element_symbols().count(two)) {
          element = two;
          ++pos_;
        }
      }
      if (!element_symbols().count(element)) fail_token("unknown element '" + element + "'");
    } else if (std::islower(static_cast<unsigned char>(c0))) {
      std::string sym(1, take());
      if (!done() && std::islower(static_cast<unsigned char>(peek())) &&
          aromatic_bracket_symbols().count(sym + peek())) {
        sym += take();
      }
      auto it = aromatic_bracket_symbols().find(sym);
      if (it == aromatic_bracket_symbols().end())
        fail_token("unknown aromatic symbol '" + sym + "'");
      element = it->second;
      aromatic = true;
    } else {
      fail_token("bad bracket atom");
    }

    // chirality: accepted and discarded
    while (!done() && peek() == '@') ++pos_;

    // hydrogen count: parsed and discarded
    if (!done() && peek() == 'H') {
      ++pos_;
      while (!done() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    }

    int charge = 0;
    if (!done() && (peek() == '+' || peek() == '-')) {
      const char sign_char = take();
      const int sign = sign_char == '+' ? 1 : -1;
      if (!done() && std::isdigit(static_cast<unsigned char>(peek()))) {
        int mag = 0;
        while (!done() && std::isdigit(static_cast<unsigned char>(peek())))
          mag = mag * 10 + (take() - '0');
        charge = sign * mag;
      } else {
        charge = sign;
        while (!done() && peek() == sign_char) {
          charge += sign;
          ++pos_;
        }
      }
    }

    if (done() || peek() != ']') fail_token("expected ']'");
    ++pos_;
    add_atom(element, aromatic, charge);
  }

  void add_atom(const std::string& element, bool aromatic, int charge) {
    const int idx = static_cast<int>(graph_.atoms.size());
    graph_.atoms.push_back(Atom{element, aromatic, charge, idx});
    if (prev_ >= 0) make_bond(prev_, idx, pending_bond_);
    pending_bond_.reset();
    prev_ = idx;
  }

  void ring_event(int label) {
    if (prev_ < 0) fail_token("ring closure digit before any atom");
    auto it = open_rings_.find(label);
    if (it == open_rings_.end()) {
      open_rings_.emplace(label, std::make_pair(prev_, pending_bond_));
      pending_bond_.reset();
      return;
    }
    const auto [other, other_bond] = it->second;
    open_rings_.erase(it);
    if (other == prev_) fail_token("ring closure on the same atom");
    std::optional<BondOrder> order;
    if (pending_bond_ && other_bond && *pending_bond_ != *other_bond)
      fail_token("conflicting bond orders on ring closure " + std::to_string(label));
    order = pending_bond_ ? pending_bond_ : other_bond;
    pending_bond_.reset();
    make_bond(other, prev_, order);
  }

  void make_bond(int a, int b, std::optional<BondOrder> order) {
    for (const Bond& bond : graph_.bonds) {
      if ((bond.a == a && bond.b == b) || (bond.a == b && bond.b == a))
        fail_token("duplicate bond between atoms " + std::to_string(a) + " and " +
                   std::to_string(b));
    }
    BondOrder o;
    if (order) {
      o = *order;
    } else {
      const bool both_aromatic = graph_.atoms[static_cast<std::size_t>(a)].aromatic &&
                                 graph_.atoms[static_cast<std::size_t>(b)].aromatic;
      o = both_aromatic ? BondOrder::Aromatic : BondOrder::Single;
    }
    graph_.bonds.push_back(Bond{a, b, o});
  }

  void finish() {
    if (pending_bond_) fail_token("dangling bond symbol at end of input");
    if (!branch_stack_.empty())
      throw UnbalancedParenthesis("unclosed '(' in '" + s_ + "'");
    if (!open_rings_.empty()) {
      std::string labels;
      for (const auto& [label, _] : open_rings_) labels += " " + std::to_string(label);
      throw UnmatchedRingClosure("ring label(s)" + labels + " never closed in '" + s_ + "'");
    }
    if (graph_.atoms.empty()) throw EmptyInput("no atoms in '" + s_ + "'");

    DisjointSet dsu(static_cast<int>(graph_.atoms.size()));
    for (const Bond& b : graph_.bonds) dsu.unite(b.a, b.b);
    std::set<int> roots;
    for (int i = 0; i < static_cast<int>(graph_.atoms.size()); ++i) roots.insert(dsu.find(i));
    graph_.connected_components = static_cast<int>(roots.size());
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  MolecularGraph graph_;
  int prev_ = -1;
  std::optional<BondOrder> pending_bond_;
  std::vector<int> branch_stack_;
  std::map<int, std::pair<int, std::optional<BondOrder>>> open_rings_;
};

}  // namespace

std::vector<std::vector<int>> MolecularGraph::adjacency() const {
  std::vector<std::vector<int>> adj(atoms.size());
  for (const Bond& b : bonds) {
    adj[static_cast<std::size_t>(b.a)].push_back(b.b);
    adj[static_cast<std::size_t>(b.b)].push_back(b.a);
  }
  return adj;
}

MolecularGraph parse_smiles(const std::string& s) { return Parser(s).run(); }

int cycle_rank(const MolecularGraph& g) {
  return static_cast<int>(g.bonds.size()) - static_cast<int>(g.atoms.size()) +
         g.connected_components;
}

int aromatic_ring_count(const MolecularGraph& g) {
  std::set<int> arom_atoms;
  int arom_bonds = 0;
  DisjointSet dsu(static_cast<int>(g.atoms.size()));
  for (const Bond& b : g.bonds) {
    if (b.order != BondOrder::Aromatic) continue;
    ++arom_bonds;
    arom_atoms.insert(b.a);
    arom_atoms.insert(b.b);
    dsu.unite(b.a, b.b);
  }
  if (arom_bonds == 0) return 0;
  std::set<int> roots;
  for (int a : arom_atoms) roots.insert(dsu.find(a));
  return arom_bonds - static_cast<int>(arom_atoms.size()) + static_cast<int>(roots.size());
}

std::array<int, 9> count_simple_cycles(const MolecularGraph& g, int max_len) {
  std::array<int, 9> counts{};
  if (max_len > 8) max_len = 8;
  const auto adj = g.adjacency();
  const int n = static_cast<int>(g.atoms.size());

  // enumerate simple paths that start at their smallest vertex; each cycle is
  // found twice (once per direction), so halve at the end
  std::array<int, 9> twice{};
  std::vector<char> on_path(static_cast<std::size_t>(n), 0);
  std::vector<int> path;
  auto dfs = [&](auto&& self, int start, int v) -> void {
    if (static_cast<int>(path.size()) > max_len) return;
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (w == start && path.size() >= 3) {
        ++twice[path.size()];
        continue;
      }
      if (w <= start || on_path[static_cast<std::size_t>(w)]) continue;
      if (static_cast<int>(path.size()) == max_len) continue;
      on_path[static_cast<std::size_t>(w)] = 1;
      path.push_back(w);
      self(self, start, w);
      path.pop_back();
      on_path[static_cast<std::size_t>(w)] = 0;
    }
  };
  for (int v = 0; v < n; ++v) {
    path.assign(1, v);
    dfs(dfs, v, v);
  }
  for (int k = 3; k <= max_len; ++k) counts[static_cast<std::size_t>(k)] = twice[static_cast<std::size_t>(k)] / 2;
  return counts;
}

const char* bond_order_name(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return "single";
    case BondOrder::Double: return "double";
    case BondOrder::Triple: return "triple";
    case BondOrder::Aromatic: return "aromatic";
  }
  return "?";
}

std::string debug_listing(const MolecularGraph& g) {
  std::ostringstream os;
  for (const Atom& a : g.atoms) {
    os << "atom " << a.index << ' ' << a.element << " aromatic=" << (a.aromatic ? 1 : 0)
       << " charge=" << a.charge << '\n';
  }
  for (const Bond& b : g.bonds)
    os << "bond " << b.a << '-' << b.b << ' ' << bond_order_name(b.order) << '\n';
  os << "components " << g.connected_components << '\n';
  return os.str();
}

}  // namespace chemix
