// SPDX-License-Identifier: Apache-2.0
#include "chemix/fingerprint.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace chemix {

int FingerprintVector::popcount() const {
  int n = 0;
  for (unsigned char b : bits_) n += b;
  return n;
}

std::string FingerprintVector::to_bitstring() const {
  std::string s(kSlots, '0');
  for (int i = 0; i < kSlots; ++i)
    if (bits_[static_cast<std::size_t>(i)]) s[static_cast<std::size_t>(i)] = '1';
  return s;
}

FingerprintVector FingerprintVector::from_bitstring(const std::string& s, Provenance prov) {
  if (static_cast<int>(s.size()) != kSlots)
    throw FingerprintMalformedRow("bit string has " + std::to_string(s.size()) +
                                  " characters, expected 167");
  FingerprintVector fp;
  for (int i = 0; i < kSlots; ++i) {
    const char c = s[static_cast<std::size_t>(i)];
    if (c != '0' && c != '1')
      throw FingerprintMalformedRow(std::string("non-binary character '") + c +
                                    "' in bit string");
    fp.bits_[static_cast<std::size_t>(i)] = c == '1' ? 1 : 0;
  }
  if (fp.bits_[0]) throw FingerprintMalformedRow("slot 0 must be 0");
  fp.provenance_ = prov;
  return fp;
}

namespace {

const char* predicate_name(KeyPredicate p) {
  switch (p) {
    case KeyPredicate::ElementAny: return "element_any";
    case KeyPredicate::ElementCountGreater: return "element_count_gt";
    case KeyPredicate::RingSize: return "ring_size";
    case KeyPredicate::RingSizeCountGreater: return "ring_size_count_gt";
    case KeyPredicate::BondDoubleCC: return "bond_double_cc";
    case KeyPredicate::BondTripleCC: return "bond_triple_cc";
    case KeyPredicate::BondTripleCN: return "bond_triple_cn";
    case KeyPredicate::AromaticAtom: return "aromatic_atom";
    case KeyPredicate::AromaticRingsGreater: return "aromatic_rings_gt";
    case KeyPredicate::RingPresent: return "ring_present";
    case KeyPredicate::ChargePresent: return "charge_present";
    case KeyPredicate::FragmentsGreater: return "fragments_gt";
  }
  return "?";
}

KeyPredicate predicate_from_name(const std::string& s) {
  static const std::map<std::string, KeyPredicate> table = {
      {"element_any", KeyPredicate::ElementAny},
      {"element_count_gt", KeyPredicate::ElementCountGreater},
      {"ring_size", KeyPredicate::RingSize},
      {"ring_size_count_gt", KeyPredicate::RingSizeCountGreater},
      {"bond_double_cc", KeyPredicate::BondDoubleCC},
      {"bond_triple_cc", KeyPredicate::BondTripleCC},
      {"bond_triple_cn", KeyPredicate::BondTripleCN},
      {"aromatic_atom", KeyPredicate::AromaticAtom},
      {"aromatic_rings_gt", KeyPredicate::AromaticRingsGreater},
      {"ring_present", KeyPredicate::RingPresent},
      {"charge_present", KeyPredicate::ChargePresent},
      {"fragments_gt", KeyPredicate::FragmentsGreater}};
  auto it = table.find(s);
  if (it == table.end()) throw FingerprintError("unknown key predicate '" + s + "'");
  return it->second;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<KeyDef> builtin_keys() {
  auto elem = [](int key, std::vector<std::string> els, std::string name) {
    KeyDef d;
    d.key = key;
    d.pred = KeyPredicate::ElementAny;
    d.elements = std::move(els);
    d.name = std::move(name);
    return d;
  };
  auto ring = [](int key, int size, std::string name) {
    KeyDef d;
    d.key = key;
    d.pred = KeyPredicate::RingSize;
    d.ring = size;
    d.name = std::move(name);
    return d;
  };
  auto simple = [](int key, KeyPredicate p, int threshold, std::string name) {
    KeyDef d;
    d.key = key;
    d.pred = p;
    d.threshold = threshold;
    d.name = std::move(name);
    return d;
  };
  auto count = [](int key, std::string element, int threshold, std::string name) {
    KeyDef d;
    d.key = key;
    d.pred = KeyPredicate::ElementCountGreater;
    d.elements = {std::move(element)};
    d.threshold = threshold;
    d.name = std::move(name);
    return d;
  };

  // Slot numbers follow the public MDL/RDKit MACCS catalog. Only keys whose
  // definition reduces to a graph predicate this engine can evaluate are
  // listed; every other slot stays 0.
  std::vector<KeyDef> keys;
  keys.push_back(elem(3, {"Ge", "As", "Se", "Sn", "Sb", "Te", "Pb", "Bi"}, "group IVa/Va/VIa rows 4-6"));
  keys.push_back(elem(5, {"Sc", "Ti", "Y", "Zr", "Hf"}, "group IIIB/IVB"));
  keys.push_back(elem(9, {"Fe", "Co", "Ni", "Ru", "Rh", "Pd", "Os", "Ir", "Pt"}, "group VIII"));
  keys.push_back(elem(10, {"Be", "Mg", "Ca", "Sr", "Ba", "Ra"}, "group IIa"));
  keys.push_back(ring(11, 4, "4-membered ring"));
  keys.push_back(elem(12, {"Cu", "Zn", "Ag", "Cd", "Au", "Hg"}, "group IB/IIB"));
  keys.push_back(simple(17, KeyPredicate::BondTripleCC, 0, "C#C"));
  keys.push_back(elem(18, {"B", "Al", "Ga", "In", "Tl"}, "group IIIA"));
  keys.push_back(ring(19, 7, "7-membered ring"));
  keys.push_back(elem(20, {"Si"}, "silicon"));
  keys.push_back(ring(22, 3, "3-membered ring"));
  keys.push_back(elem(27, {"I"}, "iodine"));
  keys.push_back(elem(29, {"P"}, "phosphorus"));
  keys.push_back(elem(35, {"Li", "Na", "K", "Rb", "Cs", "Fr"}, "group IA"));
  keys.push_back(simple(41, KeyPredicate::BondTripleCN, 0, "C#N"));
  keys.push_back(elem(42, {"F"}, "fluorine"));
  keys.push_back(elem(46, {"Br"}, "bromine"));
  keys.push_back(simple(49, KeyPredicate::ChargePresent, 0, "formal charge"));
  keys.push_back(elem(88, {"S"}, "sulfur"));
  keys.push_back(ring(96, 5, "5-membered ring"));
  keys.push_back(simple(99, KeyPredicate::BondDoubleCC, 0, "C=C"));
  keys.push_back(elem(103, {"Cl"}, "chlorine"));
  keys.push_back(simple(125, KeyPredicate::AromaticRingsGreater, 1, "more than one aromatic ring"));
  keys.push_back(elem(134, {"F", "Cl", "Br", "I"}, "halogen"));
  keys.push_back(count(142, "N", 1, "more than one nitrogen"));
  {
    KeyDef d;
    d.key = 145;
    d.pred = KeyPredicate::RingSizeCountGreater;
    d.ring = 6;
    d.threshold = 1;
    d.name = "more than one 6-membered ring";
    keys.push_back(d);
  }
  keys.push_back(count(146, "O", 2, "more than two oxygens"));
  keys.push_back(count(161, "N", 0, "nitrogen"));
  keys.push_back(simple(162, KeyPredicate::AromaticAtom, 0, "aromatic atom"));
  keys.push_back(ring(163, 6, "6-membered ring"));
  keys.push_back(count(164, "O", 0, "oxygen"));
  keys.push_back(simple(165, KeyPredicate::RingPresent, 0, "ring"));
  keys.push_back(simple(166, KeyPredicate::FragmentsGreater, 1, "more than one fragment"));
  return keys;
}

bool eval_key(const KeyDef& def, const MolecularGraph& g, const std::array<int, 9>& cycles) {
  switch (def.pred) {
    case KeyPredicate::ElementAny:
      for (const Atom& a : g.atoms)
        if (std::find(def.elements.begin(), def.elements.end(), a.element) != def.elements.end())
          return true;
      return false;
    case KeyPredicate::ElementCountGreater: {
      int n = 0;
      for (const Atom& a : g.atoms)
        if (a.element == def.elements[0]) ++n;
      return n > def.threshold;
    }
    case KeyPredicate::RingSize:
      return cycles[static_cast<std::size_t>(def.ring)] > 0;
    case KeyPredicate::RingSizeCountGreater:
      return cycles[static_cast<std::size_t>(def.ring)] > def.threshold;
    case KeyPredicate::BondDoubleCC:
      for (const Bond& b : g.bonds)
        if (b.order == BondOrder::Double &&
            g.atoms[static_cast<std::size_t>(b.a)].element == "C" &&
            g.atoms[static_cast<std::size_t>(b.b)].element == "C")
          return true;
      return false;
    case KeyPredicate::BondTripleCC:
      for (const Bond& b : g.bonds)
        if (b.order == BondOrder::Triple &&
            g.atoms[static_cast<std::size_t>(b.a)].element == "C" &&
            g.atoms[static_cast<std::size_t>(b.b)].element == "C")
          return true;
      return false;
    case KeyPredicate::BondTripleCN:
      for (const Bond& b : g.bonds) {
        if (b.order != BondOrder::Triple) continue;
        const std::string& ea = g.atoms[static_cast<std::size_t>(b.a)].element;
        const std::string& eb = g.atoms[static_cast<std::size_t>(b.b)].element;
        if ((ea == "C" && eb == "N") || (ea == "N" && eb == "C")) return true;
      }
      return false;
    case KeyPredicate::AromaticAtom:
      for (const Atom& a : g.atoms)
        if (a.aromatic) return true;
      return false;
    case KeyPredicate::AromaticRingsGreater:
      return aromatic_ring_count(g) > def.threshold;
    case KeyPredicate::RingPresent:
      return cycle_rank(g) >= 1;
    case KeyPredicate::ChargePresent:
      for (const Atom& a : g.atoms)
        if (a.charge != 0) return true;
      return false;
    case KeyPredicate::FragmentsGreater:
      return g.connected_components > def.threshold;
  }
  return false;
}

}  // namespace

const KeyTable& KeyTable::builtin() {
  static const KeyTable table(builtin_keys());
  return table;
}

std::string KeyTable::to_text() const {
  std::ostringstream os;
  os << "chemix-maccs-keys v1\n";
  os << "# key\tpredicate\telements\tring\tthreshold\tname\n";
  for (const KeyDef& d : keys_) {
    os << d.key << '\t' << predicate_name(d.pred) << '\t';
    if (d.elements.empty()) {
      os << '-';
    } else {
      for (std::size_t i = 0; i < d.elements.size(); ++i) {
        if (i) os << ',';
        os << d.elements[i];
      }
    }
    os << '\t' << d.ring << '\t' << d.threshold << '\t' << d.name << '\n';
  }
  return os.str();
}

void KeyTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FingerprintError("cannot write key table " + path);
  out << to_text();
}

KeyTable KeyTable::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FingerprintError("cannot read key table " + path);
  std::string line;
  if (!std::getline(in, line) || line != "chemix-maccs-keys v1")
    throw FingerprintError("bad key table header in " + path);
  std::vector<KeyDef> keys;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_on(line, '\t');
    if (fields.size() != 6) throw FingerprintError("bad key table line: " + line);
    KeyDef d;
    d.key = std::stoi(fields[0]);
    d.pred = predicate_from_name(fields[1]);
    if (fields[2] != "-") d.elements = split_on(fields[2], ',');
    d.ring = std::stoi(fields[3]);
    d.threshold = std::stoi(fields[4]);
    d.name = fields[5];
    keys.push_back(std::move(d));
  }
  return KeyTable(std::move(keys));
}

FingerprintVector compute_keys(const MolecularGraph& g) {
  return compute_keys(g, KeyTable::builtin());
}

FingerprintVector compute_keys(const MolecularGraph& g, const KeyTable& table) {
  int max_ring = 0;
  for (const KeyDef& d : table.keys())
    if (d.pred == KeyPredicate::RingSize || d.pred == KeyPredicate::RingSizeCountGreater)
      max_ring = std::max(max_ring, d.ring);
  const std::array<int, 9> cycles =
      max_ring > 0 ? count_simple_cycles(g, max_ring) : std::array<int, 9>{};

  FingerprintVector fp;
  fp.set_provenance(FingerprintVector::Provenance::Computed);
  for (const KeyDef& d : table.keys())
    if (eval_key(d, g, cycles)) fp.set_bit(d.key);
  return fp;
}

std::map<std::string, FingerprintVector> import_fingerprints(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FingerprintError("cannot read fingerprint file " + path);
  std::string line;
  if (!std::getline(in, line)) throw FingerprintError("fingerprint file is empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id,bits")
    throw FingerprintMalformedRow("fingerprint header must be 'id,bits', got '" + line + "'");

  std::map<std::string, FingerprintVector> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw FingerprintMalformedRow("row " + std::to_string(row) + ": missing comma");
    const std::string id = line.substr(0, comma);
    const std::string bits = line.substr(comma + 1);
    if (out.count(id)) throw DuplicateId("duplicate fingerprint id '" + id + "'");
    try {
      out.emplace(id, FingerprintVector::from_bitstring(bits, FingerprintVector::Provenance::Imported));
    } catch (const FingerprintMalformedRow& e) {
      throw FingerprintMalformedRow("row " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

void write_fingerprints(const std::string& path,
                        const std::vector<std::pair<std::string, FingerprintVector>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FingerprintError("cannot write fingerprint file " + path);
  out << "id,bits\n";
  for (const auto& [id, fp] : rows) out << id << ',' << fp.to_bitstring() << '\n';
}

}  // namespace chemix
