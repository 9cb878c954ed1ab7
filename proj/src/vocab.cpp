// SPDX-License-Identifier: Apache-2.0
#include "chemix/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace chemix {

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus) {
  if (corpus.empty()) throw EmptyCorpus("vocabulary corpus is empty");
  std::set<unsigned char> seen;
  for (const std::string& s : corpus) {
    if (s.empty()) throw EmptyString("empty string in vocabulary corpus");
    for (char c : s) seen.insert(static_cast<unsigned char>(c));
  }
  std::vector<char> symbols(seen.begin(), seen.end());  // ascending byte order
  return from_symbols(symbols);
}

Vocabulary Vocabulary::from_symbols(const std::vector<char>& symbols) {
  if (symbols.empty()) throw EmptyCorpus("vocabulary symbol list is empty");
  Vocabulary v;
  v.symbols_ = symbols;
  int idx = 1;
  for (char c : symbols) {
    if (v.index_[byte(c)] != 0)
      throw VocabError(std::string("duplicate symbol '") + c + "' in vocabulary");
    v.index_[byte(c)] = idx++;
  }
  return v;
}

int Vocabulary::index_of(char c) const {
  const int idx = index_[byte(c)];
  if (idx == 0)
    throw UnknownCharacter(std::string("character '") + c + "' not in vocabulary");
  return idx;
}

char Vocabulary::symbol(int idx) const {
  if (idx < 1 || idx > size())
    throw VocabError("vocabulary index " + std::to_string(idx) + " out of range 1.." +
                     std::to_string(size()));
  return symbols_[static_cast<std::size_t>(idx - 1)];
}

std::string Vocabulary::to_text() const {
  std::ostringstream os;
  os << "chemix-vocab v1 " << size() << '\n';
  for (char c : symbols_) os << c << '\n';
  return os.str();
}

Vocabulary Vocabulary::from_text(const std::string& text) {
  std::istringstream is(text);
  std::string header;
  if (!std::getline(is, header)) throw VocabError("vocabulary file is empty");
  std::istringstream hs(header);
  std::string magic, version;
  int count = -1;
  hs >> magic >> version >> count;
  if (magic != "chemix-vocab" || version != "v1" || count < 1)
    throw VocabError("bad vocabulary header: " + header);
  std::vector<char> symbols;
  std::string line;
  while (std::getline(is, line) && static_cast<int>(symbols.size()) < count) {
    if (line.size() != 1)
      throw VocabError("vocabulary line must hold one symbol, got '" + line + "'");
    symbols.push_back(line[0]);
  }
  if (static_cast<int>(symbols.size()) != count)
    throw VocabError("vocabulary file truncated: expected " + std::to_string(count) +
                     " symbols, got " + std::to_string(symbols.size()));
  return from_symbols(symbols);
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);  // binary: keep LF endings everywhere
  if (!out) throw VocabError("cannot write vocabulary file " + path);
  out << to_text();
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw VocabError("cannot read vocabulary file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

OneHotSequence encode_one_hot(const std::string& s, const Vocabulary& v, Index max_len) {
  if (static_cast<Index>(s.size()) > max_len)
    throw TooLong("string of length " + std::to_string(s.size()) + " exceeds max_len " +
                  std::to_string(max_len));
  OneHotSequence seq;
  seq.max_len = max_len;
  seq.true_length = static_cast<Index>(s.size());
  seq.matrix = Tensor({max_len, v.size()});
  auto m = seq.matrix.matrix();
  for (Index i = 0; i < seq.true_length; ++i)
    m(i, v.index_of(s[static_cast<std::size_t>(i)]) - 1) = 1.0;
  return seq;
}

std::string decode_one_hot(const OneHotSequence& seq, const Vocabulary& v) {
  auto m = seq.matrix.matrix();
  if (m.cols() != v.size())
    throw MalformedRow("one-hot width " + std::to_string(m.cols()) + " vs vocabulary size " +
                       std::to_string(v.size()));
  std::string out;
  out.reserve(static_cast<std::size_t>(seq.true_length));
  for (Index r = 0; r < m.rows(); ++r) {
    int ones = 0;
    Index col = -1;
    for (Index c = 0; c < m.cols(); ++c) {
      const Scalar x = m(r, c);
      if (x == 1.0) {
        ++ones;
        col = c;
      } else if (x != 0.0) {
        throw MalformedRow("non-binary entry at row " + std::to_string(r));
      }
    }
    const bool is_pad = r >= seq.true_length;
    if (is_pad) {
      if (ones != 0) throw MalformedRow("padding row " + std::to_string(r) + " is not all zero");
    } else {
      if (ones != 1)
        throw MalformedRow("row " + std::to_string(r) + " sums to " + std::to_string(ones));
      out.push_back(v.symbol(static_cast<int>(col) + 1));
    }
  }
  return out;
}

std::vector<int> encode_indices(const std::string& s, const Vocabulary& v, Index max_len) {
  if (static_cast<Index>(s.size()) > max_len)
    throw TooLong("string of length " + std::to_string(s.size()) + " exceeds max_len " +
                  std::to_string(max_len));
  std::vector<int> out(static_cast<std::size_t>(max_len), 0);
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = v.index_of(s[i]);
  return out;
}

}  // namespace chemix
