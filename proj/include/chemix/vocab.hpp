// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "chemix/tensor.hpp"

namespace chemix {

struct VocabError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyCorpus : VocabError {
  using VocabError::VocabError;
};
struct EmptyString : VocabError {
  using VocabError::VocabError;
};
struct UnknownCharacter : VocabError {
  using VocabError::VocabError;
};
struct TooLong : VocabError {
  using VocabError::VocabError;
};
struct MalformedRow : VocabError {
  using VocabError::VocabError;
};

/// Character vocabulary over SMILES strings. Indices are 1-based; index 0 is
/// reserved for padding and is not counted in size(). build() orders symbols
/// by ascending byte value so any permutation of the same corpus produces the
/// identical vocabulary.
class Vocabulary {
 public:
  Vocabulary() = default;

  static Vocabulary build(const std::vector<std::string>& corpus);

  /// Explicit symbol order (tests, file loading). Symbols must be distinct.
  static Vocabulary from_symbols(const std::vector<char>& symbols);

  int size() const { return static_cast<int>(symbols_.size()); }

  bool contains(char c) const { return index_[byte(c)] != 0; }

  /// 1..size for known symbols; throws UnknownCharacter otherwise.
  int index_of(char c) const;

  /// Inverse of index_of; idx must be in 1..size.
  char symbol(int idx) const;

  const std::vector<char>& symbols() const { return symbols_; }

  bool operator==(const Vocabulary& other) const { return symbols_ == other.symbols_; }

  // Text format: header "chemix-vocab v1 <size>", then one symbol per line.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);
  std::string to_text() const;
  static Vocabulary from_text(const std::string& text);

 private:
  static std::size_t byte(char c) { return static_cast<unsigned char>(c); }
  std::vector<char> symbols_;
  std::array<int, 256> index_{};  // 0 = absent
};

/// Fixed-length one-hot encoding of one SMILES string. Rows 0..true_length-1
/// each have exactly one 1; padding rows are all zero.
struct OneHotSequence {
  Tensor matrix;  // (max_len, vocab size)
  Index true_length = 0;
  Index max_len = 0;
};

OneHotSequence encode_one_hot(const std::string& s, const Vocabulary& v, Index max_len);
std::string decode_one_hot(const OneHotSequence& seq, const Vocabulary& v);

/// Same encoding as integer indices (0 = pad); what the embedding layer eats.
std::vector<int> encode_indices(const std::string& s, const Vocabulary& v, Index max_len);

}  // namespace chemix
