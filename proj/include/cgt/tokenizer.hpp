#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace cgt {

// WordPiece-style subword vocabulary. Ids 0..6 are the reserved special
// tokens in this fixed order; everything after is corpus-derived.
struct Vocabulary {
  static constexpr int kNumSpecials = 7;
  static const char* const kSpecials[kNumSpecials];  // [PAD] [UNK] [CLS] [SEP] [SOS] [EOS] [S2S_SEQ]

  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, int> token_to_id;

  int pad_id() const { return 0; }
  int unk_id() const { return 1; }
  int cls_id() const { return 2; }
  int sep_id() const { return 3; }
  int sos_id() const { return 4; }
  int eos_id() const { return 5; }
  int s2s_id() const { return 6; }

  int size() const { return static_cast<int>(id_to_token.size()); }
  bool contains(const std::string& token) const { return token_to_id.count(token) > 0; }
  int id(const std::string& token) const;         // throws VocabularyError when absent
  const std::string& token(int id) const;         // throws VocabularyError when out of range
  bool is_special(int id) const { return id >= 0 && id < kNumSpecials; }

  // Validates the invariants: exact inverse maps, specials at ids 0..6, no
  // plain token spelled like a special.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  // One token per line, line number - 1 == id.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  std::uint64_t content_hash() const;  // FNV-1a over tokens, newline separated
};

struct TokenSequence {
  std::vector<int> ids;
  std::vector<std::string> pieces;  // parallel surface strings

  std::size_t size() const { return ids.size(); }
};

// Builds a vocabulary that encodes the corpus with zero [UNK]: the character
// baseline (word-initial chars plus "##"-continuations) is always kept, and
// the remaining capacity is filled with whole words and "##"-suffix pieces by
// descending frequency, ties broken lexicographically.
Vocabulary build_vocab(const std::vector<std::string>& corpus, int max_size);

// Lowercases, whitespace-splits, then greedy longest-match-first WordPiece.
// Continuation pieces carry the "##" prefix. An unmatchable maximal span
// becomes a single [UNK]. Does not insert [CLS]/[SEP]; callers compose.
TokenSequence encode(const Vocabulary& vocab, const std::string& text);

// Inverse of encode: "##" pieces glue to their predecessor, other pieces join
// with single spaces, special tokens come out verbatim as standalone words.
std::string decode(const Vocabulary& vocab, const std::vector<int>& ids);

// Shared helpers.
std::vector<std::string> split_whitespace(const std::string& text);
std::string to_lower(const std::string& text);
std::vector<std::string> utf8_chars(const std::string& word);

}  // namespace cgt
