#pragma once

#include <string>
#include <vector>

#include "cgt/rng.hpp"

namespace cgt {

struct Triple {
  std::string head;
  std::string relation;
  std::string tail;

  bool operator==(const Triple& other) const = default;
};

// Closed relation set. File order doubles as tie-break precedence when a
// segment admits several equally long relation matches.
struct RelationInventory {
  std::vector<std::string> relations;
  std::vector<std::vector<std::string>> relation_tokens;  // cached word splits

  int size() const { return static_cast<int>(relations.size()); }

  // Lowercases, whitespace-normalizes, and validates: non-empty, pairwise
  // distinct, and no relation hidden inside another as a contiguous word
  // subsequence (which would make segments undecodable).
  static RelationInventory from_strings(std::vector<std::string> relations);

  static RelationInventory load(const std::string& path);  // one relation per line
  void save(const std::string& path) const;
};

struct ParseResult {
  std::vector<Triple> triples;
  std::vector<std::string> rejected;  // segments with no legal head-relation-tail split
};

// "[SOS] h r t [S2S_SEQ] h r t ... [EOS]" as a flat word-token sequence.
// An empty triple list legally produces just "[SOS] [EOS]".
std::vector<std::string> linearize(const std::vector<Triple>& triples);

// Inverse of linearize over arbitrary (possibly garbage) token streams:
// strips [SOS]/[EOS], splits on [S2S_SEQ], and inside each segment takes the
// leftmost longest inventory relation with non-empty tokens on both sides.
// Unparseable segments are rejected, never fatal. Duplicates are dropped
// keeping the first occurrence.
ParseResult parse(const std::vector<std::string>& tokens, const RelationInventory& inventory);

// The positive set for contrastive training: each gold triple individually.
std::vector<Triple> decompose(const std::vector<Triple>& gold);

// Corrupts one entity (head or tail, uniform) of `positive` with a random
// contiguous 1-3 token span of the sentence, resampling until the result
// differs from every gold triple. Relation is never touched. Throws
// CorruptionExhaustedError when the sentence cannot yield any non-gold
// corruption.
Triple corrupt(const Triple& positive, const std::vector<Triple>& gold,
               const std::vector<std::string>& sentence_tokens, Rng& rng);

}  // namespace cgt
