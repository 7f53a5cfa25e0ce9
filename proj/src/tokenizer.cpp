#include "cgt/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "cgt/errors.hpp"

namespace cgt {

const char* const Vocabulary::kSpecials[Vocabulary::kNumSpecials] = {
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[SOS]", "[EOS]", "[S2S_SEQ]"};

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string word;
  while (is >> word) out.push_back(word);
  return out;
}

std::string to_lower(const std::string& text) {
  std::string out = text;
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::vector<std::string> utf8_chars(const std::string& word) {
  std::vector<std::string> chars;
  for (std::size_t i = 0; i < word.size();) {
    std::size_t len = 1;
    const unsigned char c = static_cast<unsigned char>(word[i]);
    if ((c & 0xE0) == 0xC0) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0) len = 4;
    len = std::min(len, word.size() - i);
    chars.push_back(word.substr(i, len));
    i += len;
  }
  return chars;
}

int Vocabulary::id(const std::string& tok) const {
  auto it = token_to_id.find(tok);
  if (it == token_to_id.end()) {
    throw VocabularyError("token not in vocabulary: '" + tok + "'");
  }
  return it->second;
}

const std::string& Vocabulary::token(int i) const {
  if (i < 0 || i >= size()) {
    throw VocabularyError("id " + std::to_string(i) + " outside vocabulary of " +
                          std::to_string(size()));
  }
  return id_to_token[static_cast<std::size_t>(i)];
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (static_cast<int>(tokens.size()) < kNumSpecials) {
    throw VocabularyError("vocabulary needs at least the 7 special tokens");
  }
  for (int i = 0; i < kNumSpecials; ++i) {
    if (tokens[static_cast<std::size_t>(i)] != kSpecials[i]) {
      throw VocabularyError("token at id " + std::to_string(i) + " must be " +
                            std::string(kSpecials[i]) + ", got '" +
                            tokens[static_cast<std::size_t>(i)] + "'");
    }
  }
  Vocabulary v;
  v.id_to_token = std::move(tokens);
  for (std::size_t i = 0; i < v.id_to_token.size(); ++i) {
    const std::string& t = v.id_to_token[i];
    if (static_cast<int>(i) >= kNumSpecials) {
      for (const char* s : kSpecials) {
        if (t == s) throw VocabularyError("plain token spelled like special token: " + t);
      }
    }
    if (!v.token_to_id.emplace(t, static_cast<int>(i)).second) {
      throw VocabularyError("duplicate token: '" + t + "'");
    }
  }
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write vocabulary file: " + path);
  for (const std::string& t : id_to_token) os << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read vocabulary file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  return from_tokens(std::move(tokens));
}

std::uint64_t Vocabulary::content_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const std::string& s) {
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    h ^= static_cast<unsigned char>('\n');
    h *= 1099511628211ULL;
  };
  for (const std::string& t : id_to_token) feed(t);
  return h;
}

Vocabulary build_vocab(const std::vector<std::string>& corpus, int max_size) {
  if (corpus.empty()) throw DataError("build_vocab: empty corpus");
  if (max_size <= Vocabulary::kNumSpecials) {
    throw CapacityError("build_vocab: max_size must exceed the 7 special tokens");
  }

  // Word frequencies over the lowercased, whitespace-split corpus.
  std::map<std::string, long> word_freq;
  for (const std::string& line : corpus) {
    for (const std::string& w : split_whitespace(to_lower(line))) {
      ++word_freq[w];
    }
  }

  // Character baseline guaranteeing zero-[UNK] coverage: the word-initial
  // character of every word plus "##"-continuations for the rest.
  std::map<std::string, long> piece_freq;
  std::map<std::string, long> baseline;
  for (const auto& [word, freq] : word_freq) {
    const std::vector<std::string> chars = utf8_chars(word);
    for (std::size_t i = 0; i < chars.size(); ++i) {
      const std::string piece = i == 0 ? chars[i] : "##" + chars[i];
      baseline[piece] += freq;
    }
    // Candidates beyond the baseline: the whole word and every "##"-suffix.
    piece_freq[word] += freq;
    for (std::size_t split = 1; split < chars.size(); ++split) {
      std::string suffix = "##";
      for (std::size_t i = split; i < chars.size(); ++i) suffix += chars[i];
      piece_freq[suffix] += freq;
    }
  }

  const int capacity = max_size - Vocabulary::kNumSpecials;
  if (static_cast<int>(baseline.size()) > capacity) {
    throw CapacityError("build_vocab: max_size " + std::to_string(max_size) +
                        " cannot cover the " + std::to_string(baseline.size()) +
                        " single-character pieces");
  }

  std::vector<std::string> kept;
  kept.reserve(static_cast<std::size_t>(capacity));
  for (const auto& [piece, freq] : baseline) kept.push_back(piece);

  // Fill the remaining room by descending frequency, lexicographic on ties.
  std::vector<std::pair<std::string, long>> candidates;
  for (const auto& [piece, freq] : piece_freq) {
    if (!baseline.count(piece)) candidates.emplace_back(piece, freq);
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [piece, freq] : candidates) {
    if (static_cast<int>(kept.size()) >= capacity) break;
    kept.push_back(piece);
  }

  std::sort(kept.begin(), kept.end());
  std::vector<std::string> tokens;
  tokens.reserve(kept.size() + Vocabulary::kNumSpecials);
  for (const char* s : Vocabulary::kSpecials) tokens.emplace_back(s);
  tokens.insert(tokens.end(), kept.begin(), kept.end());
  return Vocabulary::from_tokens(std::move(tokens));
}

TokenSequence encode(const Vocabulary& vocab, const std::string& text) {
  TokenSequence seq;
  for (const std::string& word : split_whitespace(to_lower(text))) {
    const std::vector<std::string> chars = utf8_chars(word);
    std::size_t start = 0;
    bool in_unk_span = false;
    while (start < chars.size()) {
      // Greedy longest match, continuation pieces prefixed with "##".
      std::size_t end = chars.size();
      int matched = -1;
      std::string matched_piece;
      while (end > start) {
        std::string piece = start > 0 ? "##" : "";
        for (std::size_t i = start; i < end; ++i) piece += chars[i];
        auto it = vocab.token_to_id.find(piece);
        if (it != vocab.token_to_id.end() && !vocab.is_special(it->second)) {
          matched = it->second;
          matched_piece = std::move(piece);
          break;
        }
        --end;
      }
      if (matched < 0) {
        if (!in_unk_span) {
          seq.ids.push_back(vocab.unk_id());
          seq.pieces.emplace_back(Vocabulary::kSpecials[1]);
          in_unk_span = true;
        }
        ++start;
        continue;
      }
      in_unk_span = false;
      seq.ids.push_back(matched);
      seq.pieces.push_back(std::move(matched_piece));
      start = end;
    }
  }
  return seq;
}

std::string decode(const Vocabulary& vocab, const std::vector<int>& ids) {
  std::string out;
  bool previous_glueable = false;
  for (int id : ids) {
    const std::string& tok = vocab.token(id);
    const bool continuation = tok.size() > 2 && tok.compare(0, 2, "##") == 0;
    if (continuation && previous_glueable) {
      out += tok.substr(2);
      continue;
    }
    if (!out.empty()) out += ' ';
    out += continuation ? tok.substr(2) : tok;
    previous_glueable = !vocab.is_special(id);
  }
  return out;
}

}  // namespace cgt
