#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "polyfuzz/rng.hpp"

namespace polyfuzz {

// A token with its byte range in the original payload. Whitespace between
// tokens is dropped from the token stream but recoverable through the spans.
struct TokenSpan {
  std::string text;
  size_t begin = 0;
  size_t end = 0;
};

// Token classes: alphanumeric runs, single punctuation characters, and %XX
// escapes kept whole. Whitespace separates tokens and is never a token.
std::vector<TokenSpan> tokenize_spans(std::string_view payload);
std::vector<std::string> tokenize(std::string_view payload);

// Token <-> index map with fixed reserved slots.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kReserved = 4;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  // Unique tokens in first-seen order over the corpus.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus);

  int id(const std::string& token) const;          // kUnk when absent
  const std::string& token(int id) const;          // reserved ids get "<pad>" etc.
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  int size() const { return static_cast<int>(tokens_.size()) + kReserved; }

  const std::vector<std::string>& entries() const { return tokens_; }

  std::string to_json() const;
  static Vocabulary from_json(const std::string& text);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

std::vector<int> encode_tokens(const std::vector<std::string>& tokens,
                               const Vocabulary& vocab);

// Every byte to %HH (uppercase hex).
std::string percent_encode(std::string_view token);

// Every character to &#xhh; (numeric entity, lowercase hex).
std::string html_entity_encode(std::string_view token);

// Flip the case of each ASCII letter with probability 1/2; guaranteed to
// differ from the input when it contains at least one letter.
std::string case_scramble(std::string_view token, Rng& rng);

// One round of percent + numeric-entity decoding.
std::string decode_once(std::string_view s);

// Repeated decode_once until fixpoint (at most 4 rounds), then ASCII
// lowercase. The canonical form used for dedup and simulator matching.
std::string decode_chain(std::string_view payload);

bool is_blank_token(std::string_view s);

}  // namespace polyfuzz
