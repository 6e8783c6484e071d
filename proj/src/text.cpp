#include "polyfuzz/text.hpp"

#include <cctype>

#include "json.hpp"
#include "polyfuzz/types.hpp"

namespace polyfuzz {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_hex(char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }

int hex_val(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return c - 'A' + 10;
}

const char* kHexUpper = "0123456789ABCDEF";
const char* kHexLower = "0123456789abcdef";

}  // namespace

std::vector<TokenSpan> tokenize_spans(std::string_view payload) {
  std::vector<TokenSpan> out;
  size_t i = 0;
  const size_t n = payload.size();
  while (i < n) {
    if (is_space(payload[i])) {
      ++i;
      continue;
    }
    size_t start = i;
    if (payload[i] == '%' && i + 2 < n && is_hex(payload[i + 1]) && is_hex(payload[i + 2])) {
      i += 3;
    } else if (is_alnum(payload[i])) {
      while (i < n && is_alnum(payload[i])) ++i;
    } else {
      ++i;
    }
    out.push_back({std::string(payload.substr(start, i - start)), start, i});
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view payload) {
  std::vector<std::string> out;
  for (auto& s : tokenize_spans(payload)) out.push_back(std::move(s.text));
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (size_t i = 0; i < tokens_.size(); ++i) {
    index_.emplace(tokens_[i], static_cast<int>(i) + kReserved);
  }
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus) {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> seen;
  for (const auto& sent : corpus) {
    for (const auto& tok : sent) {
      if (seen.emplace(tok, 1).second) tokens.push_back(tok);
    }
  }
  return Vocabulary(std::move(tokens));
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  static const std::string reserved[kReserved] = {"<pad>", "<unk>", "<bos>", "<eos>"};
  if (id >= 0 && id < kReserved) return reserved[id];
  size_t idx = static_cast<size_t>(id - kReserved);
  if (idx >= tokens_.size()) throw PolyfuzzError("vocabulary id out of range");
  return tokens_[idx];
}

std::string Vocabulary::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["tokens"] = tokens_;
  return j.dump();
}

Vocabulary Vocabulary::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1) {
    throw PolyfuzzError("vocabulary: unsupported format_version");
  }
  return Vocabulary(j.at("tokens").get<std::vector<std::string>>());
}

std::vector<int> encode_tokens(const std::vector<std::string>& tokens,
                               const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

std::string percent_encode(std::string_view token) {
  std::string out;
  out.reserve(token.size() * 3);
  for (unsigned char b : token) {
    out.push_back('%');
    out.push_back(kHexUpper[b >> 4]);
    out.push_back(kHexUpper[b & 0xf]);
  }
  return out;
}

std::string html_entity_encode(std::string_view token) {
  std::string out;
  out.reserve(token.size() * 6);
  for (unsigned char b : token) {
    out += "&#x";
    if (b >> 4) out.push_back(kHexLower[b >> 4]);
    out.push_back(kHexLower[b & 0xf]);
    out.push_back(';');
  }
  return out;
}

std::string case_scramble(std::string_view token, Rng& rng) {
  std::string out(token);
  std::vector<size_t> letters;
  for (size_t i = 0; i < out.size(); ++i) {
    if (std::isalpha(static_cast<unsigned char>(out[i]))) letters.push_back(i);
  }
  if (letters.empty()) return out;
  for (size_t i : letters) {
    if (rng.bernoulli(0.5)) {
      unsigned char c = static_cast<unsigned char>(out[i]);
      out[i] = std::isupper(c) ? static_cast<char>(std::tolower(c))
                               : static_cast<char>(std::toupper(c));
    }
  }
  if (out == token) {
    size_t i = letters[rng.uniform_index(letters.size())];
    unsigned char c = static_cast<unsigned char>(out[i]);
    out[i] = std::isupper(c) ? static_cast<char>(std::tolower(c))
                             : static_cast<char>(std::toupper(c));
  }
  return out;
}

namespace {

void append_codepoint(std::string& out, unsigned long cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
}

std::string percent_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size();) {
    if (s[i] == '%' && i + 2 < s.size() && is_hex(s[i + 1]) && is_hex(s[i + 2])) {
      out.push_back(static_cast<char>(hex_val(s[i + 1]) * 16 + hex_val(s[i + 2])));
      i += 3;
    } else {
      out.push_back(s[i]);
      ++i;
    }
  }
  return out;
}

std::string entity_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size();) {
    if (s[i] == '&' && i + 2 < s.size() && s[i + 1] == '#') {
      size_t j = i + 2;
      bool hex = j < s.size() && (s[j] == 'x' || s[j] == 'X');
      if (hex) ++j;
      unsigned long cp = 0;
      size_t digits = 0;
      while (j < s.size() && digits < 7 &&
             (hex ? is_hex(s[j]) : std::isdigit(static_cast<unsigned char>(s[j])))) {
        cp = cp * (hex ? 16 : 10) + static_cast<unsigned long>(hex_val(s[j]));
        ++j;
        ++digits;
      }
      if (digits > 0 && j < s.size() && s[j] == ';' && cp <= 0x10ffff) {
        append_codepoint(out, cp);
        i = j + 1;
        continue;
      }
    }
    out.push_back(s[i]);
    ++i;
  }
  return out;
}

}  // namespace

std::string decode_once(std::string_view s) { return entity_decode(percent_decode(s)); }

std::string decode_chain(std::string_view payload) {
  std::string cur(payload);
  for (int round = 0; round < 4; ++round) {
    std::string next = decode_once(cur);
    if (next == cur) break;
    cur = std::move(next);
  }
  for (char& c : cur) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return cur;
}

bool is_blank_token(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!is_space(c)) return false;
  }
  return true;
}

std::string to_string(InjectionType t) {
  switch (t) {
    case InjectionType::SQLi: return "sqli";
    case InjectionType::XSSi: return "xssi";
    case InjectionType::XMLi: return "xmli";
    case InjectionType::HTMLi: return "htmli";
    case InjectionType::OSi: return "osi";
    case InjectionType::PHPi: return "phpi";
  }
  throw PolyfuzzError("unknown injection type");
}

InjectionType injection_type_from_string(const std::string& s) {
  for (InjectionType t : kAllInjectionTypes) {
    if (to_string(t) == s) return t;
  }
  throw PolyfuzzError("unknown injection type: " + s);
}

std::string to_string(Origin o) {
  switch (o) {
    case Origin::grammar: return "grammar";
    case Origin::mutation: return "mutation";
    case Origin::translation: return "translation";
  }
  throw PolyfuzzError("unknown origin");
}

Origin origin_from_string(const std::string& s) {
  if (s == "grammar") return Origin::grammar;
  if (s == "mutation") return Origin::mutation;
  if (s == "translation") return Origin::translation;
  throw PolyfuzzError("unknown origin: " + s);
}

TestInput make_test_input(InjectionType type, std::string payload, Origin origin,
                          TreePtr derivation) {
  TestInput t;
  t.type = type;
  t.payload = std::move(payload);
  t.tokens = tokenize(t.payload);
  t.origin = origin;
  t.derivation = std::move(derivation);
  return t;
}

}  // namespace polyfuzz
