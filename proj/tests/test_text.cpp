#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "polyfuzz/rng.hpp"
#include "polyfuzz/text.hpp"
#include "polyfuzz/types.hpp"

using namespace polyfuzz;

namespace {

std::string join_spaces(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

// random printable payloads mixing escapes, words and punctuation
std::string random_payload(Rng& rng) {
  static const std::vector<std::string> pieces = {
      "alert", "OR", "1", "'", "\"", "=", "<", ">", "(", ")", "%20", "%3C",
      "script", "SELECT", "%09", "/", "*", " ", "javascript", ":", "x7",
  };
  std::string out;
  size_t n = 1 + rng.uniform_index(12);
  for (size_t i = 0; i < n; ++i) out += pieces[rng.uniform_index(pieces.size())];
  return out;
}

}  // namespace

TEST_CASE("tokenize: quote-or-quote example yields nine tokens") {
  auto tokens = tokenize("' OR '1'='1'");
  std::vector<std::string> expected = {"'", "OR", "'", "1", "'", "=", "'", "1", "'"};
  CHECK(tokens == expected);
}

TEST_CASE("tokenize: empty payload") {
  CHECK(tokenize("").empty());
  CHECK(tokenize("   \t ").empty());
}

TEST_CASE("tokenize: percent escapes stay whole, alnum runs stay whole") {
  auto tokens = tokenize("%0A%53r%43=javascript:alert(1)%09");
  std::vector<std::string> expected = {"%0A", "%53", "r",     "%43", "=", "javascript",
                                       ":",   "alert", "(", "1",   ")", "%09"};
  CHECK(tokens == expected);
}

TEST_CASE("tokenize: join-retokenize is a fixed point") {
  Rng rng(7);
  for (int i = 0; i < 300; ++i) {
    std::string payload = random_payload(rng);
    auto tokens = tokenize(payload);
    auto again = tokenize(join_spaces(tokens));
    CHECK(again == tokens);
  }
  // the Fig. 3 payload specifically
  auto tokens = tokenize("%0A%53r%43=javascript:alert(1)%09");
  CHECK(tokenize(join_spaces(tokens)) == tokens);
}

TEST_CASE("tokenize_spans: spans index the payload") {
  std::string payload = "' OR 1=1 --%20";
  for (const auto& span : tokenize_spans(payload)) {
    CHECK(payload.substr(span.begin, span.end - span.begin) == span.text);
  }
}

TEST_CASE("vocabulary: reserved ids, membership, round trip") {
  Vocabulary v({"alpha", "beta", "gamma"});
  CHECK(v.size() == 7);
  CHECK(v.id("alpha") == 4);
  CHECK(v.id("missing") == Vocabulary::kUnk);
  CHECK(v.token(Vocabulary::kPad) == "<pad>");
  CHECK(v.token(4) == "alpha");

  Vocabulary loaded = Vocabulary::from_json(v.to_json());
  CHECK(loaded.size() == v.size());
  CHECK(loaded.id("gamma") == v.id("gamma"));
}

TEST_CASE("encode_tokens: preserves length, maps unknowns to UNK") {
  Vocabulary v({"a", "b"});
  auto ids = encode_tokens({"a", "zzz", "b"}, v);
  CHECK(ids == std::vector<int>{4, Vocabulary::kUnk, 5});

  auto nine = encode_tokens(tokenize("' OR '1'='1'"), v);
  CHECK(nine.size() == 9);
}

TEST_CASE("percent_encode and html_entity_encode") {
  CHECK(percent_encode("a") == "%61");
  CHECK(percent_encode("/") == "%2F");
  CHECK(html_entity_encode("a") == "&#x61;");
  CHECK(html_entity_encode("<") == "&#x3c;");
}

TEST_CASE("case_scramble differs and is decode-insensitive") {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    std::string out = case_scramble("SCRIPT", rng);
    CHECK(out != "SCRIPT");
    CHECK(decode_chain(out) == decode_chain("SCRIPT"));
  }
  // deterministic for a fixed stream
  Rng a(3), b(3);
  CHECK(case_scramble("alert", a) == case_scramble("alert", b));
  // tokens without letters pass through
  Rng c(5);
  CHECK(case_scramble("123", c) == "123");
}

TEST_CASE("decode_chain examples") {
  CHECK(decode_chain("%61") == "a");
  CHECK(decode_chain("OR%201=1") == "or 1=1");
  CHECK(decode_chain("&#x41;") == "a");  // decoded then lowercased
  CHECK(decode_chain("%2561") == "a");   // nested decode
}

TEST_CASE("decode_chain is idempotent on its own output") {
  Rng rng(13);
  for (int i = 0; i < 300; ++i) {
    std::string payload = random_payload(rng);
    if (rng.bernoulli(0.5)) payload = percent_encode(payload);
    if (rng.bernoulli(0.3)) payload = html_entity_encode(payload);
    std::string once = decode_chain(payload);
    CHECK(decode_chain(once) == once);
  }
}

TEST_CASE("decode_chain of percent_encode is lowercase identity on ASCII") {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    std::string payload = random_payload(rng);
    std::string expected;
    for (char c : payload)
      expected += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    CHECK(decode_chain(percent_encode(payload)) == decode_chain(expected));
  }
}

TEST_CASE("make_test_input keeps tokens consistent with payload") {
  TestInput t = make_test_input(InjectionType::XSSi, "alert(1)%20x");
  CHECK(t.tokens == tokenize(t.payload));
  std::string concat;
  for (const auto& tok : t.tokens) concat += tok;
  CHECK(concat == t.payload);  // whitespace-free payloads concatenate exactly
}
