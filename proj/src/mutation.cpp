#include "polyfuzz/mutation.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "polyfuzz/text.hpp"

namespace polyfuzz {

MutationTables MutationTables::defaults() {
  MutationTables t;
  t.blanks[InjectionType::SQLi] = {" ", "+", "%20", "%09", "/**/"};
  t.blanks[InjectionType::XSSi] = {" ", "+", "%20", "%09", "%0A", "%0D", "/**/"};
  t.blanks[InjectionType::XMLi] = {" ", "%20", "%09"};
  t.blanks[InjectionType::HTMLi] = {" ", "+", "%20", "%09", "%0A"};
  t.blanks[InjectionType::OSi] = {" ", "%20", "%09", "${IFS}"};
  t.blanks[InjectionType::PHPi] = {" ", "+", "%20", "%09", "/**/"};

  t.comments[InjectionType::SQLi] = {"/**/", "-- ", "#"};
  t.comments[InjectionType::XSSi] = {"/*injection*/", "<!--", "//"};
  t.comments[InjectionType::XMLi] = {"(:injection:)"};
  t.comments[InjectionType::HTMLi] = {"/*injection*/", "<!---->"};
  t.comments[InjectionType::OSi] = {"#"};
  t.comments[InjectionType::PHPi] = {"/**/", "//", "#"};
  return t;
}

MutationTables MutationTables::from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
    throw PolyfuzzError("mutation tables: unsupported format_version");
  MutationTables t;
  for (const auto& [key, val] : j.at("types").items()) {
    InjectionType type = injection_type_from_string(key);
    t.blanks[type] = val.at("blanks").get<std::vector<std::string>>();
    t.comments[type] = val.at("comments").get<std::vector<std::string>>();
    if (t.blanks[type].empty() || t.comments[type].empty())
      throw PolyfuzzError("mutation tables: empty inventory for " + key);
  }
  return t;
}

MutationTables MutationTables::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PolyfuzzError("cannot open mutation tables: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

const std::vector<std::string>& MutationTables::blanks_for(InjectionType t) const {
  auto it = blanks.find(t);
  if (it == blanks.end()) throw PolyfuzzError("no blank table for " + to_string(t));
  return it->second;
}

const std::vector<std::string>& MutationTables::comments_for(InjectionType t) const {
  auto it = comments.find(t);
  if (it == comments.end()) throw PolyfuzzError("no comment table for " + to_string(t));
  return it->second;
}

std::string to_string(MutOp op) {
  switch (op) {
    case MutOp::grammar_tree: return "grammar_tree";
    case MutOp::case_transform: return "case_transform";
    case MutOp::blank: return "blank";
    case MutOp::comment: return "comment";
    case MutOp::ascii: return "ascii";
    case MutOp::unicode: return "unicode";
  }
  throw PolyfuzzError("unknown mutation operator");
}

namespace {

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

struct Occurrence {
  size_t begin, end;
  std::string text;
};

// Blank-class occurrences: literal whitespace runs plus any synonym from the
// table, longest match first, scanned left to right without overlap.
std::vector<Occurrence> blank_occurrences(const std::string& payload,
                                          const std::vector<std::string>& synonyms) {
  std::vector<std::string> sorted(synonyms.begin(), synonyms.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.size() > b.size(); });

  std::vector<Occurrence> out;
  size_t i = 0;
  while (i < payload.size()) {
    if (is_ws(payload[i])) {
      size_t j = i;
      while (j < payload.size() && is_ws(payload[j])) ++j;
      out.push_back({i, j, payload.substr(i, j - i)});
      i = j;
      continue;
    }
    bool matched = false;
    for (const auto& syn : sorted) {
      if (syn.empty() || is_blank_token(syn)) continue;  // whitespace handled above
      if (payload.compare(i, syn.size(), syn) == 0) {
        out.push_back({i, i + syn.size(), syn});
        i += syn.size();
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return out;
}

std::string splice(const std::string& payload, size_t begin, size_t end,
                   const std::string& replacement) {
  return payload.substr(0, begin) + replacement + payload.substr(end);
}

bool has_letter(const std::string& s) {
  return std::any_of(s.begin(), s.end(),
                     [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; });
}

}  // namespace

std::optional<TestInput> apply_operator(MutOp op, const TestInput& input,
                                        const Grammar* grammar,
                                        const MutationTables& tables, Rng& rng) {
  switch (op) {
    case MutOp::grammar_tree: {
      if (!input.derivation || !grammar) return std::nullopt;
      TreePtr tree = resample_subtree(*input.derivation, *grammar, rng);
      return make_test_input(input.type, render(*tree), Origin::mutation, tree);
    }
    case MutOp::case_transform: {
      auto spans = tokenize_spans(input.payload);
      std::vector<size_t> eligible;
      for (size_t i = 0; i < spans.size(); ++i) {
        if (has_letter(spans[i].text)) eligible.push_back(i);
      }
      if (eligible.empty()) return std::nullopt;
      const auto& span = spans[eligible[rng.uniform_index(eligible.size())]];
      std::string scrambled = case_scramble(span.text, rng);
      return make_test_input(input.type,
                             splice(input.payload, span.begin, span.end, scrambled),
                             Origin::mutation);
    }
    case MutOp::blank: {
      const auto& synonyms = tables.blanks_for(input.type);
      auto occ = blank_occurrences(input.payload, synonyms);
      if (occ.empty()) return std::nullopt;
      const auto& chosen = occ[rng.uniform_index(occ.size())];
      std::vector<std::string> alternatives;
      for (const auto& syn : synonyms) {
        if (syn != chosen.text) alternatives.push_back(syn);
      }
      if (alternatives.empty()) return std::nullopt;
      const std::string& replacement = alternatives[rng.uniform_index(alternatives.size())];
      return make_test_input(
          input.type, splice(input.payload, chosen.begin, chosen.end, replacement),
          Origin::mutation);
    }
    case MutOp::comment: {
      auto spans = tokenize_spans(input.payload);
      if (spans.size() < 2) return std::nullopt;
      const auto& comments = tables.comments_for(input.type);
      size_t gap = rng.uniform_index(spans.size() - 1);
      const std::string& comment = comments[rng.uniform_index(comments.size())];
      // the comment replaces whatever separated the two tokens
      return make_test_input(
          input.type,
          splice(input.payload, spans[gap].end, spans[gap + 1].begin, comment),
          Origin::mutation);
    }
    case MutOp::ascii:
    case MutOp::unicode: {
      auto spans = tokenize_spans(input.payload);
      if (spans.empty()) return std::nullopt;
      const auto& span = spans[rng.uniform_index(spans.size())];
      std::string encoded = op == MutOp::ascii ? percent_encode(span.text)
                                               : html_entity_encode(span.text);
      return make_test_input(input.type,
                             splice(input.payload, span.begin, span.end, encoded),
                             Origin::mutation);
    }
  }
  return std::nullopt;
}

TestInput mutate(const TestInput& input, const Grammar& grammar,
                 const MutationTables& tables, Rng& rng) {
  std::vector<MutOp> ops;
  if (input.derivation) ops.push_back(MutOp::grammar_tree);
  ops.insert(ops.end(), {MutOp::case_transform, MutOp::blank, MutOp::comment,
                         MutOp::ascii, MutOp::unicode});
  rng.shuffle(ops);
  for (MutOp op : ops) {
    if (auto result = apply_operator(op, input, &grammar, tables, rng)) {
      return *result;
    }
  }
  TestInput copy = input;  // nothing applicable (token-free payload)
  copy.origin = Origin::mutation;
  return copy;
}

}  // namespace polyfuzz
