#include "polyfuzz/grammar.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "polyfuzz/text.hpp"

namespace polyfuzz {

namespace {

constexpr int kInfDepth = std::numeric_limits<int>::max() / 4;

struct Cursor {
  std::string_view line;
  size_t pos = 0;
  int line_no = 0;

  void skip_ws() {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
  }
  bool done() const { return pos >= line.size(); }
  char peek() const { return line[pos]; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw GrammarError("grammar syntax error at line " + std::to_string(line_no) +
                       ": " + msg);
  }
};

bool is_ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '_' || c == '-';
}

std::string parse_identifier(Cursor& cur) {
  size_t start = cur.pos;
  while (!cur.done() && is_ident_char(cur.peek())) ++cur.pos;
  if (cur.pos == start) cur.fail("expected identifier");
  return std::string(cur.line.substr(start, cur.pos - start));
}

std::string parse_quoted(Cursor& cur) {
  // opening quote already consumed
  std::string out;
  while (true) {
    if (cur.done()) cur.fail("unterminated terminal string");
    char c = cur.line[cur.pos++];
    if (c == '\'') return out;
    if (c == '\\') {
      if (cur.done()) cur.fail("dangling escape in terminal");
      char e = cur.line[cur.pos++];
      switch (e) {
        case '\'': out.push_back('\''); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        default: cur.fail(std::string("unknown escape \\") + e);
      }
    } else {
      out.push_back(c);
    }
  }
}

// Strip a trailing comment; '#' inside quoted terminals does not count.
std::string_view strip_comment(std::string_view line) {
  bool in_quote = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_quote) {
      if (c == '\\') ++i;
      else if (c == '\'') in_quote = false;
    } else if (c == '\'') {
      in_quote = true;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

}  // namespace

Grammar parse_grammar(std::string_view source_text, const std::string& name,
                      InjectionType type) {
  Grammar g;
  g.name = name;
  g.injection_type = type;

  std::map<std::string, int> head_lines;
  int line_no = 0;
  size_t begin = 0;
  while (begin <= source_text.size()) {
    size_t nl = source_text.find('\n', begin);
    std::string_view raw = source_text.substr(
        begin, nl == std::string_view::npos ? std::string_view::npos : nl - begin);
    begin = nl == std::string_view::npos ? source_text.size() + 1 : nl + 1;
    ++line_no;

    Cursor cur{strip_comment(raw), 0, line_no};
    cur.skip_ws();
    if (cur.done()) continue;

    GrammarRule rule;
    rule.head = parse_identifier(cur);
    cur.skip_ws();
    if (cur.done() || cur.peek() != '-' || cur.pos + 1 >= cur.line.size() ||
        cur.line[cur.pos + 1] != '>') {
      cur.fail("expected '->' after rule head");
    }
    cur.pos += 2;

    Alternative alt;
    bool expect_symbol = true;
    while (true) {
      cur.skip_ws();
      if (cur.done()) break;
      char c = cur.peek();
      if (c == '\'') {
        if (!expect_symbol) cur.fail("missing ',' between symbols");
        ++cur.pos;
        alt.push_back({parse_quoted(cur), true});
        expect_symbol = false;
      } else if (c == ',') {
        if (expect_symbol) cur.fail("unexpected ','");
        ++cur.pos;
        expect_symbol = true;
      } else if (c == '|') {
        if (alt.empty()) cur.fail("empty alternative");
        rule.alternatives.push_back(std::move(alt));
        alt = {};
        ++cur.pos;
        expect_symbol = true;
      } else if (is_ident_char(c)) {
        if (!expect_symbol) cur.fail("missing ',' between symbols");
        alt.push_back({parse_identifier(cur), false});
        expect_symbol = false;
      } else {
        cur.fail(std::string("unexpected character '") + c + "'");
      }
    }
    if (alt.empty()) cur.fail("empty alternative");
    rule.alternatives.push_back(std::move(alt));

    auto [it, fresh] = head_lines.emplace(rule.head, line_no);
    if (!fresh) {
      throw GrammarError("duplicate rule for '" + rule.head + "' at line " +
                         std::to_string(line_no) + " (first defined at line " +
                         std::to_string(it->second) + ")");
    }
    g.rules.push_back(std::move(rule));
  }

  if (g.rules.empty()) throw GrammarError("grammar has no rules");
  g.start_symbol = g.rules.front().head;
  g.finalize();
  return g;
}

void Grammar::finalize() {
  index_.clear();
  for (size_t i = 0; i < rules.size(); ++i) index_[rules[i].head] = i;

  std::vector<std::string> dangling;
  std::unordered_set<std::string> seen_terminals;
  for (const auto& rule : rules) {
    for (const auto& alt : rule.alternatives) {
      for (const auto& sym : alt) {
        if (sym.terminal) {
          if (seen_terminals.insert(sym.name).second) terminals_.push_back(sym.name);
        } else if (!index_.count(sym.name)) {
          if (std::find(dangling.begin(), dangling.end(), sym.name) == dangling.end())
            dangling.push_back(sym.name);
        }
      }
    }
  }
  if (!dangling.empty()) {
    std::string msg = "dangling nonterminals:";
    for (const auto& n : dangling) msg += " " + n;
    throw GrammarError(msg);
  }

  terminal_tokens_.clear();
  for (const auto& t : terminals_) {
    for (const auto& tok : tokenize(t)) terminal_tokens_.insert(tok);
  }

  // Fixpoint over minimum derivation depths.
  min_depth_.clear();
  for (const auto& rule : rules) min_depth_[rule.head] = kInfDepth;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& rule : rules) {
      int best = kInfDepth;
      for (const auto& alt : rule.alternatives) {
        int worst = 0;
        for (const auto& sym : alt) {
          int d = sym.terminal ? 1 : min_depth_[sym.name];
          worst = std::max(worst, d);
        }
        best = std::min(best, worst >= kInfDepth ? kInfDepth : worst + 1);
      }
      if (best < min_depth_[rule.head]) {
        min_depth_[rule.head] = best;
        changed = true;
      }
    }
  }
  alt_min_depth_.clear();
  for (const auto& rule : rules) {
    std::vector<int> depths;
    for (const auto& alt : rule.alternatives) {
      int worst = 0;
      for (const auto& sym : alt) {
        int d = sym.terminal ? 1 : min_depth_[sym.name];
        worst = std::max(worst, d);
      }
      depths.push_back(worst >= kInfDepth ? kInfDepth : worst + 1);
    }
    alt_min_depth_[rule.head] = std::move(depths);
  }
}

const GrammarRule& Grammar::rule(const std::string& head) const {
  auto it = index_.find(head);
  if (it == index_.end()) throw GrammarError("no rule for nonterminal '" + head + "'");
  return rules[it->second];
}

int Grammar::min_depth(const std::string& nonterminal) const {
  auto it = min_depth_.find(nonterminal);
  if (it == min_depth_.end())
    throw GrammarError("no rule for nonterminal '" + nonterminal + "'");
  return it->second;
}

int Grammar::alternative_min_depth(const std::string& head, size_t alt) const {
  return alt_min_depth_.at(head)[alt];
}

Grammar load_grammar_file(const std::string& path, InjectionType type) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GrammarError("cannot open grammar file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string name = path;
  if (auto slash = name.find_last_of('/'); slash != std::string::npos)
    name = name.substr(slash + 1);
  if (auto dot = name.find_last_of('.'); dot != std::string::npos)
    name = name.substr(0, dot);
  return parse_grammar(buf.str(), name, type);
}

std::unordered_map<InjectionType, Grammar> load_grammar_dir(
    const std::string& dir, const std::vector<InjectionType>& types) {
  std::unordered_map<InjectionType, Grammar> out;
  for (InjectionType t : types) {
    out.emplace(t, load_grammar_file(dir + "/" + to_string(t) + ".cfg", t));
  }
  return out;
}

namespace {

TreePtr expand(const Grammar& g, const std::string& symbol, bool terminal, Rng& rng,
               int budget) {
  auto node = std::make_shared<DerivationTree>();
  node->symbol = {symbol, terminal};
  if (terminal) return node;

  const GrammarRule& rule = g.rule(symbol);
  std::vector<size_t> eligible;
  for (size_t i = 0; i < rule.alternatives.size(); ++i) {
    if (g.alternative_min_depth(symbol, i) <= budget) eligible.push_back(i);
  }
  if (eligible.empty()) {
    throw GrammarError("depth exhaustion: no alternative of '" + symbol +
                       "' fits in remaining depth " + std::to_string(budget));
  }
  size_t choice = eligible[rng.uniform_index(eligible.size())];
  node->chosen_alternative = static_cast<int>(choice);
  for (const auto& sym : rule.alternatives[choice]) {
    node->children.push_back(expand(g, sym.name, sym.terminal, rng, budget - 1));
  }
  return node;
}

}  // namespace

TreePtr derive(const Grammar& g, Rng& rng, int max_depth) {
  if (max_depth < 1) throw GrammarError("max_depth must be >= 1");
  return expand(g, g.start_symbol, false, rng, max_depth);
}

static void render_into(const DerivationTree& t, std::string& out) {
  if (t.is_terminal()) {
    out += t.symbol.name;
    return;
  }
  for (const auto& c : t.children) render_into(*c, out);
}

std::string render(const DerivationTree& tree) {
  std::string out;
  render_into(tree, out);
  return out;
}

int tree_depth(const DerivationTree& tree) {
  int deepest = 0;
  for (const auto& c : tree.children) deepest = std::max(deepest, tree_depth(*c));
  return deepest + 1;
}

namespace {

void count_nonterminals(const DerivationTree& t, size_t& n) {
  if (!t.is_terminal()) {
    ++n;
    for (const auto& c : t.children) count_nonterminals(*c, n);
  }
}

// Pre-order walk; rebuilds the path to the target node, re-deriving there.
TreePtr rebuild(const Grammar& g, const DerivationTree& node, size_t target,
                size_t& counter, int budget, Rng& rng, bool& done) {
  if (node.is_terminal()) return std::make_shared<DerivationTree>(node);
  if (counter++ == target) {
    done = true;
    return expand(g, node.symbol.name, false, rng, budget);
  }
  auto copy = std::make_shared<DerivationTree>();
  copy->symbol = node.symbol;
  copy->chosen_alternative = node.chosen_alternative;
  copy->children.reserve(node.children.size());
  for (const auto& c : node.children) {
    if (done) {
      copy->children.push_back(c);  // share untouched subtrees
    } else {
      copy->children.push_back(rebuild(g, *c, target, counter, budget - 1, rng, done));
    }
  }
  return copy;
}

}  // namespace

TreePtr resample_subtree(const DerivationTree& tree, const Grammar& g, Rng& rng,
                         int max_depth, size_t* resampled_index) {
  size_t n = 0;
  count_nonterminals(tree, n);
  if (n == 0) {
    throw GrammarError("resample_subtree: tree has no nonterminal node");
  }
  size_t target = rng.uniform_index(n);
  if (resampled_index) *resampled_index = target;
  size_t counter = 0;
  bool done = false;
  return rebuild(g, tree, target, counter, max_depth, rng, done);
}

namespace {

struct ParseCtx {
  const Grammar& g;
  std::string_view text;
  size_t budget;
  size_t used = 0;
  // (rule index, position, depth) -> reachable end positions
  std::map<std::tuple<size_t, size_t, int>, std::vector<size_t>> memo{};

  void charge() {
    if (++used > budget) {
      throw GrammarError("membership_check: parse budget exceeded");
    }
  }

  std::vector<size_t> match_symbol(const GrammarSymbol& sym, size_t pos, int depth);
  void match_sequence(const Alternative& alt, size_t idx, size_t pos, int depth,
                      std::vector<size_t>& ends);
};

void ParseCtx::match_sequence(const Alternative& alt, size_t idx, size_t pos,
                              int depth, std::vector<size_t>& ends) {
  if (idx == alt.size()) {
    ends.push_back(pos);
    return;
  }
  for (size_t end : match_symbol(alt[idx], pos, depth)) {
    match_sequence(alt, idx + 1, end, depth, ends);
  }
}

std::vector<size_t> ParseCtx::match_symbol(const GrammarSymbol& sym, size_t pos,
                                           int depth) {
  charge();
  if (sym.terminal) {
    if (depth >= 1 && text.compare(pos, sym.name.size(), sym.name) == 0) {
      return {pos + sym.name.size()};
    }
    return {};
  }
  if (depth < 1) return {};
  size_t rule_idx = &g.rule(sym.name) - g.rules.data();
  auto key = std::make_tuple(rule_idx, pos, depth);
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  memo[key] = {};  // cut left recursion at this (pos, depth)

  std::vector<size_t> ends;
  const GrammarRule& rule = g.rules[rule_idx];
  for (size_t i = 0; i < rule.alternatives.size(); ++i) {
    if (g.alternative_min_depth(sym.name, i) > depth) continue;
    match_sequence(rule.alternatives[i], 0, pos, depth - 1, ends);
  }
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
  memo[key] = ends;
  return ends;
}

}  // namespace

bool membership_check(const Grammar& g, std::string_view payload, int max_depth,
                      size_t node_budget) {
  ParseCtx ctx{g, payload, node_budget};
  auto ends = ctx.match_symbol({g.start_symbol, false}, 0, max_depth);
  return std::find(ends.begin(), ends.end(), payload.size()) != ends.end();
}

TestInput derive_input(const Grammar& g, Rng& rng, int max_depth) {
  TreePtr tree = derive(g, rng, max_depth);
  return make_test_input(g.injection_type, render(*tree), Origin::grammar, tree);
}

}  // namespace polyfuzz
