#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "polyfuzz/rng.hpp"
#include "polyfuzz/types.hpp"

namespace polyfuzz {

inline constexpr int kDefaultMaxDepth = 32;

struct GrammarSymbol {
  std::string name;  // terminal text or nonterminal identifier
  bool terminal = false;
};

using Alternative = std::vector<GrammarSymbol>;

struct GrammarRule {
  std::string head;
  std::vector<Alternative> alternatives;
};

// A context-free grammar in the one-rule-per-line notation:
//   Head -> sym , sym | sym      ('a' quotes a terminal, # starts a comment)
// Immutable after parse; derive/resample take an explicit random source, so
// parallel sampling needs independent streams.
class Grammar {
 public:
  std::string name;
  InjectionType injection_type = InjectionType::SQLi;
  std::vector<GrammarRule> rules;  // first rule's head is the start symbol
  std::string start_symbol;

  const GrammarRule& rule(const std::string& head) const;
  bool has_rule(const std::string& head) const { return index_.count(head) > 0; }

  // Minimum derivation depth (nodes on the longest root-to-leaf path) needed
  // to finish a tree rooted at `symbol`.
  int min_depth(const std::string& nonterminal) const;
  int alternative_min_depth(const std::string& head, size_t alt) const;

  // Distinct terminal strings of the grammar.
  const std::vector<std::string>& terminals() const { return terminals_; }
  // Tokenized terminal inventory (used by the translator sanity check).
  const std::unordered_set<std::string>& terminal_tokens() const { return terminal_tokens_; }

  void finalize();  // builds indices and depth tables; validates invariants

 private:
  std::unordered_map<std::string, size_t> index_;
  std::unordered_map<std::string, int> min_depth_;
  std::unordered_map<std::string, std::vector<int>> alt_min_depth_;
  std::vector<std::string> terminals_;
  std::unordered_set<std::string> terminal_tokens_;
};

struct DerivationTree {
  GrammarSymbol symbol;
  int chosen_alternative = -1;  // nonterminal nodes only
  std::vector<TreePtr> children;

  bool is_terminal() const { return symbol.terminal; }
};

struct GrammarError : PolyfuzzError {
  using PolyfuzzError::PolyfuzzError;
};

Grammar parse_grammar(std::string_view source_text, const std::string& name,
                      InjectionType type);
Grammar load_grammar_file(const std::string& path, InjectionType type);
// Loads <type>.cfg for each requested type from a directory.
std::unordered_map<InjectionType, Grammar> load_grammar_dir(
    const std::string& dir, const std::vector<InjectionType>& types);

TreePtr derive(const Grammar& g, Rng& rng, int max_depth = kDefaultMaxDepth);
std::string render(const DerivationTree& tree);
// resampled_index (optional) receives the pre-order index of the nonterminal
// node whose subtree was re-derived.
TreePtr resample_subtree(const DerivationTree& tree, const Grammar& g, Rng& rng,
                         int max_depth = kDefaultMaxDepth,
                         size_t* resampled_index = nullptr);
int tree_depth(const DerivationTree& tree);

// Exhaustive backtracking parse: true iff `payload` is a sentence of the
// grammar derivable within max_depth. Throws when the search exceeds
// node_budget expansions.
bool membership_check(const Grammar& g, std::string_view payload,
                      int max_depth = kDefaultMaxDepth,
                      size_t node_budget = 2'000'000);

TestInput derive_input(const Grammar& g, Rng& rng, int max_depth = kDefaultMaxDepth);

}  // namespace polyfuzz
