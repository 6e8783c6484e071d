#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "polyfuzz/grammar.hpp"
#include "polyfuzz/rng.hpp"
#include "polyfuzz/types.hpp"

namespace polyfuzz {

// Per-type blank-synonym and comment inventories. Loadable from a JSON config
// (mutation_tables.json) and overridable per run.
struct MutationTables {
  std::unordered_map<InjectionType, std::vector<std::string>> blanks;
  std::unordered_map<InjectionType, std::vector<std::string>> comments;

  static MutationTables defaults();
  static MutationTables from_json_text(const std::string& text);
  static MutationTables load(const std::string& path);

  const std::vector<std::string>& blanks_for(InjectionType t) const;
  const std::vector<std::string>& comments_for(InjectionType t) const;
};

enum class MutOp {
  grammar_tree = 0,
  case_transform = 1,
  blank = 2,
  comment = 3,
  ascii = 4,
  unicode = 5,
};

std::string to_string(MutOp op);

// A single operator application. nullopt = operator not applicable to this
// input (e.g. blank replacement with no blank-class occurrence).
std::optional<TestInput> apply_operator(MutOp op, const TestInput& input,
                                        const Grammar* grammar,
                                        const MutationTables& tables, Rng& rng);

// Uniformly picks among the applicable operators (grammar-tree only when a
// derivation is present), retrying with a different operator on
// not-applicable. Falls back to returning the input unchanged only when no
// operator applies at all.
TestInput mutate(const TestInput& input, const Grammar& grammar,
                 const MutationTables& tables, Rng& rng);

}  // namespace polyfuzz
