#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace polyfuzz {

enum class InjectionType { SQLi, XSSi, XMLi, HTMLi, OSi, PHPi };

inline constexpr InjectionType kAllInjectionTypes[] = {
    InjectionType::SQLi, InjectionType::XSSi, InjectionType::XMLi,
    InjectionType::HTMLi, InjectionType::OSi, InjectionType::PHPi};

std::string to_string(InjectionType t);
InjectionType injection_type_from_string(const std::string& s);

enum class Origin { grammar, mutation, translation };

std::string to_string(Origin o);
Origin origin_from_string(const std::string& s);

struct DerivationTree;
using TreePtr = std::shared_ptr<const DerivationTree>;

// The unit of evolution, translation and WAF evaluation. `payload` is
// authoritative; `tokens` is always the tokenization of `payload`, and for
// whitespace-free payloads (all grammar-generated ones) concatenating the
// tokens reproduces the payload exactly.
struct TestInput {
  InjectionType type;
  std::string payload;
  std::vector<std::string> tokens;
  Origin origin = Origin::grammar;
  TreePtr derivation;  // present iff grammar-originated or grammar-tree-mutated
};

TestInput make_test_input(InjectionType type, std::string payload,
                          Origin origin = Origin::grammar,
                          TreePtr derivation = nullptr);

struct PolyfuzzError : std::runtime_error {
  explicit PolyfuzzError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace polyfuzz
