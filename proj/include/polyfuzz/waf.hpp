#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "polyfuzz/types.hpp"

namespace polyfuzz {

struct WafVerdict {
  bool bypassed = false;
  std::optional<std::string> matched_rule;  // simulator, blocked only
  std::chrono::microseconds latency{0};
};

struct WafRule {
  std::string id;
  std::string pattern_text;
  std::regex pattern;       // case-insensitive, compiled at load
  int decode_stages = 0;    // pattern is tried on decode stages 0..decode_stages
  bool enabled = true;
};

struct RuleSet {
  std::vector<WafRule> rules;

  static RuleSet from_json_text(const std::string& text);
};

RuleSet load_ruleset(const std::string& path);

// First matching enabled rule blocks; no match bypasses. Pure and
// deterministic; safe to call from any number of threads.
WafVerdict sim_check(const RuleSet& ruleset, std::string_view payload);

struct HttpOracleConfig {
  std::string url_template;  // must contain {payload} exactly once
  std::string method = "GET";
  std::set<int> blocked_status = {403};
  std::chrono::milliseconds timeout{2000};
  int max_retries = 2;

  void validate() const;
};

// Percent-encodes the payload into the template; blocked iff the response
// status is in blocked_status. Transport errors retry up to max_retries.
WafVerdict http_check(const HttpOracleConfig& config, std::string_view payload);

// Type-erased oracle built from a CLI selector: "sim:<ruleset>" or
// "http:<url template>". POLYFUZZ_WAF_TIMEOUT_MS overrides the HTTP timeout.
class Oracle {
 public:
  Oracle() = default;
  Oracle(std::string description, std::function<WafVerdict(std::string_view)> fn)
      : description_(std::move(description)), fn_(std::move(fn)) {}

  WafVerdict check(std::string_view payload) const { return fn_(payload); }
  const std::string& description() const { return description_; }
  explicit operator bool() const { return static_cast<bool>(fn_); }

 private:
  std::string description_;
  std::function<WafVerdict(std::string_view)> fn_;
};

Oracle make_sim_oracle(RuleSet ruleset, std::string description = "sim");
Oracle make_oracle(const std::string& selector);

}  // namespace polyfuzz
