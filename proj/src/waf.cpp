#include "polyfuzz/waf.hpp"

#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <unordered_set>

#include "httplib.h"
#include "json.hpp"
#include "polyfuzz/text.hpp"

namespace polyfuzz {

RuleSet RuleSet::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw PolyfuzzError(std::string("ruleset: invalid JSON: ") + e.what());
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
    throw PolyfuzzError("ruleset: unsupported format_version");

  RuleSet rs;
  std::unordered_set<std::string> ids;
  for (const auto& rj : j.at("rules")) {
    WafRule rule;
    rule.id = rj.at("id").get<std::string>();
    rule.pattern_text = rj.at("pattern").get<std::string>();
    rule.decode_stages = rj.value("decode_stages", 0);
    rule.enabled = rj.value("enabled", true);
    if (rule.decode_stages < 0 || rule.decode_stages > 4)
      throw PolyfuzzError("ruleset: rule '" + rule.id + "': decode_stages must be 0..4");
    if (!ids.insert(rule.id).second)
      throw PolyfuzzError("ruleset: duplicate rule id '" + rule.id + "'");
    try {
      rule.pattern.assign(rule.pattern_text,
                          std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw PolyfuzzError("ruleset: rule '" + rule.id + "': bad pattern: " + e.what());
    }
    rs.rules.push_back(std::move(rule));
  }
  return rs;
}

RuleSet load_ruleset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PolyfuzzError("cannot open ruleset: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return RuleSet::from_json_text(buf.str());
}

WafVerdict sim_check(const RuleSet& ruleset, std::string_view payload) {
  auto t0 = std::chrono::steady_clock::now();

  // Staged decode views, computed lazily up to the deepest stage requested.
  std::string stages[5];
  int computed = 0;
  stages[0] = std::string(payload);
  auto stage = [&](int s) -> const std::string& {
    while (computed < s) {
      stages[computed + 1] = decode_once(stages[computed]);
      ++computed;
    }
    return stages[s];
  };

  WafVerdict verdict;
  verdict.bypassed = true;
  for (const auto& rule : ruleset.rules) {
    if (!rule.enabled) continue;
    for (int s = 0; s <= rule.decode_stages; ++s) {
      if (std::regex_search(stage(s), rule.pattern)) {
        verdict.bypassed = false;
        verdict.matched_rule = rule.id;
        break;
      }
    }
    if (!verdict.bypassed) break;
  }
  verdict.latency = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::steady_clock::now() - t0);
  return verdict;
}

void HttpOracleConfig::validate() const {
  auto first = url_template.find("{payload}");
  if (first == std::string::npos)
    throw PolyfuzzError("http oracle: url template lacks {payload}");
  if (url_template.find("{payload}", first + 1) != std::string::npos)
    throw PolyfuzzError("http oracle: url template has multiple {payload} slots");
  if (timeout.count() <= 0) throw PolyfuzzError("http oracle: timeout must be > 0");
}

WafVerdict http_check(const HttpOracleConfig& config, std::string_view payload) {
  config.validate();
  auto t0 = std::chrono::steady_clock::now();

  std::string url = config.url_template;
  url.replace(url.find("{payload}"), 9, percent_encode(payload));

  // split scheme://host[:port]/path
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw PolyfuzzError("http oracle: bad url");
  auto path_start = url.find('/', scheme_end + 3);
  std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(config.timeout).count(),
                                (config.timeout.count() % 1000) * 1000);
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(config.timeout).count(),
                          (config.timeout.count() % 1000) * 1000);

  httplib::Result res;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (config.method == "POST") {
      res = client.Post(path, "", "text/plain");
    } else {
      res = client.Get(path);
    }
    if (res) break;
  }
  if (!res) {
    throw PolyfuzzError("http oracle: request failed after " +
                        std::to_string(config.max_retries + 1) + " attempts (" +
                        httplib::to_string(res.error()) + ")");
  }

  WafVerdict verdict;
  verdict.bypassed = config.blocked_status.count(res->status) == 0;
  verdict.latency = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::steady_clock::now() - t0);
  return verdict;
}

Oracle make_sim_oracle(RuleSet ruleset, std::string description) {
  auto rs = std::make_shared<RuleSet>(std::move(ruleset));
  return Oracle(std::move(description),
                [rs](std::string_view payload) { return sim_check(*rs, payload); });
}

Oracle make_oracle(const std::string& selector) {
  if (selector.rfind("sim:", 0) == 0) {
    return make_sim_oracle(load_ruleset(selector.substr(4)), selector);
  }
  if (selector.rfind("http:", 0) == 0 || selector.rfind("https://", 0) == 0) {
    HttpOracleConfig cfg;
    // accept both "http:<template>" and a bare "http(s)://..." template
    cfg.url_template = selector.rfind("http://", 0) == 0 || selector.rfind("https://", 0) == 0
                           ? selector
                           : selector.substr(5);
    if (const char* ms = std::getenv("POLYFUZZ_WAF_TIMEOUT_MS")) {
      cfg.timeout = std::chrono::milliseconds(std::strtol(ms, nullptr, 10));
    }
    cfg.validate();
    return Oracle(selector, [cfg](std::string_view payload) {
      return http_check(cfg, payload);
    });
  }
  throw PolyfuzzError("unknown WAF selector (want sim:<path> or http:<template>): " +
                      selector);
}

}  // namespace polyfuzz
