#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "polyfuzz/evolve.hpp"
#include "polyfuzz/grammar.hpp"
#include "polyfuzz/translator.hpp"
#include "polyfuzz/types.hpp"

namespace polyfuzz {

// Corpus JSON Lines record: {"type","payload","tokens"[,"label"]}
struct CorpusRecord {
  InjectionType type = InjectionType::SQLi;
  std::string payload;
  std::vector<std::string> tokens;
  std::optional<bool> bypassed;  // label, when present
};

nlohmann::json corpus_record_to_json(const CorpusRecord& rec);
CorpusRecord corpus_record_from_json(const nlohmann::json& j);
std::vector<CorpusRecord> load_corpus(const std::string& path);
void save_corpus(const std::string& path, const std::vector<CorpusRecord>& records);

// PairedCorpus JSON Lines: {"src_type","dst_type","src","dst","sim"}
void save_paired_corpus(const std::string& path, const PairedCorpus& corpus);
PairedCorpus load_paired_corpus(const std::string& path);

nlohmann::json tree_to_json(const DerivationTree& tree);
TreePtr tree_from_json(const nlohmann::json& j);

nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const FuzzReport& report);
FuzzReport report_from_json(const nlohmann::json& j);

// archive_<type>.jsonl records: {"payload","generation","origin"}
void save_archive_jsonl(const std::string& path, const TaskReport& task);

nlohmann::json state_to_json(const FuzzState& state);
FuzzState state_from_json(const nlohmann::json& j);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace polyfuzz
