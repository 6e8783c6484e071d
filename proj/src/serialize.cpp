#include "polyfuzz/serialize.hpp"

#include <fstream>
#include <sstream>

namespace polyfuzz {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PolyfuzzError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PolyfuzzError("cannot write file: " + path);
  out << content;
  if (!out) throw PolyfuzzError("failed writing file: " + path);
}

nlohmann::json corpus_record_to_json(const CorpusRecord& rec) {
  nlohmann::json j;
  j["type"] = to_string(rec.type);
  j["payload"] = rec.payload;
  j["tokens"] = rec.tokens;
  if (rec.bypassed.has_value()) j["label"] = *rec.bypassed ? "bypassed" : "blocked";
  return j;
}

CorpusRecord corpus_record_from_json(const nlohmann::json& j) {
  CorpusRecord rec;
  rec.type = injection_type_from_string(j.at("type").get<std::string>());
  rec.payload = j.at("payload").get<std::string>();
  rec.tokens = j.at("tokens").get<std::vector<std::string>>();
  if (j.contains("label")) {
    std::string label = j["label"].get<std::string>();
    if (label != "bypassed" && label != "blocked")
      throw PolyfuzzError("corpus record: bad label '" + label + "'");
    rec.bypassed = label == "bypassed";
  }
  return rec;
}

std::vector<CorpusRecord> load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PolyfuzzError("cannot open corpus: " + path);
  std::vector<CorpusRecord> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(corpus_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw PolyfuzzError("corpus " + path + " line " + std::to_string(line_no) +
                          ": " + e.what());
    }
  }
  return out;
}

void save_corpus(const std::string& path, const std::vector<CorpusRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PolyfuzzError("cannot write corpus: " + path);
  for (const auto& rec : records) out << corpus_record_to_json(rec).dump() << "\n";
  if (!out) throw PolyfuzzError("failed writing corpus: " + path);
}

void save_paired_corpus(const std::string& path, const PairedCorpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PolyfuzzError("cannot write paired corpus: " + path);
  for (const auto& p : corpus.pairs) {
    nlohmann::json j;
    j["src_type"] = to_string(corpus.src_type);
    j["dst_type"] = to_string(corpus.dst_type);
    j["src"] = p.src;
    j["dst"] = p.dst;
    j["sim"] = p.sim;
    out << j.dump() << "\n";
  }
  if (!out) throw PolyfuzzError("failed writing paired corpus: " + path);
}

PairedCorpus load_paired_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PolyfuzzError("cannot open paired corpus: " + path);
  PairedCorpus corpus;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    InjectionType src_type = injection_type_from_string(j.at("src_type").get<std::string>());
    InjectionType dst_type = injection_type_from_string(j.at("dst_type").get<std::string>());
    if (first) {
      corpus.src_type = src_type;
      corpus.dst_type = dst_type;
      first = false;
    } else if (corpus.src_type != src_type || corpus.dst_type != dst_type) {
      throw PolyfuzzError("paired corpus " + path + ": mixed type pairs");
    }
    corpus.pairs.push_back({j.at("src").get<std::vector<std::string>>(),
                            j.at("dst").get<std::vector<std::string>>(),
                            j.at("sim").get<double>()});
  }
  if (first) throw PolyfuzzError("paired corpus " + path + ": empty");
  return corpus;
}

nlohmann::json tree_to_json(const DerivationTree& tree) {
  nlohmann::json j;
  j["s"] = tree.symbol.name;
  j["t"] = tree.symbol.terminal;
  if (!tree.symbol.terminal) {
    j["a"] = tree.chosen_alternative;
    auto& children = j["c"] = nlohmann::json::array();
    for (const auto& c : tree.children) children.push_back(tree_to_json(*c));
  }
  return j;
}

TreePtr tree_from_json(const nlohmann::json& j) {
  auto node = std::make_shared<DerivationTree>();
  node->symbol.name = j.at("s").get<std::string>();
  node->symbol.terminal = j.at("t").get<bool>();
  if (!node->symbol.terminal) {
    node->chosen_alternative = j.at("a").get<int>();
    for (const auto& c : j.at("c")) node->children.push_back(tree_from_json(c));
  }
  return node;
}

nlohmann::json run_config_to_json(const RunConfig& config) {
  nlohmann::json j;
  auto& tasks = j["tasks"] = nlohmann::json::array();
  for (InjectionType t : config.tasks) tasks.push_back(to_string(t));
  j["pop_size"] = config.pop_size;
  j["generations"] = config.generations;
  j["p_transfer"] = config.p_transfer;
  j["early_stage_generations"] = config.early_stage_generations;
  j["seed"] = config.seed;
  j["variant"] = config.variant;
  j["oracle_budget"] = config.oracle_budget;
  j["max_depth"] = config.max_depth;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig config;
  config.tasks.clear();
  for (const auto& t : j.at("tasks"))
    config.tasks.push_back(injection_type_from_string(t.get<std::string>()));
  config.pop_size = j.at("pop_size").get<int>();
  config.generations = j.at("generations").get<int>();
  config.p_transfer = j.at("p_transfer").get<double>();
  config.early_stage_generations = j.at("early_stage_generations").get<int>();
  config.seed = j.at("seed").get<uint64_t>();
  config.variant = j.at("variant").get<std::string>();
  config.oracle_budget = j.value("oracle_budget", static_cast<uint64_t>(0));
  config.max_depth = j.value("max_depth", kDefaultMaxDepth);
  config.validate();
  return config;
}

nlohmann::json report_to_json(const FuzzReport& report) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["config"] = run_config_to_json(report.config);
  auto& tasks = j["tasks"] = nlohmann::json::object();
  for (const auto& t : report.tasks) {
    nlohmann::json tj;
    tj["archive_count"] = t.archive_count;
    tj["canonical_count"] = t.canonical_count;
    tj["queries"] = t.queries;
    tj["trajectory"] = t.trajectory;
    tasks[to_string(t.type)] = std::move(tj);
  }
  return j;
}

FuzzReport report_from_json(const nlohmann::json& j) {
  FuzzReport report;
  report.config = run_config_from_json(j.at("config"));
  for (InjectionType type : report.config.tasks) {
    const auto& tj = j.at("tasks").at(to_string(type));
    TaskReport t;
    t.type = type;
    t.archive_count = tj.at("archive_count").get<uint64_t>();
    t.canonical_count = tj.at("canonical_count").get<uint64_t>();
    t.queries = tj.at("queries").get<uint64_t>();
    t.trajectory = tj.at("trajectory").get<std::vector<uint64_t>>();
    report.tasks.push_back(std::move(t));
  }
  return report;
}

void save_archive_jsonl(const std::string& path, const TaskReport& task) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PolyfuzzError("cannot write archive: " + path);
  for (const auto& e : task.archive) {
    nlohmann::json j;
    j["payload"] = e.payload;
    j["generation"] = e.generation;
    j["origin"] = to_string(e.origin);
    out << j.dump() << "\n";
  }
  if (!out) throw PolyfuzzError("failed writing archive: " + path);
}

nlohmann::json state_to_json(const FuzzState& state) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["generation"] = state.generation;
  auto& tasks = j["tasks"] = nlohmann::json::array();
  for (const auto& task : state.tasks) {
    nlohmann::json tj;
    tj["type"] = to_string(task.type);
    tj["queries"] = task.queries;
    tj["halted"] = task.halted;
    tj["trajectory"] = task.trajectory;
    auto& pop = tj["population"] = nlohmann::json::array();
    for (const auto& m : task.population) {
      nlohmann::json mj;
      mj["payload"] = m.input.payload;
      mj["origin"] = to_string(m.input.origin);
      mj["fitness"] = m.fitness;
      if (m.input.derivation) mj["tree"] = tree_to_json(*m.input.derivation);
      pop.push_back(std::move(mj));
    }
    auto& pool = tj["mating_pool"] = nlohmann::json::array();
    for (const auto& input : task.mating_pool) {
      pool.push_back({{"payload", input.payload}, {"origin", to_string(input.origin)}});
    }
    auto& arch = tj["archive"] = nlohmann::json::array();
    for (const auto& e : task.archive.entries) {
      arch.push_back({{"payload", e.payload},
                      {"generation", e.generation},
                      {"origin", to_string(e.origin)}});
    }
    tasks.push_back(std::move(tj));
  }
  return j;
}

FuzzState state_from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1)
    throw PolyfuzzError("checkpoint: unsupported format_version");
  FuzzState state;
  state.generation = j.at("generation").get<int>();
  for (const auto& tj : j.at("tasks")) {
    TaskState task;
    task.type = injection_type_from_string(tj.at("type").get<std::string>());
    task.queries = tj.at("queries").get<uint64_t>();
    task.halted = tj.at("halted").get<bool>();
    task.trajectory = tj.at("trajectory").get<std::vector<uint64_t>>();
    for (const auto& mj : tj.at("population")) {
      TreePtr tree;
      if (mj.contains("tree")) tree = tree_from_json(mj["tree"]);
      TestInput input = make_test_input(task.type, mj.at("payload").get<std::string>(),
                                        origin_from_string(mj.at("origin").get<std::string>()),
                                        std::move(tree));
      task.population.push_back({std::move(input), mj.at("fitness").get<double>()});
    }
    for (const auto& pj : tj.at("mating_pool")) {
      task.mating_pool.push_back(
          make_test_input(task.type, pj.at("payload").get<std::string>(),
                          origin_from_string(pj.at("origin").get<std::string>())));
    }
    for (const auto& aj : tj.at("archive")) {
      TestInput input = make_test_input(
          task.type, aj.at("payload").get<std::string>(),
          origin_from_string(aj.at("origin").get<std::string>()));
      task.archive.insert(input, aj.at("generation").get<int>());
    }
    state.tasks.push_back(std::move(task));
  }
  return state;
}

}  // namespace polyfuzz
