#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "polyfuzz/classifier.hpp"
#include "polyfuzz/grammar.hpp"
#include "polyfuzz/mutation.hpp"
#include "polyfuzz/translator.hpp"
#include "polyfuzz/types.hpp"
#include "polyfuzz/waf.hpp"

namespace polyfuzz {

struct RunConfig {
  std::vector<InjectionType> tasks{kAllInjectionTypes,
                                   kAllInjectionTypes + 6};
  int pop_size = 100;                // m
  int generations = 50;              // G
  double p_transfer = 0.5;           // chance a slot tries cross-task transfer
  int early_stage_generations = 10;  // E: below-mean replacement window
  uint64_t seed = 0;
  std::string variant = "mtea";  // mtea | stea | ran | cfg_danuoyi | ris
  uint64_t oracle_budget = 0;    // per-task query cap; 0 = run G generations
  int max_depth = kDefaultMaxDepth;

  void validate() const;
  bool uses_translation() const;
  bool uses_fitness() const;
};

struct PopulationMember {
  TestInput input;
  double fitness = 0.0;
};

struct ArchiveEntry {
  std::string payload;
  int generation = 0;
  Origin origin = Origin::grammar;
};

// Verified-bypass store; raw-payload distinct within a task.
struct Archive {
  std::vector<ArchiveEntry> entries;
  std::unordered_set<std::string> raw;
  std::unordered_set<std::string> canonical;

  bool insert(const TestInput& input, int generation);
  uint64_t count() const { return entries.size(); }
  uint64_t canonical_count() const { return canonical.size(); }
};

struct TaskState {
  InjectionType type = InjectionType::SQLi;
  std::vector<PopulationMember> population;
  std::vector<TestInput> mating_pool;
  Archive archive;
  uint64_t queries = 0;
  bool halted = false;  // oracle budget exhausted
  std::vector<uint64_t> trajectory;  // archive size after init and each generation
};

struct FuzzState {
  int generation = 0;
  std::vector<TaskState> tasks;
};

struct EvolveModels {
  const std::unordered_map<InjectionType, Grammar>* grammars = nullptr;
  const std::unordered_map<InjectionType, SurrogateClassifier>* classifiers = nullptr;
  const TranslatorMap* translators = nullptr;
  const MutationTables* tables = nullptr;
};

struct TaskReport {
  InjectionType type;
  uint64_t archive_count = 0;
  uint64_t canonical_count = 0;
  uint64_t queries = 0;
  std::vector<uint64_t> trajectory;
  std::vector<ArchiveEntry> archive;
};

struct FuzzReport {
  RunConfig config;
  std::vector<TaskReport> tasks;
};

struct RunHooks {
  // invoked after initialize and after every completed generation
  std::function<void(const FuzzState&)> on_generation_end;
};

// (mu+lambda) survival: the best m of parents plus children, stable under
// fitness ties.
std::vector<PopulationMember> mu_plus_lambda_select(std::vector<PopulationMember> pool,
                                                    size_t m);

// Seeds every population with non-bypassing grammar derivations, archiving
// any immediate bypasses. Throws when a task cannot fill m members within
// 100*m draws.
FuzzState initialize(const RunConfig& config, const EvolveModels& models,
                     const Oracle& oracle);

// One (mu+lambda) generation for every non-halted task, then the shared
// mating-pool refresh.
void step_generation(FuzzState& state, const RunConfig& config,
                     const EvolveModels& models, const Oracle& oracle);

FuzzReport run(const RunConfig& config, const EvolveModels& models, const Oracle& oracle,
               const RunHooks* hooks = nullptr);
FuzzReport run_from(FuzzState state, const RunConfig& config, const EvolveModels& models,
                    const Oracle& oracle, const RunHooks* hooks = nullptr);

}  // namespace polyfuzz
