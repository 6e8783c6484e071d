#include "polyfuzz/evolve.hpp"

#include <algorithm>

#include "polyfuzz/kernels.hpp"
#include "polyfuzz/text.hpp"

namespace polyfuzz {

void RunConfig::validate() const {
  if (pop_size < 2) throw PolyfuzzError("run config: pop_size must be >= 2");
  if (generations < 1) throw PolyfuzzError("run config: generations must be >= 1");
  if (p_transfer < 0.0 || p_transfer > 1.0)
    throw PolyfuzzError("run config: p_transfer must be in [0,1]");
  if (tasks.empty()) throw PolyfuzzError("run config: no tasks");
  if (variant != "mtea" && variant != "stea" && variant != "ran" &&
      variant != "cfg_danuoyi" && variant != "ris") {
    throw PolyfuzzError("run config: unknown variant '" + variant + "'");
  }
  if (oracle_budget > 0 && oracle_budget < static_cast<uint64_t>(pop_size))
    throw PolyfuzzError("run config: oracle_budget must be >= pop_size");
  std::unordered_set<int> seen;
  for (InjectionType t : tasks) {
    if (!seen.insert(static_cast<int>(t)).second)
      throw PolyfuzzError("run config: duplicate task " + to_string(t));
  }
}

bool RunConfig::uses_translation() const {
  return (variant == "mtea" || variant == "ran" || variant == "cfg_danuoyi") &&
         tasks.size() > 1;
}

bool RunConfig::uses_fitness() const { return variant != "ran" && variant != "ris"; }

bool Archive::insert(const TestInput& input, int generation) {
  if (!raw.insert(input.payload).second) return false;
  canonical.insert(decode_chain(input.payload));
  entries.push_back({input.payload, generation, input.origin});
  return true;
}

namespace {

uint64_t task_tag(InjectionType t) { return static_cast<uint64_t>(t); }

const Grammar& grammar_for(const EvolveModels& models, InjectionType t) {
  if (!models.grammars) throw PolyfuzzError("evolve: grammars missing");
  auto it = models.grammars->find(t);
  if (it == models.grammars->end())
    throw PolyfuzzError("evolve: no grammar for task " + to_string(t));
  return it->second;
}

const SurrogateClassifier& classifier_for(const EvolveModels& models, InjectionType t) {
  if (!models.classifiers) throw PolyfuzzError("evolve: classifiers missing");
  auto it = models.classifiers->find(t);
  if (it == models.classifiers->end())
    throw PolyfuzzError("evolve: no classifier for task " + to_string(t));
  return it->second;
}

void require_models(const RunConfig& config, const EvolveModels& models) {
  for (InjectionType t : config.tasks) grammar_for(models, t);
  if (config.uses_fitness() && config.variant != "ris") {
    for (InjectionType t : config.tasks) classifier_for(models, t);
  }
  if (config.uses_translation()) {
    if (!models.translators) throw PolyfuzzError("evolve: translators missing");
    for (InjectionType src : config.tasks) {
      for (InjectionType dst : config.tasks) {
        if (src == dst) continue;
        if (!models.translators->count({src, dst})) {
          throw PolyfuzzError("evolve: no translation model for " + to_string(src) +
                              " -> " + to_string(dst));
        }
      }
    }
  }
  if (config.variant != "ris" && !models.tables)
    throw PolyfuzzError("evolve: mutation tables missing");
}

// Result of producing one child slot; archive candidates are merged
// sequentially in slot order so parallel execution stays deterministic.
struct SlotResult {
  std::vector<TestInput> bypassers;
  TestInput child;
  uint64_t queries = 0;
};

// Draw grammar derivations until one fails to bypass; bypassing draws are
// collected for the archive.
TestInput fresh_nonbypassing(const Grammar& grammar, const Oracle& oracle, Rng& rng,
                             int max_depth, std::vector<TestInput>& bypassers,
                             uint64_t& queries, int cap = 100) {
  for (int i = 0; i < cap; ++i) {
    TestInput cand = derive_input(grammar, rng, max_depth);
    ++queries;
    if (oracle.check(cand.payload).bypassed) {
      bypassers.push_back(std::move(cand));
      continue;
    }
    return cand;
  }
  throw PolyfuzzError(
      "evolve: resample cap hit: the oracle bypasses every derivable input "
      "(degenerate scenario; " +
      std::to_string(bypassers.size()) + " bypasses collected in this slot)");
}

}  // namespace

std::vector<PopulationMember> mu_plus_lambda_select(std::vector<PopulationMember> pool,
                                                    size_t m) {
  if (pool.size() < m)
    throw PolyfuzzError("mu_plus_lambda_select: pool smaller than capacity");
  std::stable_sort(pool.begin(), pool.end(),
                   [](const PopulationMember& a, const PopulationMember& b) {
                     return a.fitness > b.fitness;
                   });
  pool.resize(m);
  return pool;
}

FuzzState initialize(const RunConfig& config, const EvolveModels& models,
                     const Oracle& oracle) {
  config.validate();
  require_models(config, models);

  FuzzState state;
  state.generation = 0;
  for (InjectionType type : config.tasks) {
    const Grammar& grammar = grammar_for(models, type);
    TaskState task;
    task.type = type;

    const uint64_t cap = 100ull * static_cast<uint64_t>(config.pop_size);
    uint64_t draws = 0;
    while (task.population.size() < static_cast<size_t>(config.pop_size)) {
      if (draws >= cap) {
        throw PolyfuzzError("evolve: initialize resample cap hit for task " +
                            to_string(type) + " (archive already holds " +
                            std::to_string(task.archive.count()) +
                            " bypassing inputs; oracle blocks almost nothing)");
      }
      Rng rng = derive_stream(config.seed, "init", task_tag(type), draws);
      TestInput input = derive_input(grammar, rng, config.max_depth);
      ++draws;
      ++task.queries;
      if (oracle.check(input.payload).bypassed) {
        task.archive.insert(input, 0);
      } else {
        task.population.push_back({std::move(input), 0.0});
      }
    }

    if (config.uses_fitness()) {
      const SurrogateClassifier& clf = classifier_for(models, type);
      std::vector<const TestInput*> inputs;
      inputs.reserve(task.population.size());
      for (const auto& m : task.population) inputs.push_back(&m.input);
      std::vector<double> fit = predict_batch(clf, inputs);
      for (size_t i = 0; i < fit.size(); ++i) task.population[i].fitness = fit[i];
    }

    task.mating_pool.clear();
    for (const auto& m : task.population) task.mating_pool.push_back(m.input);
    task.trajectory.push_back(task.archive.count());
    state.tasks.push_back(std::move(task));
  }
  return state;
}

void step_generation(FuzzState& state, const RunConfig& config,
                     const EvolveModels& models, const Oracle& oracle) {
  const int gen = state.generation + 1;
  const int m = config.pop_size;

  for (size_t ti = 0; ti < state.tasks.size(); ++ti) {
    TaskState& task = state.tasks[ti];
    if (task.halted) continue;
    if (config.oracle_budget > 0 &&
        task.queries + static_cast<uint64_t>(m) > config.oracle_budget) {
      task.halted = true;
      continue;
    }

    const InjectionType type = task.type;
    const Grammar& grammar = grammar_for(models, type);
    const bool translation = config.uses_translation();

    std::vector<SlotResult> slots(m);
    kernels::parallel_for(static_cast<size_t>(m), [&](size_t s) {
      SlotResult& slot = slots[s];
      Rng transfer_rng = derive_stream(config.seed, "transfer", task_tag(type),
                                       static_cast<uint64_t>(gen), s);
      Rng mutation_rng = derive_stream(config.seed, "mutation", task_tag(type),
                                       static_cast<uint64_t>(gen), s);
      Rng grammar_rng = derive_stream(config.seed, "grammar", task_tag(type),
                                      static_cast<uint64_t>(gen), s);

      // (a) translation transfer, (b) mutation fallback
      std::optional<TestInput> candidate;
      if (translation && transfer_rng.bernoulli(config.p_transfer)) {
        size_t other = transfer_rng.uniform_index(config.tasks.size() - 1);
        size_t xi = other < ti ? other : other + 1;
        const TaskState& src_task = state.tasks[xi];
        const TestInput& src =
            src_task.mating_pool[transfer_rng.uniform_index(src_task.mating_pool.size())];
        const TranslationModel& model =
            models.translators->at({src_task.type, type});
        candidate = model.translate(src, &grammar.terminal_tokens());
      }
      if (!candidate) {
        if (config.variant == "cfg_danuoyi") {
          candidate = derive_input(grammar, mutation_rng, config.max_depth);
        } else {
          candidate =
              mutate(task.population[s].input, grammar, *models.tables, mutation_rng);
        }
      }

      ++slot.queries;
      if (oracle.check(candidate->payload).bypassed) {
        slot.bypassers.push_back(*candidate);
        slot.child = fresh_nonbypassing(grammar, oracle, grammar_rng, config.max_depth,
                                        slot.bypassers, slot.queries);
      } else {
        slot.child = std::move(*candidate);
      }
    });

    // deterministic merge in slot order
    std::vector<PopulationMember> children;
    children.reserve(m);
    for (auto& slot : slots) {
      task.queries += slot.queries;
      for (const auto& b : slot.bypassers) task.archive.insert(b, gen);
      children.push_back({std::move(slot.child), 0.0});
    }

    if (config.uses_fitness()) {
      const SurrogateClassifier& clf = classifier_for(models, type);
      std::vector<const TestInput*> inputs;
      inputs.reserve(children.size());
      for (const auto& c : children) inputs.push_back(&c.input);
      std::vector<double> fit = predict_batch(clf, inputs);
      for (size_t i = 0; i < fit.size(); ++i) children[i].fitness = fit[i];
    }

    // (mu+lambda) survival
    std::vector<PopulationMember> pool = std::move(task.population);
    pool.insert(pool.end(), std::make_move_iterator(children.begin()),
                std::make_move_iterator(children.end()));
    if (config.uses_fitness()) {
      pool = mu_plus_lambda_select(std::move(pool), static_cast<size_t>(m));
    } else {
      Rng survival_rng = derive_stream(config.seed, "survival", task_tag(type),
                                       static_cast<uint64_t>(gen));
      std::vector<size_t> idx(pool.size());
      for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      survival_rng.shuffle(idx);
      std::vector<PopulationMember> survivors;
      survivors.reserve(m);
      for (int i = 0; i < m; ++i) survivors.push_back(std::move(pool[idx[i]]));
      pool = std::move(survivors);
    }

    // early-stage below-mean replacement keeps diversity up front
    if (config.uses_fitness() && gen <= config.early_stage_generations) {
      double mean = 0.0;
      for (const auto& p : pool) mean += p.fitness;
      mean /= static_cast<double>(pool.size());
      std::vector<size_t> replaced;
      for (size_t i = 0; i < pool.size(); ++i) {
        if (pool[i].fitness >= mean) continue;
        Rng replace_rng = derive_stream(config.seed, "replace", task_tag(type),
                                        static_cast<uint64_t>(gen), i);
        std::vector<TestInput> bypassers;
        pool[i].input = fresh_nonbypassing(grammar, oracle, replace_rng,
                                           config.max_depth, bypassers, task.queries);
        for (const auto& b : bypassers) task.archive.insert(b, gen);
        replaced.push_back(i);
      }
      if (!replaced.empty()) {
        const SurrogateClassifier& clf = classifier_for(models, type);
        std::vector<const TestInput*> inputs;
        for (size_t i : replaced) inputs.push_back(&pool[i].input);
        std::vector<double> fit = predict_batch(clf, inputs);
        for (size_t k = 0; k < replaced.size(); ++k) pool[replaced[k]].fitness = fit[k];
      }
    }

    task.population = std::move(pool);
  }

  // shared mating pool refresh happens only after every task finished
  for (auto& task : state.tasks) {
    if (task.halted) continue;
    task.mating_pool.clear();
    for (const auto& m : task.population) task.mating_pool.push_back(m.input);
  }
  state.generation = gen;
  for (auto& task : state.tasks) task.trajectory.push_back(task.archive.count());
}

namespace {

FuzzReport make_report(const RunConfig& config, const FuzzState& state) {
  FuzzReport report;
  report.config = config;
  for (const auto& task : state.tasks) {
    TaskReport tr;
    tr.type = task.type;
    tr.archive_count = task.archive.count();
    tr.canonical_count = task.archive.canonical_count();
    tr.queries = task.queries;
    tr.trajectory = task.trajectory;
    // pad halted tasks so every trajectory has generations+1 entries
    while (tr.trajectory.size() < static_cast<size_t>(config.generations) + 1) {
      tr.trajectory.push_back(tr.trajectory.back());
    }
    tr.archive = task.archive.entries;
    report.tasks.push_back(std::move(tr));
  }
  return report;
}

FuzzReport run_ris(const RunConfig& config, const EvolveModels& models,
                   const Oracle& oracle, const RunHooks* hooks) {
  const uint64_t budget =
      config.oracle_budget > 0
          ? config.oracle_budget
          : static_cast<uint64_t>(config.pop_size) *
                (static_cast<uint64_t>(config.generations) + 1);

  FuzzState state;
  for (InjectionType type : config.tasks) {
    const Grammar& grammar = grammar_for(models, type);
    TaskState task;
    task.type = type;
    for (uint64_t n = 0; n < budget; ++n) {
      Rng rng = derive_stream(config.seed, "ris", task_tag(type), n);
      TestInput input = derive_input(grammar, rng, config.max_depth);
      ++task.queries;
      if (oracle.check(input.payload).bypassed) task.archive.insert(input, 0);
      if ((n + 1) % static_cast<uint64_t>(config.pop_size) == 0 || n + 1 == budget) {
        task.trajectory.push_back(task.archive.count());
      }
    }
    state.tasks.push_back(std::move(task));
  }
  if (hooks && hooks->on_generation_end) hooks->on_generation_end(state);
  return make_report(config, state);
}

}  // namespace

FuzzReport run_from(FuzzState state, const RunConfig& config, const EvolveModels& models,
                    const Oracle& oracle, const RunHooks* hooks) {
  config.validate();
  require_models(config, models);
  while (state.generation < config.generations) {
    bool all_halted = true;
    for (const auto& t : state.tasks) all_halted = all_halted && t.halted;
    if (all_halted) break;
    step_generation(state, config, models, oracle);
    if (hooks && hooks->on_generation_end) hooks->on_generation_end(state);
  }
  return make_report(config, state);
}

FuzzReport run(const RunConfig& config, const EvolveModels& models, const Oracle& oracle,
               const RunHooks* hooks) {
  config.validate();
  if (config.variant == "ris") return run_ris(config, models, oracle, hooks);
  FuzzState state = initialize(config, models, oracle);
  if (hooks && hooks->on_generation_end) hooks->on_generation_end(state);
  return run_from(std::move(state), config, models, oracle, hooks);
}

}  // namespace polyfuzz
