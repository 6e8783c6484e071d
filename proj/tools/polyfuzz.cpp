// polyfuzz: grammar-driven multi-task injection fuzzing against WAF oracles.
//
// Subcommands: gen, label, pair, train embed|clf|xlate, fuzz, report compare.
// Every command taking --seed is byte-reproducible for a fixed seed/config.

#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "polyfuzz/classifier.hpp"
#include "polyfuzz/evolve.hpp"
#include "polyfuzz/grammar.hpp"
#include "polyfuzz/kernels.hpp"
#include "polyfuzz/mutation.hpp"
#include "polyfuzz/nlm.hpp"
#include "polyfuzz/serialize.hpp"
#include "polyfuzz/stats.hpp"
#include "polyfuzz/text.hpp"
#include "polyfuzz/translator.hpp"
#include "polyfuzz/waf.hpp"

namespace fs = std::filesystem;
using namespace polyfuzz;

namespace {

struct GlobalOpts {
  uint64_t seed = 0;
  int jobs = 0;
  std::string waf;
  std::string grammar_dir = "data/grammars";
  std::string out;
};

std::vector<InjectionType> parse_types(const std::string& csv) {
  std::vector<InjectionType> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(injection_type_from_string(item));
  }
  if (out.empty()) throw PolyfuzzError("no injection types given");
  return out;
}

// ---------------------------------------------------------------------------
// gen

int cmd_gen(const GlobalOpts& g, const std::string& type_name, long count,
            bool paper_scale, int max_depth) {
  if (count < 0) count = paper_scale ? 20000 : 2000;
  InjectionType type = injection_type_from_string(type_name);
  Grammar grammar = load_grammar_file(g.grammar_dir + "/" + type_name + ".cfg", type);

  std::vector<CorpusRecord> records;
  records.resize(static_cast<size_t>(count));
  kernels::parallel_for(static_cast<size_t>(count), [&](size_t i) {
    Rng rng = derive_stream(g.seed, "gen", static_cast<uint64_t>(type), i);
    TestInput input = derive_input(grammar, rng, max_depth);
    records[i] = {type, std::move(input.payload), std::move(input.tokens), std::nullopt};
  });
  save_corpus(g.out, records);
  std::cout << "wrote " << count << " " << type_name << " inputs to " << g.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// label

int cmd_label(const GlobalOpts& g, const std::string& in_path) {
  if (g.waf.empty()) throw PolyfuzzError("label: --waf is required");
  Oracle oracle = make_oracle(g.waf);
  std::vector<CorpusRecord> records = load_corpus(in_path);
  kernels::parallel_for(records.size(), [&](size_t i) {
    records[i].bypassed = oracle.check(records[i].payload).bypassed;
  });
  save_corpus(g.out, records);
  size_t bypassed = 0;
  for (const auto& r : records) bypassed += r.bypassed.value() ? 1 : 0;
  std::cout << "labeled " << records.size() << " inputs (" << bypassed
            << " bypassed) to " << g.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// pair

int cmd_pair(const GlobalOpts& g, const std::string& src_path,
             const std::string& dst_path, int k, long limit, bool paper_scale) {
  if (limit < 0) limit = paper_scale ? 30000 : 3000;
  auto src_records = load_corpus(src_path);
  auto dst_records = load_corpus(dst_path);
  if (src_records.empty() || dst_records.empty())
    throw PolyfuzzError("pair: empty corpus");
  if (limit > 0 && static_cast<long>(src_records.size()) > limit)
    src_records.resize(static_cast<size_t>(limit));

  std::vector<std::vector<std::string>> src_docs, dst_docs;
  for (const auto& r : src_records) src_docs.push_back(r.tokens);
  for (const auto& r : dst_records) dst_docs.push_back(r.tokens);

  PairedCorpus corpus = lsi_pair(src_docs, dst_docs, k, src_records.front().type,
                                 dst_records.front().type);
  save_paired_corpus(g.out, corpus);
  std::cout << "paired " << corpus.pairs.size() << " " << to_string(corpus.src_type)
            << " -> " << to_string(corpus.dst_type) << " inputs to " << g.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train embed | clf | xlate

int cmd_train_embed(const GlobalOpts& g, const std::vector<std::string>& corpus_paths,
                    int dim, int window, int epochs, double lr) {
  std::vector<std::vector<std::string>> sentences;
  for (const auto& path : corpus_paths) {
    for (auto& rec : load_corpus(path)) sentences.push_back(std::move(rec.tokens));
  }
  if (sentences.empty()) throw PolyfuzzError("train embed: no input sentences");

  auto vocab = Vocabulary::build(sentences);
  std::vector<std::vector<int>> encoded;
  encoded.reserve(sentences.size());
  for (const auto& s : sentences) encoded.push_back(encode_tokens(s, vocab));

  CbowConfig cfg;
  cfg.dim = dim;
  cfg.window = window;
  cfg.epochs = epochs;
  cfg.lr = lr;
  cfg.seed = g.seed;
  CbowResult result = train_cbow(encoded, vocab.size(), cfg);

  fs::create_directories(g.out);
  write_text_file(g.out + "/vocab.json", vocab.to_json() + "\n");
  ModelFile m;
  m.model_kind = "embedding";
  m.meta["dim"] = std::to_string(dim);
  m.tensors.push_back({"embedding", result.table.weights});
  save_model(g.out + "/embed.pfnn", m);
  std::cout << "trained embeddings: vocab " << vocab.size() << ", dim " << dim
            << ", final loss " << result.epoch_losses.back() << "\n";
  return 0;
}

EmbeddingTable load_embedding(const std::string& path) {
  ModelFile m = load_model(path);
  if (m.model_kind != "embedding")
    throw PolyfuzzError("expected an embedding model: " + path);
  EmbeddingTable t;
  t.dim = std::stoi(m.meta.at("dim"));
  t.weights = m.tensor("embedding");
  return t;
}

int cmd_train_clf(const GlobalOpts& g, const std::string& corpus_path,
                  const std::string& vocab_path, const std::string& embed_path,
                  const std::string& cell, int hidden, int epochs, double lr,
                  double val_split, bool finetune) {
  auto vocab = std::make_shared<Vocabulary>(Vocabulary::from_json(read_text_file(vocab_path)));
  EmbeddingTable embed = load_embedding(embed_path);
  auto records = load_corpus(corpus_path);
  if (records.empty()) throw PolyfuzzError("train clf: empty corpus");
  InjectionType type = records.front().type;

  std::vector<LabeledSequence> dataset;
  for (auto& rec : records) {
    if (!rec.bypassed.has_value())
      throw PolyfuzzError("train clf: corpus record lacks a label (run `label` first)");
    if (rec.type != type) throw PolyfuzzError("train clf: mixed types in corpus");
    dataset.push_back({std::move(rec.tokens), *rec.bypassed});
  }

  ClassifierConfig cfg;
  cfg.cell = cell_kind_from_string(cell);
  cfg.hidden = hidden;
  cfg.epochs = epochs;
  cfg.lr = lr;
  cfg.val_split = val_split;
  cfg.finetune_embeddings = finetune;
  cfg.seed = g.seed;
  ClassifierTrainResult result = train_classifier(dataset, type, vocab, embed, cfg);

  fs::create_directories(g.out);
  std::string path = g.out + "/clf_" + to_string(type) + ".pfnn";
  save_model(path, result.classifier.to_model());
  std::cout << "trained " << to_string(type) << " classifier: val accuracy "
            << result.val_accuracy << " -> " << path << "\n";
  return 0;
}

int cmd_train_xlate(const GlobalOpts& g, const std::string& pairs_path,
                    const std::string& vocab_path, const std::string& embed_path,
                    const std::string& cell, int hidden, int epochs, double lr) {
  auto vocab = std::make_shared<Vocabulary>(Vocabulary::from_json(read_text_file(vocab_path)));
  EmbeddingTable embed = load_embedding(embed_path);
  PairedCorpus corpus = load_paired_corpus(pairs_path);

  TranslatorConfig cfg;
  cfg.cell = cell_kind_from_string(cell);
  cfg.hidden = hidden;
  cfg.epochs = epochs;
  cfg.lr = lr;
  cfg.seed = g.seed;
  TranslatorTrainResult result = train_translator(corpus, vocab, embed, cfg);

  fs::create_directories(g.out);
  std::string path = g.out + "/xlate_" + to_string(corpus.src_type) + "_" +
                     to_string(corpus.dst_type) + ".pfnn";
  save_model(path, result.model.to_model());
  std::cout << "trained translator " << to_string(corpus.src_type) << " -> "
            << to_string(corpus.dst_type) << ": final loss "
            << result.epoch_losses.back() << " -> " << path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fuzz

struct Campaign {
  std::unordered_map<InjectionType, Grammar> grammars;
  std::unordered_map<InjectionType, SurrogateClassifier> classifiers;
  TranslatorMap translators;
  MutationTables tables;
  RunConfig config;
  Oracle oracle;
  std::string out_dir;
  std::string checkpoint;
};

Campaign load_campaign(const std::string& manifest_path, const GlobalOpts& g) {
  nlohmann::json j = nlohmann::json::parse(read_text_file(manifest_path));
  if (j.value("format_version", 0) != 1)
    throw PolyfuzzError("manifest: unsupported format_version");

  Campaign c;
  c.config = run_config_from_json(j.at("run"));
  if (g.seed != 0) c.config.seed = g.seed;

  std::string grammar_dir = j.value("grammar_dir", g.grammar_dir);
  c.grammars = load_grammar_dir(grammar_dir, c.config.tasks);

  std::string waf = !g.waf.empty() ? g.waf : j.at("waf").get<std::string>();
  c.oracle = make_oracle(waf);

  if (c.config.uses_fitness() && c.config.variant != "ris") {
    auto vocab = std::make_shared<Vocabulary>(
        Vocabulary::from_json(read_text_file(j.at("vocab").get<std::string>())));
    for (const auto& [name, path] : j.at("classifiers").items()) {
      InjectionType type = injection_type_from_string(name);
      c.classifiers.emplace(type,
                            SurrogateClassifier::from_model(load_model(path), vocab));
    }
    if (c.config.uses_translation()) {
      for (const auto& tj : j.at("translators")) {
        TranslationModel model = TranslationModel::from_model(
            load_model(tj.at("path").get<std::string>()), vocab);
        c.translators.emplace(TypePair{model.src_type, model.dst_type}, std::move(model));
      }
    }
  } else if (c.config.uses_translation()) {
    auto vocab = std::make_shared<Vocabulary>(
        Vocabulary::from_json(read_text_file(j.at("vocab").get<std::string>())));
    for (const auto& tj : j.at("translators")) {
      TranslationModel model = TranslationModel::from_model(
          load_model(tj.at("path").get<std::string>()), vocab);
      c.translators.emplace(TypePair{model.src_type, model.dst_type}, std::move(model));
    }
  }

  if (j.contains("mutation_tables")) {
    c.tables = MutationTables::load(j.at("mutation_tables").get<std::string>());
  } else {
    c.tables = MutationTables::defaults();
  }
  c.out_dir = !g.out.empty() ? g.out : j.at("out_dir").get<std::string>();
  c.checkpoint = j.value("checkpoint", std::string());
  return c;
}

int cmd_fuzz(const GlobalOpts& g, const std::string& manifest_path, bool resume) {
  Campaign c = load_campaign(manifest_path, g);
  fs::create_directories(c.out_dir);

  EvolveModels models;
  models.grammars = &c.grammars;
  models.classifiers = &c.classifiers;
  models.translators = &c.translators;
  models.tables = &c.tables;

  RunHooks hooks;
  if (!c.checkpoint.empty()) {
    hooks.on_generation_end = [&](const FuzzState& state) {
      std::string tmp = c.checkpoint + ".tmp";
      write_text_file(tmp, state_to_json(state).dump() + "\n");
      fs::rename(tmp, c.checkpoint);
    };
  }

  FuzzReport report;
  if (resume) {
    if (c.checkpoint.empty() || !fs::exists(c.checkpoint))
      throw PolyfuzzError("fuzz --resume: no checkpoint file at '" + c.checkpoint + "'");
    FuzzState state = state_from_json(nlohmann::json::parse(read_text_file(c.checkpoint)));
    if (state.tasks.size() != c.config.tasks.size())
      throw PolyfuzzError("fuzz --resume: checkpoint does not match manifest tasks");
    report = run_from(std::move(state), c.config, models, c.oracle,
                      c.checkpoint.empty() ? nullptr : &hooks);
  } else {
    report = run(c.config, models, c.oracle, c.checkpoint.empty() ? nullptr : &hooks);
  }

  write_text_file(c.out_dir + "/report.json", report_to_json(report).dump(2) + "\n");
  for (const auto& task : report.tasks) {
    save_archive_jsonl(c.out_dir + "/archive_" + to_string(task.type) + ".jsonl", task);
  }
  for (const auto& task : report.tasks) {
    std::cout << to_string(task.type) << ": " << task.archive_count << " distinct ("
              << task.canonical_count << " canonical) bypasses, " << task.queries
              << " oracle queries\n";
  }
  std::cout << "report written to " << c.out_dir << "/report.json\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report compare

struct ReportGroup {
  std::string label;
  std::vector<FuzzReport> runs;
};

int cmd_report_compare(const std::vector<std::string>& files,
                       const std::string& out_csv, const std::string& out_text) {
  if (files.empty()) throw PolyfuzzError("report compare: no report files");

  std::vector<ReportGroup> groups;
  auto group_for = [&](const std::string& label) -> ReportGroup& {
    for (auto& g : groups) {
      if (g.label == label) return g;
    }
    groups.push_back({label, {}});
    return groups.back();
  };
  for (const auto& spec : files) {
    std::string label, path = spec;
    if (auto eq = spec.find('='); eq != std::string::npos && spec.rfind("label:", 0) != 0) {
      label = spec.substr(0, eq);
      path = spec.substr(eq + 1);
    }
    FuzzReport report = report_from_json(nlohmann::json::parse(read_text_file(path)));
    if (label.empty()) label = report.config.variant;
    group_for(label).runs.push_back(std::move(report));
  }
  // comparing N copies of one algorithm: treat each file as its own group
  if (groups.size() == 1 && groups.front().runs.size() > 1) {
    ReportGroup merged = std::move(groups.front());
    groups.clear();
    for (size_t i = 0; i < merged.runs.size(); ++i) {
      groups.push_back({merged.label + "#" + std::to_string(i + 1),
                        {std::move(merged.runs[i])}});
    }
  }

  std::vector<InjectionType> tasks = groups.front().runs.front().config.tasks;
  std::ostringstream text, csv;
  csv << "task,algorithm,median,iqr,p_vs_" << groups.front().label << ",a12_vs_"
      << groups.front().label << ",sk_rank\n";

  for (InjectionType task : tasks) {
    auto values_for = [&](const ReportGroup& g) {
      std::vector<double> v;
      for (const auto& run : g.runs) {
        for (const auto& t : run.tasks) {
          if (t.type == task) v.push_back(static_cast<double>(t.archive_count));
        }
      }
      return v;
    };

    std::vector<stats::MetricSample> samples;
    for (const auto& g : groups) samples.push_back({g.label, values_for(g)});
    auto ranks = stats::scott_knott(samples);

    text << "== task " << to_string(task) << " (distinct bypasses) ==\n";
    const auto& base = samples.front().values;
    for (size_t gi = 0; gi < groups.size(); ++gi) {
      const auto& vals = samples[gi].values;
      double med = stats::median(vals), spread = stats::iqr(vals);
      double p = gi == 0 ? 1.0 : stats::wilcoxon_rank_sum(vals, base);
      double effect = gi == 0 ? 0.5 : stats::a12(vals, base);
      text << "  " << samples[gi].label << ": median " << med << " (IQR " << spread
           << ")";
      if (gi > 0) text << ", p=" << p << ", A12=" << effect;
      text << ", rank " << ranks[gi].second << "\n";
      csv << to_string(task) << "," << samples[gi].label << "," << med << "," << spread
          << "," << p << "," << effect << "," << ranks[gi].second << "\n";
    }
  }

  if (!out_text.empty()) {
    write_text_file(out_text, text.str());
  } else {
    std::cout << text.str();
  }
  if (!out_csv.empty()) write_text_file(out_csv, csv.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polyfuzz: multi-task injection fuzzing toolkit"};
  app.fallthrough(true);
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "run seed (all randomness derives from it)");
  app.add_option("--jobs", g.jobs, "worker thread cap (0 = hardware)");
  app.add_option("--waf", g.waf, "oracle selector: sim:<ruleset> or http:<template>");
  app.add_option("--grammar-dir", g.grammar_dir, "directory with <type>.cfg files");
  app.add_option("--out", g.out, "output file or directory");

  // gen
  auto* gen = app.add_subcommand("gen", "sample payloads from a grammar");
  std::string gen_type;
  long gen_count = -1;
  bool gen_paper = false;
  int gen_max_depth = kDefaultMaxDepth;
  gen->add_option("--type", gen_type, "injection type")->required();
  gen->add_option("--count", gen_count, "number of inputs (default 2000)");
  gen->add_flag("--paper-scale", gen_paper, "use the published corpus size (20000)");
  gen->add_option("--max-depth", gen_max_depth, "derivation depth cap");

  // label
  auto* label = app.add_subcommand("label", "label a corpus with a WAF oracle");
  std::string label_in;
  label->add_option("--in", label_in, "input corpus (jsonl)")->required();

  // pair
  auto* pair = app.add_subcommand("pair", "LSI pairing of two corpora");
  std::string pair_src, pair_dst;
  int pair_k = 64;
  long pair_limit = -1;
  bool pair_paper = false;
  pair->add_option("--src", pair_src, "source corpus")->required();
  pair->add_option("--dst", pair_dst, "destination corpus")->required();
  pair->add_option("--k", pair_k, "latent rank");
  pair->add_option("--limit", pair_limit, "max pairs (default 3000; 0 = all)");
  pair->add_flag("--paper-scale", pair_paper, "use the published pair count (30000)");

  // train
  auto* train = app.add_subcommand("train", "train models");
  train->require_subcommand(1);
  auto* embed = train->add_subcommand("embed", "CBOW embeddings + vocabulary");
  std::vector<std::string> embed_corpora;
  int embed_dim = 128, embed_window = 2, embed_epochs = 5;
  double embed_lr = 0.05;
  embed->add_option("--corpus", embed_corpora, "corpus files (repeatable)")->required();
  embed->add_option("--dim", embed_dim, "embedding dimension");
  embed->add_option("--window", embed_window, "context window");
  embed->add_option("--epochs", embed_epochs, "training epochs");
  embed->add_option("--lr", embed_lr, "learning rate");

  auto* clf = train->add_subcommand("clf", "surrogate bypass classifier");
  std::string clf_corpus, clf_vocab, clf_embed, clf_cell = "lstm";
  int clf_hidden = 128, clf_epochs = 4;
  double clf_lr = 0.1, clf_val = 0.1;
  bool clf_finetune = false;
  clf->add_option("--corpus", clf_corpus, "labeled corpus")->required();
  clf->add_option("--vocab", clf_vocab, "vocab.json")->required();
  clf->add_option("--embed", clf_embed, "embed.pfnn")->required();
  clf->add_option("--cell", clf_cell, "elman|gru|lstm");
  clf->add_option("--hidden", clf_hidden, "hidden units");
  clf->add_option("--epochs", clf_epochs, "training epochs");
  clf->add_option("--lr", clf_lr, "learning rate");
  clf->add_option("--val-split", clf_val, "validation fraction");
  clf->add_flag("--finetune-embeddings", clf_finetune, "unfreeze the embedding table");

  auto* xlate = train->add_subcommand("xlate", "cross-type translation model");
  std::string xlate_pairs, xlate_vocab, xlate_embed, xlate_cell = "lstm";
  int xlate_hidden = 128, xlate_epochs = 8;
  double xlate_lr = 0.1;
  xlate->add_option("--pairs", xlate_pairs, "paired corpus (jsonl)")->required();
  xlate->add_option("--vocab", xlate_vocab, "vocab.json")->required();
  xlate->add_option("--embed", xlate_embed, "embed.pfnn")->required();
  xlate->add_option("--cell", xlate_cell, "elman|gru|lstm");
  xlate->add_option("--hidden", xlate_hidden, "hidden units");
  xlate->add_option("--epochs", xlate_epochs, "training epochs");
  xlate->add_option("--lr", xlate_lr, "learning rate");

  // fuzz
  auto* fuzz = app.add_subcommand("fuzz", "run a fuzzing campaign");
  std::string fuzz_manifest;
  bool fuzz_resume = false;
  fuzz->add_option("--manifest", fuzz_manifest, "campaign manifest (json)")->required();
  fuzz->add_flag("--resume", fuzz_resume, "continue from the manifest checkpoint");

  // report
  auto* report = app.add_subcommand("report", "reporting utilities");
  report->require_subcommand(1);
  auto* compare = report->add_subcommand("compare", "compare fuzz reports");
  std::vector<std::string> compare_files;
  std::string compare_csv, compare_text;
  compare->add_option("files", compare_files, "report files ([label=]path)")->required();
  compare->add_option("--out-csv", compare_csv, "CSV output path");
  compare->add_option("--out-text", compare_text, "text output path");

  CLI11_PARSE(app, argc, argv);
  kernels::set_threads(g.jobs);

  try {
    if (*gen) return cmd_gen(g, gen_type, gen_count, gen_paper, gen_max_depth);
    if (*label) return cmd_label(g, label_in);
    if (*pair) return cmd_pair(g, pair_src, pair_dst, pair_k, pair_limit, pair_paper);
    if (*embed)
      return cmd_train_embed(g, embed_corpora, embed_dim, embed_window, embed_epochs,
                             embed_lr);
    if (*clf)
      return cmd_train_clf(g, clf_corpus, clf_vocab, clf_embed, clf_cell, clf_hidden,
                           clf_epochs, clf_lr, clf_val, clf_finetune);
    if (*xlate)
      return cmd_train_xlate(g, xlate_pairs, xlate_vocab, xlate_embed, xlate_cell,
                             xlate_hidden, xlate_epochs, xlate_lr);
    if (*fuzz) return cmd_fuzz(g, fuzz_manifest, fuzz_resume);
    if (*compare) return cmd_report_compare(compare_files, compare_csv, compare_text);
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"]["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
