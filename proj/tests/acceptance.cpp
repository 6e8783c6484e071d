// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Criteria 5 and 6 share a desk-scale model fixture trained
// from the bundled grammars against the bundled simulator ruleset.
//
//   acceptance --cli <path-to-polyfuzz> [--criterion N] [--workdir DIR]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lsi_oracle.hpp"
#include "polyfuzz/classifier.hpp"
#include "polyfuzz/evolve.hpp"
#include "polyfuzz/serialize.hpp"
#include "polyfuzz/stats.hpp"
#include "polyfuzz/text.hpp"
#include "polyfuzz/translator.hpp"
#include "polyfuzz/waf.hpp"

namespace fs = std::filesystem;
using namespace polyfuzz;

namespace {

const std::string kDataDir = POLYFUZZ_DATA_DIR;
std::string g_cli;
fs::path g_workdir;
std::vector<std::string> g_notes;

void note(const std::string& s) { g_notes.push_back(s); }

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// ---------------------------------------------------------------------------
// shared fixture for criteria 5, 6 and 8

struct Fixture {
  std::vector<InjectionType> tasks{kAllInjectionTypes, kAllInjectionTypes + 6};
  std::unordered_map<InjectionType, Grammar> grammars;
  std::shared_ptr<Vocabulary> vocab;
  EmbeddingTable embed;
  std::unordered_map<InjectionType, SurrogateClassifier> classifiers;
  std::unordered_map<InjectionType, double> clf_val_accuracy;
  TranslatorMap translators;
  MutationTables tables = MutationTables::defaults();
  Oracle oracle;

  EvolveModels models() const {
    EvolveModels m;
    m.grammars = &grammars;
    m.classifiers = &classifiers;
    m.translators = &translators;
    m.tables = &tables;
    return m;
  }
};

Fixture& fixture() {
  static Fixture fx = [] {
    Fixture f;
    f.grammars = load_grammar_dir(kDataDir + "/grammars", f.tasks);
    f.oracle = make_sim_oracle(load_ruleset(kDataDir + "/rulesets/sim_modsec_like.json"));

    std::unordered_map<InjectionType, std::vector<std::vector<std::string>>> docs;
    std::unordered_map<InjectionType, std::vector<LabeledSequence>> labeled;
    std::vector<std::vector<std::string>> all_docs;
    for (InjectionType t : f.tasks) {
      for (int i = 0; i < 2000; ++i) {
        Rng rng = derive_stream(555 + static_cast<uint64_t>(t), "fixture", i);
        TestInput input = derive_input(f.grammars.at(t), rng);
        bool bypassed = f.oracle.check(input.payload).bypassed;
        docs[t].push_back(input.tokens);
        labeled[t].push_back({input.tokens, bypassed});
        all_docs.push_back(input.tokens);
      }
    }
    f.vocab = std::make_shared<Vocabulary>(Vocabulary::build(all_docs));

    std::vector<std::vector<int>> encoded;
    for (const auto& d : all_docs) encoded.push_back(encode_tokens(d, *f.vocab));
    CbowConfig ccfg;
    ccfg.dim = 16;
    ccfg.window = 2;
    ccfg.epochs = 2;
    ccfg.lr = 0.05;
    ccfg.seed = 21;
    f.embed = train_cbow(encoded, f.vocab->size(), ccfg).table;

    for (InjectionType t : f.tasks) {
      ClassifierConfig cfg;
      cfg.cell = CellKind::lstm;
      cfg.hidden = 24;
      cfg.epochs = 6;
      cfg.lr = 0.12;
      cfg.seed = 22;
      auto result = train_classifier(labeled.at(t), t, f.vocab, f.embed, cfg);
      f.clf_val_accuracy[t] = result.val_accuracy;
      f.classifiers.emplace(t, std::move(result.classifier));
    }

    for (InjectionType src : f.tasks) {
      for (InjectionType dst : f.tasks) {
        if (src == dst) continue;
        std::vector<std::vector<std::string>> src_docs(docs.at(src).begin(),
                                                       docs.at(src).begin() + 400);
        std::vector<std::vector<std::string>> dst_docs(docs.at(dst).begin(),
                                                       docs.at(dst).begin() + 600);
        PairedCorpus pc = lsi_pair(src_docs, dst_docs, 16, src, dst);
        TranslatorConfig cfg;
        cfg.cell = CellKind::lstm;
        cfg.hidden = 24;
        cfg.epochs = 4;
        cfg.lr = 0.25;
        cfg.seed = 23;
        f.translators.emplace(TypePair{src, dst},
                              train_translator(pc, f.vocab, f.embed, cfg).model);
      }
    }
    return f;
  }();
  return fx;
}

// ---------------------------------------------------------------------------
// criterion 1: gradient correctness

double fd_max_rel_error(std::vector<float>& params, const std::vector<double>& analytic,
                        const std::function<double()>& loss, double eps = 1e-4) {
  double worst = 0.0;
  for (size_t i = 0; i < params.size(); ++i) {
    float saved = params[i];
    params[i] = static_cast<float>(saved + eps);
    float hi_v = params[i];
    double hi = loss();
    params[i] = static_cast<float>(saved - eps);
    float lo_v = params[i];
    double lo = loss();
    params[i] = saved;
    double fd = (hi - lo) / (static_cast<double>(hi_v) - static_cast<double>(lo_v));
    double denom = std::max({1.0, std::abs(analytic[i]), std::abs(fd)});
    worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
  }
  return worst;
}

bool criterion_gradients() {
  double worst = 0.0;

  // CBOW
  for (uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    const int vocab = 9, dim = 3 + static_cast<int>(seed % 3);
    MatF embed(vocab, dim), out(vocab, dim);
    embed.init_uniform(rng, -0.5, 0.5);
    out.init_uniform(rng, -0.5, 0.5);
    std::vector<int> ctx = {4, 6, 7, 8};
    int target = 5;
    Vec dh;
    MatD d_out(vocab, dim);
    cbow_position(embed, out, ctx, target, &dh, &d_out);
    auto loss = [&] { return cbow_position(embed, out, ctx, target, nullptr, nullptr); };
    worst = std::max(worst, fd_max_rel_error(out.a, d_out.a, loss));
    std::vector<double> d_embed(embed.a.size(), 0.0);
    for (int id : ctx)
      for (int d = 0; d < dim; ++d)
        d_embed[static_cast<size_t>(id) * dim + d] += dh[d] / 4.0;
    worst = std::max(worst, fd_max_rel_error(embed.a, d_embed, loss));
  }

  // recurrent cells, 2-step unrolled
  for (CellKind kind : {CellKind::elman, CellKind::gru, CellKind::lstm}) {
    for (uint64_t seed : {5u, 6u}) {
      Rng rng(seed + static_cast<uint64_t>(kind) * 100);
      const int in_dim = 3, hid = 5;
      RecurrentCell cell = RecurrentCell::create(kind, in_dim, hid, rng);
      Vec x1(in_dim), x2(in_dim), w(hid);
      for (auto& v : x1) v = rng.uniform(-1, 1);
      for (auto& v : x2) v = rng.uniform(-1, 1);
      for (auto& v : w) v = rng.uniform(-1, 1);
      auto loss = [&] {
        CellState s = CellState::zeros(cell);
        s = cell_step(cell, x1, s);
        s = cell_step(cell, x2, s);
        double l = 0;
        for (int i = 0; i < hid; ++i) l += w[i] * s.h[i];
        return l;
      };
      CellTape t1, t2;
      CellState s = CellState::zeros(cell);
      s = cell_step(cell, x1, s, &t1);
      s = cell_step(cell, x2, s, &t2);
      CellGrads grads(cell);
      Vec dh = w, dc(hid, 0.0), dx;
      cell_backward(cell, t2, dh, dc, grads, dx);
      cell_backward(cell, t1, dh, dc, grads, dx);
      worst = std::max(worst, fd_max_rel_error(cell.wx.a, grads.wx.a, loss));
      worst = std::max(worst, fd_max_rel_error(cell.wh.a, grads.wh.a, loss));
      worst = std::max(worst, fd_max_rel_error(cell.b, grads.b, loss));
    }
  }

  // attention
  {
    Rng rng(17);
    const int hid = 4;
    AttentionParams params = AttentionParams::create(hid, rng);
    std::vector<Vec> enc(3, Vec(hid));
    Vec dec(hid), r(hid), q(3);
    for (auto& s : enc)
      for (auto& v : s) v = rng.uniform(-1, 1);
    for (auto& v : dec) v = rng.uniform(-1, 1);
    for (auto& v : r) v = rng.uniform(-1, 1);
    for (auto& v : q) v = rng.uniform(-1, 1);
    auto loss = [&] {
      AttentionContext ctx = attend(enc, dec, params);
      double l = 0;
      for (int i = 0; i < hid; ++i) l += r[i] * ctx.context[i];
      for (size_t t = 0; t < enc.size(); ++t) l += q[t] * ctx.weights[t];
      return l;
    };
    AttentionTape tape;
    attend(enc, dec, params, &tape);
    std::vector<Vec> d_enc(enc.size(), Vec(hid, 0.0));
    Vec d_dec(hid, 0.0);
    MatD d_w(hid, hid);
    attend_backward(enc, dec, params, tape, r, &q, d_enc, d_dec, d_w);
    worst = std::max(worst, fd_max_rel_error(params.w.a, d_w.a, loss));
  }

  // translator loss (all three cell kinds)
  {
    std::vector<std::vector<std::string>> docs = {{"p", "q"}, {"r"}};
    auto vocab = std::make_shared<Vocabulary>(Vocabulary::build(docs));
    Rng erng(9);
    EmbeddingTable embed;
    embed.dim = 3;
    embed.weights = MatF(vocab->size(), 3);
    embed.weights.init_uniform(erng, -0.5, 0.5);
    PairedCorpus corpus;
    corpus.src_type = InjectionType::SQLi;
    corpus.dst_type = InjectionType::OSi;
    corpus.pairs.push_back({{"p", "q", "r", "p", "q"}, {"r", "p", "q", "r"}, 0.5});

    for (CellKind kind : {CellKind::elman, CellKind::gru, CellKind::lstm}) {
      TranslatorConfig cfg;
      cfg.cell = kind;
      cfg.hidden = 4;
      cfg.epochs = 1;
      cfg.lr = 0.0;
      cfg.seed = 31;
      TranslationModel model = train_translator(corpus, vocab, embed, cfg).model;
      std::vector<int> src = encode_tokens(corpus.pairs[0].src, *vocab);
      std::vector<int> dst = encode_tokens(corpus.pairs[0].dst, *vocab);
      TranslatorGrads grads(model);
      translator_pair_loss(model, src, dst, &grads);
      auto loss = [&] { return translator_pair_loss(model, src, dst, nullptr); };
      worst = std::max(worst, fd_max_rel_error(model.encoder.wx.a, grads.enc.wx.a, loss));
      worst = std::max(worst, fd_max_rel_error(model.encoder.wh.a, grads.enc.wh.a, loss));
      worst = std::max(worst, fd_max_rel_error(model.encoder.b, grads.enc.b, loss));
      worst = std::max(worst, fd_max_rel_error(model.decoder.wx.a, grads.dec.wx.a, loss));
      worst = std::max(worst, fd_max_rel_error(model.decoder.wh.a, grads.dec.wh.a, loss));
      worst = std::max(worst, fd_max_rel_error(model.decoder.b, grads.dec.b, loss));
      worst = std::max(worst, fd_max_rel_error(model.attn.w.a, grads.attn.a, loss));
      worst = std::max(worst, fd_max_rel_error(model.w_out.a, grads.w_out.a, loss));
      worst = std::max(worst, fd_max_rel_error(model.b_out, grads.b_out, loss));
    }
  }

  note("max gradient relative error " + std::to_string(worst));
  return worst < 1e-3;
}

// ---------------------------------------------------------------------------
// criterion 2: oracle equivalence for a12 / wilcoxon / lsi_pair

double a12_brute(const std::vector<double>& x, const std::vector<double>& y) {
  double wins = 0;
  for (double xi : x)
    for (double yj : y) wins += xi > yj ? 1.0 : (xi == yj ? 0.5 : 0.0);
  return wins / (static_cast<double>(x.size()) * y.size());
}

// bitmask-based exact two-sided rank-sum p, an independent enumeration route
double wilcoxon_exact_bitmask(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size(), total = n + y.size();
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  auto rank_of = [&](double v) {
    double sum = 0;
    int count = 0;
    for (size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i] == v) {
        sum += static_cast<double>(i + 1);
        ++count;
      }
    }
    return sum / count;
  };
  std::vector<double> ranks(total);
  for (size_t i = 0; i < total; ++i) ranks[i] = rank_of(pooled[i]);
  double w_obs = 0;
  for (size_t i = 0; i < n; ++i) w_obs += ranks[i];
  double mu = static_cast<double>(n) * (static_cast<double>(total) + 1) / 2.0;

  std::vector<double> sorted_ranks(total);
  for (size_t i = 0; i < total; ++i) sorted_ranks[i] = rank_of(sorted[i]);
  uint64_t count_total = 0, extreme = 0;
  for (uint32_t mask = 0; mask < (1u << total); ++mask) {
    if (static_cast<size_t>(__builtin_popcount(mask)) != n) continue;
    double w = 0;
    for (size_t i = 0; i < total; ++i) {
      if (mask & (1u << i)) w += sorted_ranks[i];
    }
    ++count_total;
    if (std::abs(w - mu) >= std::abs(w_obs - mu) - 1e-12) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(count_total);
}

bool criterion_stat_oracles() {
  Rng rng(41);
  auto sample = [&](size_t n, int hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = static_cast<double>(rng.uniform_index(hi));
    return v;
  };

  for (int rep = 0; rep < 300; ++rep) {
    auto x = sample(2 + rng.uniform_index(5), 9);
    auto y = sample(2 + rng.uniform_index(5), 9);
    if (stats::a12(x, y) != a12_brute(x, y)) {
      note("a12 mismatch");
      return false;
    }
    if (x.size() + y.size() <= 12) {
      double impl = stats::wilcoxon_rank_sum(x, y);
      double oracle = wilcoxon_exact_bitmask(x, y);
      if (std::abs(impl - oracle) > 1e-12) {
        note("wilcoxon exact mismatch: " + std::to_string(impl) + " vs " +
             std::to_string(oracle));
        return false;
      }
    }
  }

  // lsi_pair vs brute-force latent-cosine argmax on <= 20-document corpora
  static const std::vector<std::string> words = {"or", "and", "alert", "select", "'",
                                                 "=",  "1",   "(",     ")",      "x"};
  for (uint64_t seed = 1; seed <= 6; ++seed) {
    Rng drng(seed);
    auto docs = [&](size_t n) {
      std::vector<std::vector<std::string>> out(n);
      for (auto& d : out) {
        size_t len = 2 + drng.uniform_index(6);
        for (size_t i = 0; i < len; ++i) d.push_back(words[drng.uniform_index(words.size())]);
      }
      return out;
    };
    auto src = docs(10), dst = docs(10);
    PairedCorpus pc = lsi_pair(src, dst, 4, InjectionType::SQLi, InjectionType::XSSi);

    std::vector<std::vector<std::string>> all = src;
    all.insert(all.end(), dst.begin(), dst.end());
    TermDocMatrix m = build_term_doc(all);
    apply_idf(m);
    MatD latent = polyfuzz::testing::latent_from_gram(m.counts, 4);
    for (size_t i = 0; i < src.size(); ++i) {
      double best = -2;
      size_t best_j = 0;
      for (size_t j = 0; j < dst.size(); ++j) {
        double c = cosine(latent.row(static_cast<int>(i)),
                          latent.row(static_cast<int>(src.size() + j)), latent.cols);
        if (c > best) {
          best = c;
          best_j = j;
        }
      }
      if (pc.pairs[i].dst != dst[best_j] || std::abs(pc.pairs[i].sim - best) > 1e-6) {
        note("lsi_pair mismatch at doc " + std::to_string(i));
        return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// criterion 3: classifier accuracy

bool criterion_classifier() {
  // separable synthetic corpus
  static const std::vector<std::string> wordlist = {"a", "b", "c", "d", "e",
                                                    "f", "g", "h", "i", "j"};
  Rng rng(61);
  std::vector<LabeledSequence> data;
  for (int k = 0; k < 2000; ++k) {
    LabeledSequence s;
    size_t len = 3 + rng.uniform_index(8);
    bool blocked = rng.bernoulli(0.5);
    for (size_t i = 0; i < len; ++i)
      s.tokens.push_back(wordlist[rng.uniform_index(wordlist.size())]);
    if (blocked) s.tokens[rng.uniform_index(s.tokens.size())] = "BAD";
    s.bypassed = !blocked;
    data.push_back(std::move(s));
  }
  std::vector<std::vector<std::string>> sentences;
  for (const auto& s : data) sentences.push_back(s.tokens);
  auto vocab = std::make_shared<Vocabulary>(Vocabulary::build(sentences));
  Rng erng(62);
  EmbeddingTable embed;
  embed.dim = 12;
  embed.weights = MatF(vocab->size(), 12);
  embed.weights.init_uniform(erng, -0.3, 0.3);
  ClassifierConfig cfg;
  cfg.hidden = 16;
  cfg.epochs = 3;
  cfg.lr = 0.15;
  cfg.seed = 63;
  double synthetic_acc =
      train_classifier(data, InjectionType::SQLi, vocab, embed, cfg).val_accuracy;
  note("synthetic separable val accuracy " + std::to_string(synthetic_acc));
  if (synthetic_acc < 0.95) return false;

  // bundled simulator-labeled corpora, via the shared fixture classifiers
  Fixture& fx = fixture();
  bool ok = true;
  for (InjectionType t : fx.tasks) {
    double acc = fx.clf_val_accuracy.at(t);
    note(to_string(t) + " simulator-corpus val accuracy " + std::to_string(acc));
    ok = ok && acc >= 0.90 && acc <= 1.00;
  }
  return ok;
}

// ---------------------------------------------------------------------------
// criterion 4: translator sanity

bool criterion_translator() {
  static const std::vector<std::string> words = {"x", "y", "z", "w", "v", "u"};
  Rng rng(77);
  PairedCorpus corpus;
  corpus.src_type = InjectionType::SQLi;
  corpus.dst_type = InjectionType::XSSi;
  std::vector<std::vector<std::string>> docs;
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> seq;
    size_t len = 2 + rng.uniform_index(7);
    for (size_t t = 0; t < len; ++t) seq.push_back(words[rng.uniform_index(words.size())]);
    docs.push_back(seq);
    corpus.pairs.push_back({seq, seq, 1.0});
  }
  auto vocab = std::make_shared<Vocabulary>(Vocabulary::build(docs));
  Rng erng(5);
  EmbeddingTable embed;
  embed.dim = 10;
  embed.weights = MatF(vocab->size(), 10);
  embed.weights.init_uniform(erng, -0.4, 0.4);

  TranslatorConfig cfg;
  cfg.hidden = 24;
  cfg.epochs = 10;
  cfg.lr = 0.35;
  cfg.seed = 3;
  TranslationModel model = train_translator(corpus, vocab, embed, cfg).model;

  size_t correct = 0, total = 0;
  for (const auto& p : corpus.pairs) {
    auto decoded = model.greedy_decode(encode_tokens(p.src, *vocab));
    if (!decoded) return false;
    auto target = encode_tokens(p.dst, *vocab);
    for (size_t t = 0; t < target.size(); ++t) {
      ++total;
      if (t < decoded->size() && (*decoded)[t] == target[t]) ++correct;
    }
  }
  double token_acc = static_cast<double>(correct) / static_cast<double>(total);
  note("copy-task token accuracy " + std::to_string(token_acc));
  if (token_acc < 0.9) return false;

  // attention weights along real decodes sum to 1
  Rng arng(7);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<Vec> enc(1 + arng.uniform_index(6), Vec(24));
    Vec dec(24);
    for (auto& s : enc)
      for (auto& v : s) v = arng.uniform(-2, 2);
    for (auto& v : dec) v = arng.uniform(-2, 2);
    AttentionContext ctx = attend(enc, dec, model.attn);
    double sum = 0;
    for (double w : ctx.weights) sum += w;
    if (std::abs(sum - 1.0) > 1e-6) {
      note("attention weights sum " + std::to_string(sum));
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// criterion 5: evolutionary invariant suite (m=20, G=10, all six tasks)

bool criterion_evolve_invariants() {
  Fixture& fx = fixture();
  RunConfig cfg;
  cfg.tasks = fx.tasks;
  cfg.pop_size = 20;
  cfg.generations = 10;
  cfg.p_transfer = 0.5;
  cfg.early_stage_generations = 3;
  cfg.seed = 2025;
  cfg.variant = "mtea";

  FuzzState state = initialize(cfg, fx.models(), fx.oracle);
  for (int g = 0; g < cfg.generations; ++g) {
    step_generation(state, cfg, fx.models(), fx.oracle);
    for (const auto& task : state.tasks) {
      if (task.population.size() != 20) {
        note("capacity violated");
        return false;
      }
      for (const auto& m : task.population) {
        if (fx.oracle.check(m.input.payload).bypassed) {
          note("population purity violated");
          return false;
        }
      }
      if (task.mating_pool.size() != task.population.size()) return false;
      for (size_t i = 0; i < task.population.size(); ++i) {
        if (task.mating_pool[i].payload != task.population[i].input.payload) {
          note("mating pool freshness violated");
          return false;
        }
      }
    }
  }
  uint64_t total_archived = 0;
  for (const auto& task : state.tasks) {
    std::set<std::string> raw;
    for (const auto& e : task.archive.entries) {
      if (!raw.insert(e.payload).second) {
        note("archive distinctness violated");
        return false;
      }
      if (!fx.oracle.check(e.payload).bypassed) {
        note("archive soundness violated");
        return false;
      }
    }
    for (size_t g = 1; g < task.trajectory.size(); ++g) {
      if (task.trajectory[g] < task.trajectory[g - 1]) {
        note("trajectory not monotone");
        return false;
      }
    }
    total_archived += task.archive.count();
  }
  note("archived " + std::to_string(total_archived) + " distinct bypasses across tasks");

  // reduction: MTEA with p_transfer=0 equals STEA under the same seed
  RunConfig mtea0 = cfg;
  mtea0.p_transfer = 0.0;
  RunConfig stea = cfg;
  stea.variant = "stea";
  FuzzReport a = run(mtea0, fx.models(), fx.oracle);
  FuzzReport b = run(stea, fx.models(), fx.oracle);
  for (size_t t = 0; t < a.tasks.size(); ++t) {
    if (a.tasks[t].archive_count != b.tasks[t].archive_count) {
      note("MTEA(p=0) != STEA archive count");
      return false;
    }
    for (size_t i = 0; i < a.tasks[t].archive.size(); ++i) {
      if (a.tasks[t].archive[i].payload != b.tasks[t].archive[i].payload) {
        note("MTEA(p=0) != STEA archive payloads");
        return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// criterion 6: directional multi-task benefit over 21 seeds

bool criterion_trend() {
  Fixture& fx = fixture();
  const int m = 50, G = 25, runs = 21;
  const uint64_t budget = static_cast<uint64_t>(m) * (G + 1);

  std::map<std::string, std::map<InjectionType, std::vector<double>>> counts;
  for (const std::string variant : {"mtea", "stea", "ran"}) {
    for (int r = 0; r < runs; ++r) {
      RunConfig cfg;
      cfg.tasks = fx.tasks;
      cfg.pop_size = m;
      cfg.generations = G;
      cfg.p_transfer = 0.5;
      cfg.early_stage_generations = 5;
      cfg.seed = 9000 + static_cast<uint64_t>(r);
      cfg.variant = variant;
      cfg.oracle_budget = budget;
      FuzzReport report = run(cfg, fx.models(), fx.oracle);
      for (const auto& task : report.tasks) {
        counts[variant][task.type].push_back(static_cast<double>(task.archive_count));
      }
    }
  }

  int mtea_ge_stea = 0, ran_le_mtea = 0;
  for (InjectionType t : fx.tasks) {
    double med_mtea = stats::median(counts["mtea"][t]);
    double med_stea = stats::median(counts["stea"][t]);
    double med_ran = stats::median(counts["ran"][t]);
    note(to_string(t) + ": median mtea=" + std::to_string(med_mtea) +
         " stea=" + std::to_string(med_stea) + " ran=" + std::to_string(med_ran));
    if (med_mtea >= med_stea) ++mtea_ge_stea;
    if (med_ran <= med_mtea) ++ran_le_mtea;
  }
  note("mtea>=stea on " + std::to_string(mtea_ge_stea) + "/6 tasks; ran<=mtea on " +
       std::to_string(ran_le_mtea) + "/6 tasks");
  return mtea_ge_stea >= 4 && ran_le_mtea >= 4;
}

// ---------------------------------------------------------------------------
// criterion 7: grammar duplicate-rate direction

bool criterion_duplicates() {
  Fixture& fx = fixture();
  auto nondup_fraction = [&](InjectionType t) {
    std::set<std::string> distinct;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      Rng rng = derive_stream(4242, "dup", static_cast<uint64_t>(t), i);
      distinct.insert(render(*derive(fx.grammars.at(t), rng)));
    }
    return static_cast<double>(distinct.size()) / n;
  };
  double osi = nondup_fraction(InjectionType::OSi);
  double sqli = nondup_fraction(InjectionType::SQLi);
  double htmli = nondup_fraction(InjectionType::HTMLi);
  note("non-duplicate fractions: osi=" + std::to_string(osi) +
       " sqli=" + std::to_string(sqli) + " htmli=" + std::to_string(htmli));
  return osi < sqli && sqli < htmli;
}

// ---------------------------------------------------------------------------
// criterion 8: CLI determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int shell(const std::string& args) {
  std::string cmd = g_cli + " " + args + " >" + (g_workdir / "out.log").string() +
                    " 2>" + (g_workdir / "err.log").string();
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

bool criterion_cli_determinism() {
  Fixture& fx = fixture();
  fs::create_directories(g_workdir);
  std::string grammars = " --grammar-dir " + kDataDir + "/grammars ";

  // gen twice
  fs::path a = g_workdir / "det_a.jsonl", b = g_workdir / "det_b.jsonl";
  if (shell("gen --type xssi --count 300 --seed 17" + grammars + "--out " + a.string()))
    return false;
  if (shell("gen --type xssi --count 300 --seed 17" + grammars + "--out " + b.string()))
    return false;
  if (slurp(a) != slurp(b) || slurp(a).empty()) {
    note("gen output differs between identical runs");
    return false;
  }

  // label twice
  fs::path la = g_workdir / "det_la.jsonl", lb = g_workdir / "det_lb.jsonl";
  std::string waf = " --waf sim:" + kDataDir + "/rulesets/sim_modsec_like.json ";
  if (shell("label --in " + a.string() + waf + "--out " + la.string())) return false;
  if (shell("label --in " + a.string() + waf + "--out " + lb.string())) return false;
  if (slurp(la) != slurp(lb)) {
    note("label output differs");
    return false;
  }

  // fuzz twice from saved fixture models (two tasks keep it quick)
  fs::path models = g_workdir / "models";
  fs::create_directories(models);
  write_text_file((models / "vocab.json").string(), fx.vocab->to_json() + "\n");
  for (InjectionType t : {InjectionType::SQLi, InjectionType::OSi}) {
    save_model((models / ("clf_" + to_string(t) + ".pfnn")).string(),
               fx.classifiers.at(t).to_model());
  }
  for (auto [s, d] : {std::pair{InjectionType::SQLi, InjectionType::OSi},
                      std::pair{InjectionType::OSi, InjectionType::SQLi}}) {
    save_model((models / ("xlate_" + to_string(s) + "_" + to_string(d) + ".pfnn")).string(),
               fx.translators.at({s, d}).to_model());
  }
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["grammar_dir"] = kDataDir + "/grammars";
  manifest["waf"] = "sim:" + kDataDir + "/rulesets/sim_modsec_like.json";
  manifest["vocab"] = (models / "vocab.json").string();
  manifest["classifiers"] = {{"sqli", (models / "clf_sqli.pfnn").string()},
                             {"osi", (models / "clf_osi.pfnn").string()}};
  manifest["translators"] =
      nlohmann::json::array({{{"path", (models / "xlate_sqli_osi.pfnn").string()}},
                             {{"path", (models / "xlate_osi_sqli.pfnn").string()}}});
  manifest["run"] = {{"tasks", {"sqli", "osi"}},     {"pop_size", 10},
                     {"generations", 3},             {"p_transfer", 0.5},
                     {"early_stage_generations", 1}, {"seed", 5},
                     {"variant", "mtea"},            {"oracle_budget", 0},
                     {"max_depth", 32}};
  for (const char* run : {"run_x", "run_y"}) {
    manifest["out_dir"] = (g_workdir / run).string();
    fs::create_directories(g_workdir / run);
    write_text_file((g_workdir / "manifest.json").string(), manifest.dump(2));
    if (shell("fuzz --manifest " + (g_workdir / "manifest.json").string())) return false;
  }
  if (slurp(g_workdir / "run_x" / "report.json") !=
      slurp(g_workdir / "run_y" / "report.json")) {
    note("fuzz reports differ between identical runs");
    return false;
  }
  if (slurp(g_workdir / "run_x" / "archive_sqli.jsonl") !=
      slurp(g_workdir / "run_y" / "archive_sqli.jsonl")) {
    note("fuzz archives differ between identical runs");
    return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// criterion 9: WAF fixture fidelity

bool criterion_waf_fixture() {
  RuleSet rs = load_ruleset(kDataDir + "/rulesets/sim_example_2_1.json");
  WafVerdict blocked = sim_check(rs, "OR 1=1");
  WafVerdict bypassed = sim_check(rs, "OR%201=1");
  return !blocked.bypassed && blocked.matched_rule.has_value() && bypassed.bypassed &&
         !bypassed.matched_rule.has_value();
}

struct Criterion {
  int id;
  const char* label;
  double limit_s;
  std::function<bool()> fn;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  g_workdir = fs::temp_directory_path() / "polyfuzz_acceptance";
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--cli" && i + 1 < argc) g_cli = argv[++i];
    else if (arg == "--criterion" && i + 1 < argc) only = std::atoi(argv[++i]);
    else if (arg == "--workdir" && i + 1 < argc) g_workdir = argv[++i];
  }
  fs::remove_all(g_workdir);
  fs::create_directories(g_workdir);

  std::vector<Criterion> criteria = {
      {1, "gradient correctness vs central finite differences", 60, criterion_gradients},
      {2, "statistical and pairing oracle equivalence", 60, criterion_stat_oracles},
      {3, "classifier validation accuracy", 300, criterion_classifier},
      {4, "translator copy-task sanity and attention normalization", 300,
       criterion_translator},
      {5, "evolutionary invariant suite", 300, criterion_evolve_invariants},
      {6, "directional multi-task benefit over 21 seeds", 1800, criterion_trend},
      {7, "grammar duplicate-rate direction", 120, criterion_duplicates},
      {8, "CLI determinism (byte-identical reruns)", 600, criterion_cli_determinism},
      {9, "WAF fixture fidelity (section 2.1 pair)", 60, criterion_waf_fixture},
  };

  bool all_ok = true;
  for (auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    if ((c.id == 8) && g_cli.empty()) {
      std::printf("[FAIL] criterion %d: %s (missing --cli)\n", c.id, c.label);
      all_ok = false;
      continue;
    }
    g_notes.clear();
    double t0 = now_s();
    bool ok = false;
    std::string error;
    try {
      ok = c.fn();
    } catch (const std::exception& e) {
      error = e.what();
    }
    double elapsed = now_s() - t0;
    bool in_budget = elapsed < c.limit_s;
    std::printf("[%s] criterion %d: %s (%.1fs%s)\n",
                ok && in_budget ? "PASS" : "FAIL", c.id, c.label, elapsed,
                in_budget ? "" : ", over time budget");
    for (const auto& n : g_notes) std::printf("       - %s\n", n.c_str());
    if (!error.empty()) std::printf("       - exception: %s\n", error.c_str());
    all_ok = all_ok && ok && in_budget;
  }
  return all_ok ? 0 : 1;
}
