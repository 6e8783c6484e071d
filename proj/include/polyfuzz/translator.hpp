#pragma once

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "polyfuzz/nlm.hpp"
#include "polyfuzz/text.hpp"
#include "polyfuzz/types.hpp"

namespace polyfuzz {

// --------------------------------------------------------------------------
// Latent semantic indexing

struct TermDocMatrix {
  std::vector<std::string> terms;
  std::unordered_map<std::string, int> term_index;
  MatD counts;  // terms x docs, raw term frequency
};

TermDocMatrix build_term_doc(const std::vector<std::vector<std::string>>& docs);
// In-place tf-idf: tf * log(N/df).
void apply_idf(TermDocMatrix& m);

struct SvdResult {
  MatD u;     // rows(a) x r
  Vec sigma;  // r, descending
  MatD v;     // cols(a) x r
};

// Truncated SVD via one-sided Jacobi on the thinner orientation.
SvdResult truncated_svd(const MatD& a, int k);

// Latent document vectors: sigma .* row of V, one row per document.
MatD lsi_doc_vectors(const TermDocMatrix& m, int k);

double cosine(const double* a, const double* b, int n);

struct PairedCorpus {
  InjectionType src_type = InjectionType::SQLi;
  InjectionType dst_type = InjectionType::XSSi;
  struct Pair {
    std::vector<std::string> src, dst;
    double sim = 0.0;
  };
  std::vector<Pair> pairs;
};

// Pairs every src document with its most similar dst document in the rank-k
// latent space fitted over the union corpus; ties break to the lowest index.
PairedCorpus lsi_pair(const std::vector<std::vector<std::string>>& src_corpus,
                      const std::vector<std::vector<std::string>>& dst_corpus,
                      int k, InjectionType src_type, InjectionType dst_type);

// --------------------------------------------------------------------------
// Seq2seq translation

struct TranslatorConfig {
  CellKind cell = CellKind::lstm;
  int hidden = 128;
  int epochs = 8;
  double lr = 0.1;
  int max_len = 128;
  uint64_t seed = 1;
};

class TranslationModel {
 public:
  InjectionType src_type = InjectionType::SQLi;
  InjectionType dst_type = InjectionType::XSSi;
  std::shared_ptr<const Vocabulary> vocab;
  EmbeddingTable embedding;  // shared by both sides, frozen
  RecurrentCell encoder, decoder;
  AttentionParams attn;
  MatF w_out;                // vocab x (2*hidden + embed_dim)
  std::vector<float> b_out;  // vocab
  int max_len = 128;

  // Greedy decode; empty result means the decoder emitted EOS immediately,
  // nullopt means the length cap was hit without EOS.
  std::optional<std::vector<int>> greedy_decode(const std::vector<int>& src_ids) const;

  // Full translation: decode, detokenize, tag dst_type. Returns nullopt on
  // translation failure (empty decode, no EOS, or no dst-grammar terminal
  // token when a sanity set is given).
  std::optional<TestInput> translate(
      const TestInput& input,
      const std::unordered_set<std::string>* dst_terminal_tokens) const;

  ModelFile to_model() const;
  static TranslationModel from_model(const ModelFile& m,
                                     std::shared_ptr<const Vocabulary> vocab);
};

struct TranslatorTrainResult {
  TranslationModel model;
  std::vector<double> epoch_losses;  // mean per-token cross-entropy
};

struct TranslatorGrads {
  CellGrads enc, dec;
  MatD attn, w_out;
  Vec b_out;

  explicit TranslatorGrads(const TranslationModel& model);
  void zero();
  double sq_norm_all() const;
};

// Teacher-forced loss of one (src, dst) pair, summed over target tokens
// (dst followed by EOS). Fills parameter grads when given; this is the unit
// the trainer applies with SGD and the unit the gradient checks probe.
double translator_pair_loss(const TranslationModel& model, const std::vector<int>& src,
                            const std::vector<int>& dst, TranslatorGrads* grads);

TranslatorTrainResult train_translator(const PairedCorpus& corpus,
                                       std::shared_ptr<const Vocabulary> vocab,
                                       const EmbeddingTable& pretrained,
                                       const TranslatorConfig& cfg);

// Key for the directed model map.
struct TypePair {
  InjectionType src, dst;
  bool operator==(const TypePair& o) const { return src == o.src && dst == o.dst; }
};

struct TypePairHash {
  size_t operator()(const TypePair& p) const {
    return static_cast<size_t>(p.src) * 16 + static_cast<size_t>(p.dst);
  }
};

using TranslatorMap = std::unordered_map<TypePair, TranslationModel, TypePairHash>;

}  // namespace polyfuzz
