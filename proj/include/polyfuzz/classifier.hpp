#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "polyfuzz/nlm.hpp"
#include "polyfuzz/text.hpp"
#include "polyfuzz/types.hpp"

namespace polyfuzz {

struct ClassifierConfig {
  CellKind cell = CellKind::lstm;
  int hidden = 128;
  int epochs = 4;
  double lr = 0.1;
  double val_split = 0.1;
  bool finetune_embeddings = false;
  int max_len = 128;  // longer sequences are truncated
  uint64_t seed = 1;
};

struct LabeledSequence {
  std::vector<std::string> tokens;
  bool bypassed = false;
};

// Final-hidden-state -> sigmoid logit; the fitness function of the search.
class SurrogateClassifier {
 public:
  InjectionType type = InjectionType::SQLi;
  std::shared_ptr<const Vocabulary> vocab;
  EmbeddingTable embedding;
  RecurrentCell cell;
  std::vector<float> w_out;  // hidden
  float b_out = 0.f;
  int max_len = 128;

  double predict_ids(std::span<const int> ids) const;
  double predict_tokens(const std::vector<std::string>& tokens) const;
  double predict(const TestInput& input) const;  // checks injection type

  ModelFile to_model() const;
  static SurrogateClassifier from_model(const ModelFile& m,
                                        std::shared_ptr<const Vocabulary> vocab);
};

struct ClassifierTrainResult {
  SurrogateClassifier classifier;
  double val_accuracy = 0.0;
  std::vector<double> epoch_losses;  // mean training BCE per epoch
};

ClassifierTrainResult train_classifier(const std::vector<LabeledSequence>& dataset,
                                       InjectionType type,
                                       std::shared_ptr<const Vocabulary> vocab,
                                       const EmbeddingTable& pretrained,
                                       const ClassifierConfig& cfg);

// Parallel batch prediction; output order matches input order.
std::vector<double> predict_batch(const SurrogateClassifier& clf,
                                  const std::vector<const TestInput*>& inputs);

}  // namespace polyfuzz
