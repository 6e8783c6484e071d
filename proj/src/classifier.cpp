#include "polyfuzz/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "polyfuzz/kernels.hpp"

namespace polyfuzz {

namespace {

std::vector<int> clamp_ids(std::vector<int> ids, int max_len) {
  if (static_cast<int>(ids.size()) > max_len) ids.resize(max_len);
  return ids;
}

}  // namespace

double SurrogateClassifier::predict_ids(std::span<const int> ids) const {
  CellState state = CellState::zeros(cell);
  size_t n = std::min<size_t>(ids.size(), static_cast<size_t>(max_len));
  for (size_t t = 0; t < n; ++t) {
    state = cell_step(cell, embedding.lookup(ids[t]), state);
  }
  double logit = b_out;
  for (int i = 0; i < cell.hidden_dim; ++i) logit += w_out[i] * state.h[i];
  // sigmoid stays strictly inside (0,1) at double precision for any finite logit
  return sigmoid(std::clamp(logit, -30.0, 30.0));
}

double SurrogateClassifier::predict_tokens(const std::vector<std::string>& tokens) const {
  return predict_ids(encode_tokens(tokens, *vocab));
}

double SurrogateClassifier::predict(const TestInput& input) const {
  if (input.type != type) {
    throw PolyfuzzError("classifier type mismatch: model is " + to_string(type) +
                        ", input is " + to_string(input.type));
  }
  return predict_tokens(input.tokens);
}

std::vector<double> predict_batch(const SurrogateClassifier& clf,
                                  const std::vector<const TestInput*>& inputs) {
  std::vector<double> out(inputs.size(), 0.0);
  kernels::parallel_for(inputs.size(),
                        [&](size_t i) { out[i] = clf.predict(*inputs[i]); });
  return out;
}

ClassifierTrainResult train_classifier(const std::vector<LabeledSequence>& dataset,
                                       InjectionType type,
                                       std::shared_ptr<const Vocabulary> vocab,
                                       const EmbeddingTable& pretrained,
                                       const ClassifierConfig& cfg) {
  if (dataset.empty()) throw PolyfuzzError("train_classifier: empty dataset");
  bool has_pos = false, has_neg = false;
  for (const auto& s : dataset) (s.bypassed ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) {
    throw PolyfuzzError("train_classifier: dataset contains a single class only");
  }

  ClassifierTrainResult result;
  SurrogateClassifier& clf = result.classifier;
  clf.type = type;
  clf.vocab = vocab;
  clf.embedding = pretrained;
  clf.max_len = cfg.max_len;
  Rng init = derive_stream(cfg.seed, "clf_init");
  clf.cell = RecurrentCell::create(cfg.cell, pretrained.dim, cfg.hidden, init);
  clf.w_out.assign(cfg.hidden, 0.f);
  for (auto& v : clf.w_out) v = static_cast<float>(init.uniform(-0.08, 0.08));
  clf.b_out = static_cast<float>(init.uniform(-0.08, 0.08));

  // deterministic shuffled split: last val_split fraction is held out
  std::vector<size_t> order(dataset.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng = derive_stream(cfg.seed, "clf_split");
  split_rng.shuffle(order);
  size_t n_val = static_cast<size_t>(std::floor(dataset.size() * cfg.val_split));
  size_t n_train = dataset.size() - n_val;

  std::vector<std::vector<int>> ids(dataset.size());
  for (size_t i = 0; i < dataset.size(); ++i) {
    ids[i] = clamp_ids(encode_tokens(dataset[i].tokens, *vocab), cfg.max_len);
  }

  CellGrads cell_grads(clf.cell);
  MatD embed_grads;
  if (cfg.finetune_embeddings) embed_grads = MatD(clf.embedding.weights.rows, clf.embedding.dim);
  Vec w_out_grad(cfg.hidden, 0.0);

  std::vector<size_t> train_idx(order.begin(), order.begin() + n_train);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng epoch_rng = derive_stream(cfg.seed, "clf_epoch", static_cast<uint64_t>(epoch));
    epoch_rng.shuffle(train_idx);
    double loss_sum = 0.0;
    for (size_t idx : train_idx) {
      const auto& seq = ids[idx];
      double target = dataset[idx].bypassed ? 1.0 : 0.0;

      std::vector<CellTape> tapes(seq.size());
      CellState state = CellState::zeros(clf.cell);
      for (size_t t = 0; t < seq.size(); ++t) {
        state = cell_step(clf.cell, clf.embedding.lookup(seq[t]), state, &tapes[t]);
      }
      double logit = clf.b_out;
      for (int i = 0; i < cfg.hidden; ++i) logit += clf.w_out[i] * state.h[i];
      double p = sigmoid(std::clamp(logit, -30.0, 30.0));
      loss_sum += -(target * std::log(std::max(p, 1e-12)) +
                    (1.0 - target) * std::log(std::max(1.0 - p, 1e-12)));

      double dlogit = p - target;
      cell_grads.zero();
      std::fill(w_out_grad.begin(), w_out_grad.end(), 0.0);
      double db_out = dlogit;
      Vec dh(cfg.hidden), dc(cfg.hidden, 0.0), dx;
      for (int i = 0; i < cfg.hidden; ++i) {
        w_out_grad[i] = dlogit * state.h[i];
        dh[i] = dlogit * clf.w_out[i];
      }
      for (size_t t = seq.size(); t-- > 0;) {
        cell_backward(clf.cell, tapes[t], dh, dc, cell_grads, dx);
        if (cfg.finetune_embeddings) {
          double* row = embed_grads.row(seq[t]);
          for (int i = 0; i < clf.embedding.dim; ++i) row[i] += dx[i];
        }
      }

      double g2 = sq_norm(cell_grads.wx) + sq_norm(cell_grads.wh) + sq_norm(cell_grads.b) +
                  sq_norm(w_out_grad) + db_out * db_out;
      if (cfg.finetune_embeddings) g2 += sq_norm(embed_grads);
      double s = clip_scale(g2, 5.0) * cfg.lr;
      sgd_step(clf.cell.wx, cell_grads.wx, s);
      sgd_step(clf.cell.wh, cell_grads.wh, s);
      sgd_step(clf.cell.b, cell_grads.b, s);
      sgd_step(clf.w_out, w_out_grad, s);
      clf.b_out = static_cast<float>(clf.b_out - s * db_out);
      if (cfg.finetune_embeddings) {
        for (size_t t = 0; t < seq.size(); ++t) {
          double* row = embed_grads.row(seq[t]);
          float* w = clf.embedding.weights.a.data() +
                     static_cast<size_t>(seq[t]) * clf.embedding.dim;
          for (int i = 0; i < clf.embedding.dim; ++i) {
            w[i] = static_cast<float>(w[i] - s * row[i]);
            row[i] = 0.0;
          }
        }
      }
    }
    result.epoch_losses.push_back(loss_sum / std::max<size_t>(1, train_idx.size()));
  }

  size_t correct = 0;
  for (size_t k = n_train; k < order.size(); ++k) {
    size_t idx = order[k];
    double p = clf.predict_ids(ids[idx]);
    if ((p >= 0.5) == dataset[idx].bypassed) ++correct;
  }
  result.val_accuracy = n_val == 0 ? 1.0 : static_cast<double>(correct) / n_val;
  return result;
}

ModelFile SurrogateClassifier::to_model() const {
  ModelFile m;
  m.model_kind = "classifier";
  m.cell_kind = to_string(cell.kind);
  m.meta["injection_type"] = to_string(type);
  m.meta["hidden"] = std::to_string(cell.hidden_dim);
  m.meta["embed_dim"] = std::to_string(embedding.dim);
  m.meta["max_len"] = std::to_string(max_len);
  m.tensors.push_back({"embedding", embedding.weights});
  m.tensors.push_back({"cell.wx", cell.wx});
  m.tensors.push_back({"cell.wh", cell.wh});
  MatF bmat(1, static_cast<int>(cell.b.size()));
  bmat.a = cell.b;
  m.tensors.push_back({"cell.b", std::move(bmat)});
  MatF wout(1, static_cast<int>(w_out.size()));
  wout.a = w_out;
  m.tensors.push_back({"w_out", std::move(wout)});
  MatF bout(1, 1);
  bout.a[0] = b_out;
  m.tensors.push_back({"b_out", std::move(bout)});
  return m;
}

SurrogateClassifier SurrogateClassifier::from_model(
    const ModelFile& m, std::shared_ptr<const Vocabulary> vocab) {
  if (m.model_kind != "classifier")
    throw PolyfuzzError("expected a classifier model, got " + m.model_kind);
  SurrogateClassifier clf;
  clf.type = injection_type_from_string(m.meta.at("injection_type"));
  clf.vocab = std::move(vocab);
  clf.max_len = std::stoi(m.meta.at("max_len"));
  clf.embedding.dim = std::stoi(m.meta.at("embed_dim"));
  clf.embedding.weights = m.tensor("embedding");
  clf.cell.kind = cell_kind_from_string(m.cell_kind);
  clf.cell.input_dim = clf.embedding.dim;
  clf.cell.hidden_dim = std::stoi(m.meta.at("hidden"));
  clf.cell.wx = m.tensor("cell.wx");
  clf.cell.wh = m.tensor("cell.wh");
  clf.cell.b = m.tensor("cell.b").a;
  clf.w_out = m.tensor("w_out").a;
  clf.b_out = m.tensor("b_out").a[0];
  if (static_cast<int>(clf.vocab->size()) != clf.embedding.weights.rows)
    throw PolyfuzzError("classifier model does not match vocabulary size");
  return clf;
}

}  // namespace polyfuzz
