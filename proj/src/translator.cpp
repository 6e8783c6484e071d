#include "polyfuzz/translator.hpp"

#include <algorithm>
#include <cmath>

#include "polyfuzz/kernels.hpp"

namespace polyfuzz {

// --------------------------------------------------------------------------
// LSI

TermDocMatrix build_term_doc(const std::vector<std::vector<std::string>>& docs) {
  TermDocMatrix m;
  for (const auto& doc : docs) {
    for (const auto& tok : doc) {
      if (m.term_index.emplace(tok, static_cast<int>(m.terms.size())).second) {
        m.terms.push_back(tok);
      }
    }
  }
  m.counts = MatD(static_cast<int>(m.terms.size()), static_cast<int>(docs.size()));
  for (size_t d = 0; d < docs.size(); ++d) {
    for (const auto& tok : docs[d]) {
      m.counts.at(m.term_index.at(tok), static_cast<int>(d)) += 1.0;
    }
  }
  return m;
}

void apply_idf(TermDocMatrix& m) {
  const int T = m.counts.rows, D = m.counts.cols;
  for (int t = 0; t < T; ++t) {
    int df = 0;
    double* row = m.counts.row(t);
    for (int d = 0; d < D; ++d) df += row[d] > 0.0 ? 1 : 0;
    double idf = df == 0 ? 0.0 : std::log(static_cast<double>(D) / df);
    for (int d = 0; d < D; ++d) row[d] *= idf;
  }
}

namespace {

// One-sided Jacobi on B (rows x cols): returns B's columns orthogonalized in
// place with the accumulated right rotations in V.
void jacobi_orthogonalize(MatD& b, MatD& v) {
  const int rows = b.rows, cols = b.cols;
  v = MatD(cols, cols);
  for (int i = 0; i < cols; ++i) v.at(i, i) = 1.0;

  auto col_dot = [&](int i, int j) {
    double s = 0.0;
    for (int r = 0; r < rows; ++r) s += b.at(r, i) * b.at(r, j);
    return s;
  };

  const double eps = 1e-12;
  for (int sweep = 0; sweep < 40; ++sweep) {
    bool rotated = false;
    for (int i = 0; i < cols - 1; ++i) {
      for (int j = i + 1; j < cols; ++j) {
        double alpha = col_dot(i, i), beta = col_dot(j, j), gamma = col_dot(i, j);
        if (std::abs(gamma) <= eps * std::sqrt(alpha * beta) || gamma == 0.0) continue;
        rotated = true;
        double zeta = (beta - alpha) / (2.0 * gamma);
        double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = c * t;
        for (int r = 0; r < rows; ++r) {
          double bi = b.at(r, i), bj = b.at(r, j);
          b.at(r, i) = c * bi - s * bj;
          b.at(r, j) = s * bi + c * bj;
        }
        for (int r = 0; r < cols; ++r) {
          double vi = v.at(r, i), vj = v.at(r, j);
          v.at(r, i) = c * vi - s * vj;
          v.at(r, j) = s * vi + c * vj;
        }
      }
    }
    if (!rotated) break;
  }
}

MatD transpose(const MatD& a) {
  MatD t(a.cols, a.rows);
  for (int r = 0; r < a.rows; ++r)
    for (int c = 0; c < a.cols; ++c) t.at(c, r) = a.at(r, c);
  return t;
}

}  // namespace

SvdResult truncated_svd(const MatD& a, int k) {
  if (k < 1) throw PolyfuzzError("truncated_svd: k must be >= 1");
  // Work on the orientation whose column count is the smaller dimension.
  const bool flipped = a.rows < a.cols;
  MatD b = flipped ? transpose(a) : a;
  MatD rot;
  jacobi_orthogonalize(b, rot);

  const int n = b.cols;
  std::vector<std::pair<double, int>> order(n);
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int r = 0; r < b.rows; ++r) s += b.at(r, j) * b.at(r, j);
    order[j] = {std::sqrt(s), j};
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });

  double sig_max = order.empty() ? 0.0 : order[0].first;
  int rank = 0;
  while (rank < n && rank < k && order[rank].first > sig_max * 1e-12 &&
         order[rank].first > 0.0) {
    ++rank;
  }
  rank = std::max(rank, 1);

  // b = U' Sigma, rot = V' of the factored orientation
  MatD left(b.rows, rank), right(rot.rows, rank);
  Vec sigma(rank);
  for (int j = 0; j < rank; ++j) {
    auto [s, col] = order[j];
    sigma[j] = s;
    double inv = s > 0.0 ? 1.0 / s : 0.0;
    for (int r = 0; r < b.rows; ++r) left.at(r, j) = b.at(r, col) * inv;
    for (int r = 0; r < rot.rows; ++r) right.at(r, j) = rot.at(r, col);
  }

  SvdResult out;
  out.sigma = std::move(sigma);
  if (flipped) {  // a^T = left Sigma right^T  =>  a = right Sigma left^T
    out.u = std::move(right);
    out.v = std::move(left);
  } else {
    out.u = std::move(left);
    out.v = std::move(right);
  }
  return out;
}

MatD lsi_doc_vectors(const TermDocMatrix& m, int k) {
  SvdResult svd = truncated_svd(m.counts, k);
  const int r = static_cast<int>(svd.sigma.size());
  MatD docs(m.counts.cols, r);
  for (int d = 0; d < m.counts.cols; ++d) {
    for (int j = 0; j < r; ++j) docs.at(d, j) = svd.sigma[j] * svd.v.at(d, j);
  }
  return docs;
}

double cosine(const double* a, const double* b, int n) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (int i = 0; i < n; ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa <= 0.0 || bb <= 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

PairedCorpus lsi_pair(const std::vector<std::vector<std::string>>& src_corpus,
                      const std::vector<std::vector<std::string>>& dst_corpus,
                      int k, InjectionType src_type, InjectionType dst_type) {
  if (src_corpus.empty() || dst_corpus.empty())
    throw PolyfuzzError("lsi_pair: empty corpus");
  if (k < 1) throw PolyfuzzError("lsi_pair: k must be >= 1");
  if (src_type == dst_type) throw PolyfuzzError("lsi_pair: src and dst types equal");

  std::vector<std::vector<std::string>> all = src_corpus;
  all.insert(all.end(), dst_corpus.begin(), dst_corpus.end());
  TermDocMatrix m = build_term_doc(all);
  apply_idf(m);
  MatD latent = lsi_doc_vectors(m, k);
  const int r = latent.cols;
  const size_t ns = src_corpus.size();

  PairedCorpus out;
  out.src_type = src_type;
  out.dst_type = dst_type;
  out.pairs.resize(ns);
  kernels::parallel_for(ns, [&](size_t i) {
    const double* si = latent.row(static_cast<int>(i));
    double best = -2.0;
    size_t best_j = 0;
    for (size_t j = 0; j < dst_corpus.size(); ++j) {
      double c = cosine(si, latent.row(static_cast<int>(ns + j)), r);
      if (c > best) {
        best = c;
        best_j = j;
      }
    }
    out.pairs[i] = {src_corpus[i], dst_corpus[best_j], best};
  });
  return out;
}

// --------------------------------------------------------------------------
// Seq2seq

namespace {

struct DecoderFeat {
  Vec feat;  // [h; ctx; x]
};

Vec make_feat(const Vec& h, const Vec& ctx, const Vec& x) {
  Vec f;
  f.reserve(h.size() + ctx.size() + x.size());
  f.insert(f.end(), h.begin(), h.end());
  f.insert(f.end(), ctx.begin(), ctx.end());
  f.insert(f.end(), x.begin(), x.end());
  return f;
}

}  // namespace

std::optional<std::vector<int>> TranslationModel::greedy_decode(
    const std::vector<int>& src_ids) const {
  const int H = decoder.hidden_dim;
  std::vector<Vec> enc_states;
  CellState enc = CellState::zeros(encoder);
  size_t n_src = std::min<size_t>(src_ids.size(), static_cast<size_t>(max_len));
  for (size_t t = 0; t < n_src; ++t) {
    enc = cell_step(encoder, embedding.lookup(src_ids[t]), enc);
    enc_states.push_back(enc.h);
  }
  if (enc_states.empty()) enc_states.push_back(Vec(H, 0.0));

  CellState dec = CellState::zeros(decoder);
  dec.h = enc.h.empty() ? Vec(H, 0.0) : enc.h;
  if (decoder.kind == CellKind::lstm)
    dec.c = enc.c.empty() ? Vec(H, 0.0) : enc.c;

  std::vector<int> out;
  int prev = Vocabulary::kBos;
  Vec logits(static_cast<size_t>(w_out.rows));
  for (int step = 0; step < max_len; ++step) {
    Vec x = embedding.lookup(prev);
    dec = cell_step(decoder, x, dec);
    AttentionContext ctx = attend(enc_states, dec.h, attn);
    Vec feat = make_feat(dec.h, ctx.context, x);
    kernels::matvec(w_out.a.data(), w_out.rows, w_out.cols, feat.data(), logits.data());
    for (size_t i = 0; i < logits.size(); ++i) logits[i] += b_out[i];
    logits[Vocabulary::kPad] = -1e30;
    logits[Vocabulary::kBos] = -1e30;
    logits[Vocabulary::kUnk] = -1e30;
    int arg = 0;
    for (int i = 1; i < static_cast<int>(logits.size()); ++i) {
      if (logits[i] > logits[arg]) arg = i;
    }
    if (arg == Vocabulary::kEos) return out;
    out.push_back(arg);
    prev = arg;
  }
  return std::nullopt;  // length cap without EOS
}

std::optional<TestInput> TranslationModel::translate(
    const TestInput& input,
    const std::unordered_set<std::string>* dst_terminal_tokens) const {
  if (input.type != src_type) {
    throw PolyfuzzError("translate type mismatch: model is " + to_string(src_type) +
                        "->" + to_string(dst_type) + ", input is " +
                        to_string(input.type));
  }
  auto decoded = greedy_decode(encode_tokens(input.tokens, *vocab));
  if (!decoded || decoded->empty()) return std::nullopt;

  std::string payload;
  bool sane = dst_terminal_tokens == nullptr;
  for (int id : *decoded) {
    const std::string& tok = vocab->token(id);
    if (!sane && dst_terminal_tokens->count(tok)) sane = true;
    payload += tok;
  }
  if (!sane) return std::nullopt;
  return make_test_input(dst_type, std::move(payload), Origin::translation);
}

TranslatorGrads::TranslatorGrads(const TranslationModel& model)
    : enc(model.encoder),
      dec(model.decoder),
      attn(model.attn.w.rows, model.attn.w.cols),
      w_out(model.w_out.rows, model.w_out.cols),
      b_out(model.b_out.size(), 0.0) {}

void TranslatorGrads::zero() {
  enc.zero();
  dec.zero();
  attn.zero();
  w_out.zero();
  std::fill(b_out.begin(), b_out.end(), 0.0);
}

double TranslatorGrads::sq_norm_all() const {
  return sq_norm(enc.wx) + sq_norm(enc.wh) + sq_norm(enc.b) + sq_norm(dec.wx) +
         sq_norm(dec.wh) + sq_norm(dec.b) + sq_norm(attn) + sq_norm(w_out) +
         sq_norm(b_out);
}

double translator_pair_loss(const TranslationModel& model, const std::vector<int>& src,
                            const std::vector<int>& dst, TranslatorGrads* grads) {
  if (src.empty() || dst.empty())
    throw PolyfuzzError("translator_pair_loss: empty sequence");
  const int H = model.decoder.hidden_dim;
  const int E = model.embedding.dim;
  const int V = static_cast<int>(model.b_out.size());

  // ---- forward: encoder
  std::vector<CellTape> enc_tapes(src.size());
  std::vector<Vec> enc_states(src.size());
  CellState enc = CellState::zeros(model.encoder);
  for (size_t t = 0; t < src.size(); ++t) {
    enc = cell_step(model.encoder, model.embedding.lookup(src[t]), enc, &enc_tapes[t]);
    enc_states[t] = enc.h;
  }

  // ---- forward: decoder with teacher forcing
  std::vector<int> inputs(1, Vocabulary::kBos);
  inputs.insert(inputs.end(), dst.begin(), dst.end());
  std::vector<int> targets(dst.begin(), dst.end());
  targets.push_back(Vocabulary::kEos);
  const size_t T = targets.size();

  std::vector<CellTape> dec_tapes(T);
  std::vector<AttentionTape> attn_tapes(T);
  std::vector<Vec> dec_hs(T), feats(T), probs(T), xs(T);
  CellState dec = CellState::zeros(model.decoder);
  dec.h = enc.h;
  if (model.decoder.kind == CellKind::lstm) dec.c = enc.c;

  double loss = 0.0;
  Vec logits(V);
  for (size_t t = 0; t < T; ++t) {
    xs[t] = model.embedding.lookup(inputs[t]);
    dec = cell_step(model.decoder, xs[t], dec, &dec_tapes[t]);
    dec_hs[t] = dec.h;
    AttentionContext ctx = attend(enc_states, dec.h, model.attn, &attn_tapes[t]);
    feats[t] = make_feat(dec.h, ctx.context, xs[t]);
    kernels::matvec(model.w_out.a.data(), V, 2 * H + E, feats[t].data(), logits.data());
    for (int i = 0; i < V; ++i) logits[i] += model.b_out[i];
    probs[t] = softmax(logits);
    loss += cross_entropy(probs[t], targets[t]);
  }
  if (!grads) return loss;

  // ---- backward
  std::vector<Vec> d_enc(enc_states.size(), Vec(H, 0.0));
  Vec dh(H, 0.0), dc(H, 0.0), dx, dfeat(2 * H + E);
  for (size_t t = T; t-- > 0;) {
    Vec dlogits = probs[t];
    dlogits[targets[t]] -= 1.0;
    kernels::ger(grads->w_out.a.data(), V, 2 * H + E, dlogits.data(), feats[t].data());
    for (int i = 0; i < V; ++i) grads->b_out[i] += dlogits[i];
    kernels::matvec_t(model.w_out.a.data(), V, 2 * H + E, dlogits.data(), dfeat.data());

    Vec dctx(dfeat.begin() + H, dfeat.begin() + 2 * H);
    for (int i = 0; i < H; ++i) dh[i] += dfeat[i];
    attend_backward(enc_states, dec_hs[t], model.attn, attn_tapes[t], dctx, nullptr,
                    d_enc, dh, grads->attn);
    cell_backward(model.decoder, dec_tapes[t], dh, dc, grads->dec, dx);
    // dx flows into the frozen input embedding; dropped
  }

  // decoder initial state was the encoder final state
  for (size_t t = src.size(); t-- > 0;) {
    for (int i = 0; i < H; ++i) dh[i] += d_enc[t][i];
    cell_backward(model.encoder, enc_tapes[t], dh, dc, grads->enc, dx);
  }
  return loss;
}

TranslatorTrainResult train_translator(const PairedCorpus& corpus,
                                       std::shared_ptr<const Vocabulary> vocab,
                                       const EmbeddingTable& pretrained,
                                       const TranslatorConfig& cfg) {
  if (corpus.pairs.empty()) throw PolyfuzzError("train_translator: empty corpus");

  TranslatorTrainResult result;
  TranslationModel& model = result.model;
  model.src_type = corpus.src_type;
  model.dst_type = corpus.dst_type;
  model.vocab = vocab;
  model.embedding = pretrained;
  model.max_len = cfg.max_len;
  const int H = cfg.hidden, E = pretrained.dim, V = vocab->size();

  Rng init = derive_stream(cfg.seed, "xlate_init");
  model.encoder = RecurrentCell::create(cfg.cell, E, H, init);
  model.decoder = RecurrentCell::create(cfg.cell, E, H, init);
  model.attn = AttentionParams::create(H, init);
  model.w_out = MatF(V, 2 * H + E);
  model.w_out.init_uniform(init);
  model.b_out.assign(V, 0.f);

  // pre-encode token ids
  std::vector<std::vector<int>> src_ids(corpus.pairs.size()), dst_ids(corpus.pairs.size());
  for (size_t i = 0; i < corpus.pairs.size(); ++i) {
    src_ids[i] = encode_tokens(corpus.pairs[i].src, *vocab);
    dst_ids[i] = encode_tokens(corpus.pairs[i].dst, *vocab);
    if (static_cast<int>(src_ids[i].size()) > cfg.max_len) src_ids[i].resize(cfg.max_len);
    if (static_cast<int>(dst_ids[i].size()) > cfg.max_len - 1)
      dst_ids[i].resize(cfg.max_len - 1);
  }

  TranslatorGrads grads(model);
  std::vector<size_t> order(corpus.pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng epoch_rng = derive_stream(cfg.seed, "xlate_epoch", static_cast<uint64_t>(epoch));
    epoch_rng.shuffle(order);
    double loss_sum = 0.0;
    size_t token_count = 0;

    for (size_t idx : order) {
      const auto& src = src_ids[idx];
      const auto& dst = dst_ids[idx];
      if (src.empty() || dst.empty()) continue;

      grads.zero();
      loss_sum += translator_pair_loss(model, src, dst, &grads);
      token_count += dst.size() + 1;

      double s = clip_scale(grads.sq_norm_all(), 5.0) * cfg.lr;
      sgd_step(model.encoder.wx, grads.enc.wx, s);
      sgd_step(model.encoder.wh, grads.enc.wh, s);
      sgd_step(model.encoder.b, grads.enc.b, s);
      sgd_step(model.decoder.wx, grads.dec.wx, s);
      sgd_step(model.decoder.wh, grads.dec.wh, s);
      sgd_step(model.decoder.b, grads.dec.b, s);
      sgd_step(model.attn.w, grads.attn, s);
      sgd_step(model.w_out, grads.w_out, s);
      sgd_step(model.b_out, grads.b_out, s);
    }
    result.epoch_losses.push_back(token_count ? loss_sum / token_count : 0.0);
  }
  return result;
}

ModelFile TranslationModel::to_model() const {
  ModelFile m;
  m.model_kind = "translator";
  m.cell_kind = to_string(encoder.kind);
  m.meta["src_type"] = to_string(src_type);
  m.meta["dst_type"] = to_string(dst_type);
  m.meta["hidden"] = std::to_string(encoder.hidden_dim);
  m.meta["embed_dim"] = std::to_string(embedding.dim);
  m.meta["max_len"] = std::to_string(max_len);
  m.tensors.push_back({"embedding", embedding.weights});
  m.tensors.push_back({"enc.wx", encoder.wx});
  m.tensors.push_back({"enc.wh", encoder.wh});
  MatF encb(1, static_cast<int>(encoder.b.size()));
  encb.a = encoder.b;
  m.tensors.push_back({"enc.b", std::move(encb)});
  m.tensors.push_back({"dec.wx", decoder.wx});
  m.tensors.push_back({"dec.wh", decoder.wh});
  MatF decb(1, static_cast<int>(decoder.b.size()));
  decb.a = decoder.b;
  m.tensors.push_back({"dec.b", std::move(decb)});
  m.tensors.push_back({"attn.w", attn.w});
  m.tensors.push_back({"w_out", w_out});
  MatF bout(1, static_cast<int>(b_out.size()));
  bout.a = b_out;
  m.tensors.push_back({"b_out", std::move(bout)});
  return m;
}

TranslationModel TranslationModel::from_model(const ModelFile& m,
                                              std::shared_ptr<const Vocabulary> vocab) {
  if (m.model_kind != "translator")
    throw PolyfuzzError("expected a translator model, got " + m.model_kind);
  TranslationModel t;
  t.src_type = injection_type_from_string(m.meta.at("src_type"));
  t.dst_type = injection_type_from_string(m.meta.at("dst_type"));
  t.vocab = std::move(vocab);
  t.max_len = std::stoi(m.meta.at("max_len"));
  int hidden = std::stoi(m.meta.at("hidden"));
  t.embedding.dim = std::stoi(m.meta.at("embed_dim"));
  t.embedding.weights = m.tensor("embedding");
  CellKind kind = cell_kind_from_string(m.cell_kind);
  auto load_cell = [&](RecurrentCell& cell, const std::string& prefix) {
    cell.kind = kind;
    cell.input_dim = t.embedding.dim;
    cell.hidden_dim = hidden;
    cell.wx = m.tensor(prefix + ".wx");
    cell.wh = m.tensor(prefix + ".wh");
    cell.b = m.tensor(prefix + ".b").a;
  };
  load_cell(t.encoder, "enc");
  load_cell(t.decoder, "dec");
  t.attn.w = m.tensor("attn.w");
  t.w_out = m.tensor("w_out");
  t.b_out = m.tensor("b_out").a;
  if (static_cast<int>(t.vocab->size()) != t.embedding.weights.rows)
    throw PolyfuzzError("translator model does not match vocabulary size");
  return t;
}

}  // namespace polyfuzz
