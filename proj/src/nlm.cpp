#include "polyfuzz/nlm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "polyfuzz/kernels.hpp"

namespace polyfuzz {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec softmax(std::span<const double> logits) {
  Vec out(logits.size());
  double mx = -1e300;
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

double cross_entropy(std::span<const double> probs, int target_index) {
  double p = probs[static_cast<size_t>(target_index)];
  return -std::log(std::max(p, 1e-300));
}

Vec EmbeddingTable::lookup(int id) const {
  Vec v(dim);
  const float* row = weights.row(id);
  for (int i = 0; i < dim; ++i) v[i] = row[i];
  return v;
}

// ---------------------------------------------------------------------------
// CBOW

double cbow_position(const MatF& embed, const MatF& out_mat,
                     std::span<const int> context, int target, Vec* dh, MatD* d_out) {
  if (context.empty()) throw PolyfuzzError("cbow_position: empty context");
  const int dim = embed.cols;
  const int vocab = out_mat.rows;
  Vec h(dim, 0.0);
  for (int id : context) {
    const float* row = embed.row(id);
    for (int d = 0; d < dim; ++d) h[d] += row[d];
  }
  for (double& v : h) v /= static_cast<double>(context.size());

  Vec logits(vocab);
  kernels::matvec(out_mat.a.data(), vocab, dim, h.data(), logits.data());
  Vec p = softmax(logits);
  double loss = cross_entropy(p, target);

  if (dh || d_out) {
    p[target] -= 1.0;
    if (d_out) kernels::ger(d_out->a.data(), vocab, dim, p.data(), h.data());
    if (dh) {
      dh->assign(dim, 0.0);
      kernels::matvec_t(out_mat.a.data(), vocab, dim, p.data(), dh->data());
    }
  }
  return loss;
}

CbowResult train_cbow(const std::vector<std::vector<int>>& corpus, int vocab_size,
                      const CbowConfig& cfg) {
  if (corpus.empty()) throw PolyfuzzError("train_cbow: empty corpus");
  if (cfg.dim < 1 || cfg.window < 1) throw PolyfuzzError("train_cbow: bad config");

  Rng init = derive_stream(cfg.seed, "cbow_init");
  EmbeddingTable table;
  table.dim = cfg.dim;
  table.weights = MatF(vocab_size, cfg.dim);
  table.weights.init_uniform(init);
  MatF out_mat(vocab_size, cfg.dim);  // output projection, row per vocab entry
  out_mat.init_uniform(init);

  // (sentence, position) pairs with a non-empty context window
  std::vector<std::pair<uint32_t, uint32_t>> positions;
  for (uint32_t s = 0; s < corpus.size(); ++s) {
    if (corpus[s].size() < 2) continue;
    for (uint32_t i = 0; i < corpus[s].size(); ++i) positions.push_back({s, i});
  }
  if (positions.empty()) throw PolyfuzzError("train_cbow: no trainable positions");

  CbowResult result;
  Vec h(cfg.dim), logits(vocab_size), dh(cfg.dim);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = derive_stream(cfg.seed, "cbow_shuffle", static_cast<uint64_t>(epoch));
    shuffle_rng.shuffle(positions);
    double loss_sum = 0.0;
    for (auto [s, i] : positions) {
      const auto& sent = corpus[s];
      int lo = std::max<int>(0, static_cast<int>(i) - cfg.window);
      int hi = std::min<int>(static_cast<int>(sent.size()) - 1, static_cast<int>(i) + cfg.window);
      int n_ctx = 0;
      std::fill(h.begin(), h.end(), 0.0);
      for (int j = lo; j <= hi; ++j) {
        if (j == static_cast<int>(i)) continue;
        const float* row = table.weights.row(sent[j]);
        for (int d = 0; d < cfg.dim; ++d) h[d] += row[d];
        ++n_ctx;
      }
      if (n_ctx == 0) continue;
      for (double& v : h) v /= n_ctx;

      kernels::matvec(out_mat.a.data(), vocab_size, cfg.dim, h.data(), logits.data());
      Vec p = softmax(logits);
      int target = sent[i];
      loss_sum += cross_entropy(p, target);
      p[target] -= 1.0;  // now dL/dlogits

      // dU = dlogits h^T (rank 1), dh = U^T dlogits
      kernels::matvec_t(out_mat.a.data(), vocab_size, cfg.dim, p.data(), dh.data());

      // global-norm clip; the rank-1 structure keeps this cheap
      double g2 = sq_norm(p) * sq_norm(h) + sq_norm(dh) / n_ctx;
      double scale = clip_scale(g2, 5.0) * cfg.lr;

      for (int v = 0; v < vocab_size; ++v) {
        if (p[v] == 0.0) continue;
        float* row = out_mat.a.data() + static_cast<size_t>(v) * cfg.dim;
        double pv = p[v] * scale;
        for (int d = 0; d < cfg.dim; ++d)
          row[d] = static_cast<float>(row[d] - pv * h[d]);
      }
      double ctx_scale = scale / n_ctx;
      for (int j = lo; j <= hi; ++j) {
        if (j == static_cast<int>(i)) continue;
        float* row = table.weights.a.data() + static_cast<size_t>(sent[j]) * cfg.dim;
        for (int d = 0; d < cfg.dim; ++d)
          row[d] = static_cast<float>(row[d] - ctx_scale * dh[d]);
      }
    }
    result.epoch_losses.push_back(loss_sum / positions.size());
  }
  result.table = std::move(table);
  result.out_weights = std::move(out_mat);
  return result;
}

// ---------------------------------------------------------------------------
// Recurrent cells

std::string to_string(CellKind k) {
  switch (k) {
    case CellKind::elman: return "elman";
    case CellKind::gru: return "gru";
    case CellKind::lstm: return "lstm";
  }
  throw PolyfuzzError("unknown cell kind");
}

CellKind cell_kind_from_string(const std::string& s) {
  if (s == "elman") return CellKind::elman;
  if (s == "gru") return CellKind::gru;
  if (s == "lstm") return CellKind::lstm;
  throw PolyfuzzError("unknown cell kind: " + s);
}

int RecurrentCell::gate_count() const {
  switch (kind) {
    case CellKind::elman: return 1;
    case CellKind::gru: return 3;  // r, z, n
    case CellKind::lstm: return 4;  // i, f, g, o
  }
  return 0;
}

RecurrentCell RecurrentCell::create(CellKind kind, int input_dim, int hidden_dim,
                                    Rng& rng) {
  RecurrentCell cell;
  cell.kind = kind;
  cell.input_dim = input_dim;
  cell.hidden_dim = hidden_dim;
  int g = cell.gate_count();
  cell.wx = MatF(g * hidden_dim, input_dim);
  cell.wh = MatF(g * hidden_dim, hidden_dim);
  cell.b.assign(static_cast<size_t>(g) * hidden_dim, 0.f);
  cell.wx.init_uniform(rng);
  cell.wh.init_uniform(rng);
  for (auto& v : cell.b) v = static_cast<float>(rng.uniform(-0.08, 0.08));
  return cell;
}

CellState CellState::zeros(const RecurrentCell& cell) {
  CellState s;
  s.h.assign(cell.hidden_dim, 0.0);
  if (cell.kind == CellKind::lstm) s.c.assign(cell.hidden_dim, 0.0);
  return s;
}

CellGrads::CellGrads(const RecurrentCell& cell)
    : wx(cell.wx.rows, cell.wx.cols),
      wh(cell.wh.rows, cell.wh.cols),
      b(cell.b.size(), 0.0) {}

void CellGrads::zero() {
  wx.zero();
  wh.zero();
  std::fill(b.begin(), b.end(), 0.0);
}

CellState cell_step(const RecurrentCell& cell, const Vec& x, const CellState& prev,
                    CellTape* tape) {
  if (static_cast<int>(x.size()) != cell.input_dim ||
      static_cast<int>(prev.h.size()) != cell.hidden_dim) {
    throw PolyfuzzError("cell_step: shape mismatch");
  }
  const int H = cell.hidden_dim;
  const int G = cell.gate_count();
  Vec pre(static_cast<size_t>(G) * H);
  Vec xpart(pre.size()), hpart(pre.size());
  kernels::matvec(cell.wx.a.data(), G * H, cell.input_dim, x.data(), xpart.data());
  kernels::matvec(cell.wh.a.data(), G * H, H, prev.h.data(), hpart.data());

  CellState next;
  next.h.assign(H, 0.0);
  Vec act(pre.size());
  Vec hh_n, c_new, tanh_c;

  switch (cell.kind) {
    case CellKind::elman: {
      for (int i = 0; i < H; ++i) {
        pre[i] = xpart[i] + hpart[i] + cell.b[i];
        act[i] = std::tanh(pre[i]);
        next.h[i] = act[i];
      }
      break;
    }
    case CellKind::gru: {
      // gate order: r, z, n;  n = tanh(wx_n x + b_n + r .* (wh_n h))
      hh_n.assign(H, 0.0);
      for (int i = 0; i < H; ++i) {
        pre[i] = xpart[i] + hpart[i] + cell.b[i];            // r
        pre[H + i] = xpart[H + i] + hpart[H + i] + cell.b[H + i];  // z
        act[i] = sigmoid(pre[i]);
        act[H + i] = sigmoid(pre[H + i]);
        hh_n[i] = hpart[2 * H + i];
      }
      for (int i = 0; i < H; ++i) {
        pre[2 * H + i] = xpart[2 * H + i] + cell.b[2 * H + i] + act[i] * hh_n[i];
        act[2 * H + i] = std::tanh(pre[2 * H + i]);
        next.h[i] = (1.0 - act[H + i]) * act[2 * H + i] + act[H + i] * prev.h[i];
      }
      break;
    }
    case CellKind::lstm: {
      if (static_cast<int>(prev.c.size()) != H)
        throw PolyfuzzError("cell_step: lstm needs a cell state");
      c_new.assign(H, 0.0);
      tanh_c.assign(H, 0.0);
      for (int g = 0; g < 4; ++g) {
        for (int i = 0; i < H; ++i) {
          int k = g * H + i;
          pre[k] = xpart[k] + hpart[k] + cell.b[k];
          act[k] = (g == 2) ? std::tanh(pre[k]) : sigmoid(pre[k]);
        }
      }
      for (int i = 0; i < H; ++i) {
        c_new[i] = act[H + i] * prev.c[i] + act[i] * act[2 * H + i];
        tanh_c[i] = std::tanh(c_new[i]);
        next.h[i] = act[3 * H + i] * tanh_c[i];
      }
      next.c = c_new;
      break;
    }
  }

  if (tape) {
    tape->x = x;
    tape->h_prev = prev.h;
    tape->c_prev = prev.c;
    tape->pre = std::move(pre);
    tape->act = std::move(act);
    tape->hh_n = std::move(hh_n);
    tape->c = next.c;
    tape->tanh_c = std::move(tanh_c);
    tape->h = next.h;
  }
  return next;
}

void cell_backward(const RecurrentCell& cell, const CellTape& tape, Vec& dh, Vec& dc,
                   CellGrads& grads, Vec& dx) {
  const int H = cell.hidden_dim;
  const int G = cell.gate_count();
  Vec dpre(static_cast<size_t>(G) * H, 0.0);
  Vec dh_prev(H, 0.0);
  dx.assign(cell.input_dim, 0.0);

  switch (cell.kind) {
    case CellKind::elman: {
      for (int i = 0; i < H; ++i) {
        double a = tape.act[i];
        dpre[i] = dh[i] * (1.0 - a * a);
      }
      break;
    }
    case CellKind::gru: {
      for (int i = 0; i < H; ++i) {
        double r = tape.act[i], z = tape.act[H + i], n = tape.act[2 * H + i];
        double dn = dh[i] * (1.0 - z);
        double dz = dh[i] * (tape.h_prev[i] - n);
        dh_prev[i] += dh[i] * z;
        double dpre_n = dn * (1.0 - n * n);
        dpre[2 * H + i] = dpre_n;
        double dr = dpre_n * tape.hh_n[i];
        dpre[i] = dr * r * (1.0 - r);
        dpre[H + i] = dz * z * (1.0 - z);
      }
      break;
    }
    case CellKind::lstm: {
      for (int i = 0; i < H; ++i) {
        double ig = tape.act[i], fg = tape.act[H + i], gg = tape.act[2 * H + i],
               og = tape.act[3 * H + i];
        double tc = tape.tanh_c[i];
        double d_o = dh[i] * tc;
        double dct = dc[i] + dh[i] * og * (1.0 - tc * tc);
        dpre[3 * H + i] = d_o * og * (1.0 - og);
        dpre[H + i] = dct * tape.c_prev[i] * fg * (1.0 - fg);
        dpre[i] = dct * gg * ig * (1.0 - ig);
        dpre[2 * H + i] = dct * ig * (1.0 - gg * gg);
        dc[i] = dct * fg;
      }
      break;
    }
  }

  // parameter grads
  kernels::ger(grads.wx.a.data(), G * H, cell.input_dim, dpre.data(), tape.x.data());
  if (cell.kind == CellKind::gru) {
    // r and z rows take h_prev; the n row pairs with (r .* grad) on wh_n
    kernels::ger(grads.wh.a.data(), 2 * H, H, dpre.data(), tape.h_prev.data());
    Vec dhh_n(H);
    for (int i = 0; i < H; ++i) dhh_n[i] = dpre[2 * H + i] * tape.act[i];
    kernels::ger(grads.wh.row(2 * H), H, H, dhh_n.data(), tape.h_prev.data());
    // input grads
    kernels::matvec_t(cell.wx.a.data(), G * H, cell.input_dim, dpre.data(), dx.data());
    Vec tmp(H);
    kernels::matvec_t(cell.wh.a.data(), 2 * H, H, dpre.data(), tmp.data());
    for (int i = 0; i < H; ++i) dh_prev[i] += tmp[i];
    kernels::matvec_t(cell.wh.a.data() + static_cast<size_t>(2) * H * H, H, H,
                      dhh_n.data(), tmp.data());
    for (int i = 0; i < H; ++i) dh_prev[i] += tmp[i];
  } else {
    kernels::ger(grads.wh.a.data(), G * H, H, dpre.data(), tape.h_prev.data());
    kernels::matvec_t(cell.wx.a.data(), G * H, cell.input_dim, dpre.data(), dx.data());
    Vec tmp(H);
    kernels::matvec_t(cell.wh.a.data(), G * H, H, dpre.data(), tmp.data());
    for (int i = 0; i < H; ++i) dh_prev[i] += tmp[i];
  }
  for (size_t i = 0; i < dpre.size(); ++i) grads.b[i] += dpre[i];
  dh = dh_prev;
}

// ---------------------------------------------------------------------------
// Attention

AttentionParams AttentionParams::create(int hidden_dim, Rng& rng) {
  AttentionParams p;
  p.w = MatF(hidden_dim, hidden_dim);
  p.w.init_uniform(rng);
  return p;
}

AttentionContext attend(const std::vector<Vec>& encoder_states, const Vec& decoder_state,
                        const AttentionParams& params, AttentionTape* tape) {
  if (encoder_states.empty()) throw PolyfuzzError("attend: empty encoder states");
  const int H = static_cast<int>(decoder_state.size());
  const size_t S = encoder_states.size();

  std::vector<Vec> w_enc(S, Vec(H));
  Vec scores(S);
  for (size_t t = 0; t < S; ++t) {
    kernels::matvec(params.w.a.data(), H, H, encoder_states[t].data(), w_enc[t].data());
    scores[t] = kernels::dot(decoder_state.data(), w_enc[t].data(), H);
  }
  AttentionContext ctx;
  ctx.weights = softmax(scores);
  ctx.context.assign(H, 0.0);
  for (size_t t = 0; t < S; ++t)
    kernels::axpy(ctx.weights[t], encoder_states[t].data(), ctx.context.data(), H);

  if (tape) {
    tape->w_enc = std::move(w_enc);
    tape->out = ctx;
  }
  return ctx;
}

void attend_backward(const std::vector<Vec>& encoder_states, const Vec& decoder_state,
                     const AttentionParams& params, const AttentionTape& tape,
                     const Vec& d_context, const Vec* d_weights,
                     std::vector<Vec>& d_enc, Vec& d_dec, MatD& d_w) {
  const int H = static_cast<int>(decoder_state.size());
  const size_t S = encoder_states.size();
  const Vec& a = tape.out.weights;

  Vec da(S, 0.0);
  for (size_t t = 0; t < S; ++t) {
    da[t] = kernels::dot(encoder_states[t].data(), d_context.data(), H);
    if (d_weights) da[t] += (*d_weights)[t];
  }
  double inner = 0.0;
  for (size_t t = 0; t < S; ++t) inner += a[t] * da[t];
  Vec ds(S);
  for (size_t t = 0; t < S; ++t) ds[t] = a[t] * (da[t] - inner);

  Vec u(H, 0.0);  // sum_t ds_t enc_t
  for (size_t t = 0; t < S; ++t) {
    kernels::axpy(ds[t], tape.w_enc[t].data(), d_dec.data(), H);
    kernels::axpy(a[t], d_context.data(), d_enc[t].data(), H);
    kernels::axpy(ds[t], encoder_states[t].data(), u.data(), H);
  }
  kernels::ger(d_w.a.data(), H, H, decoder_state.data(), u.data());
  // score grad into encoder states: ds_t * W^T dec
  Vec wt_dec(H);
  kernels::matvec_t(params.w.a.data(), H, H, decoder_state.data(), wt_dec.data());
  for (size_t t = 0; t < S; ++t) kernels::axpy(ds[t], wt_dec.data(), d_enc[t].data(), H);
}

// ---------------------------------------------------------------------------
// SGD helpers

double clip_scale(double sq, double clip) {
  double norm = std::sqrt(sq);
  return norm > clip ? clip / norm : 1.0;
}

double sq_norm(const MatD& m) {
  double s = 0.0;
  for (double v : m.a) s += v * v;
  return s;
}

double sq_norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

void sgd_step(MatF& param, const MatD& grad, double lr_scale) {
  for (size_t i = 0; i < param.a.size(); ++i)
    param.a[i] = static_cast<float>(param.a[i] - lr_scale * grad.a[i]);
}

void sgd_step(std::vector<float>& param, const Vec& grad, double lr_scale) {
  for (size_t i = 0; i < param.size(); ++i)
    param[i] = static_cast<float>(param[i] - lr_scale * grad[i]);
}

// ---------------------------------------------------------------------------
// Model container

namespace {

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw PolyfuzzError("model file truncated");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& in) {
  uint32_t n = get_u32(in);
  if (n > (1u << 20)) throw PolyfuzzError("model file: implausible string length");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw PolyfuzzError("model file truncated");
  return s;
}

void put_f32_block(std::ostream& out, const std::vector<float>& v) {
  for (float f : v) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
}

void get_f32_block(std::istream& in, std::vector<float>& v) {
  for (float& f : v) {
    uint32_t bits = get_u32(in);
    std::memcpy(&f, &bits, 4);
  }
}

}  // namespace

const MatF& ModelFile::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.data;
  }
  throw PolyfuzzError("model tensor not found: " + name);
}

void save_model(const std::string& path, const ModelFile& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PolyfuzzError("cannot write model file: " + path);
  out.write("PFNN", 4);
  put_u32(out, model.format_version);
  put_str(out, model.model_kind);
  put_str(out, model.cell_kind);
  put_u32(out, static_cast<uint32_t>(model.meta.size()));
  for (const auto& [k, v] : model.meta) {
    put_str(out, k);
    put_str(out, v);
  }
  put_u32(out, static_cast<uint32_t>(model.tensors.size()));
  for (const auto& t : model.tensors) {
    put_str(out, t.name);
    put_u32(out, static_cast<uint32_t>(t.data.rows));
    put_u32(out, static_cast<uint32_t>(t.data.cols));
    put_f32_block(out, t.data.a);
  }
  if (!out) throw PolyfuzzError("failed writing model file: " + path);
  out.close();

  nlohmann::json side;
  side["format_version"] = model.format_version;
  side["model_kind"] = model.model_kind;
  side["cell_kind"] = model.cell_kind;
  side["meta"] = model.meta;
  auto& tensors = side["tensors"] = nlohmann::json::array();
  for (const auto& t : model.tensors) {
    tensors.push_back({{"name", t.name}, {"rows", t.data.rows}, {"cols", t.data.cols}});
  }
  std::ofstream sj(path + ".json", std::ios::binary);
  if (!sj) throw PolyfuzzError("cannot write model sidecar: " + path + ".json");
  sj << side.dump(2) << "\n";
}

ModelFile load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PolyfuzzError("cannot open model file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PFNN", 4) != 0)
    throw PolyfuzzError("not a PFNN model file: " + path);
  ModelFile model;
  model.format_version = get_u32(in);
  if (model.format_version != 1)
    throw PolyfuzzError("unsupported model format_version");
  model.model_kind = get_str(in);
  model.cell_kind = get_str(in);
  uint32_t n_meta = get_u32(in);
  for (uint32_t i = 0; i < n_meta; ++i) {
    std::string k = get_str(in);
    model.meta[k] = get_str(in);
  }
  uint32_t n_tensors = get_u32(in);
  for (uint32_t i = 0; i < n_tensors; ++i) {
    NamedTensor t;
    t.name = get_str(in);
    uint32_t rows = get_u32(in), cols = get_u32(in);
    if (static_cast<uint64_t>(rows) * cols > (1ull << 28))
      throw PolyfuzzError("model tensor too large");
    t.data = MatF(static_cast<int>(rows), static_cast<int>(cols));
    get_f32_block(in, t.data.a);
    model.tensors.push_back(std::move(t));
  }
  return model;
}

}  // namespace polyfuzz
