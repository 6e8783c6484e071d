#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "polyfuzz/rng.hpp"
#include "polyfuzz/types.hpp"

namespace polyfuzz {

// Parameters are stored as float32 (the serialized format); all arithmetic
// runs in double.
struct MatF {
  int rows = 0, cols = 0;
  std::vector<float> a;

  MatF() = default;
  MatF(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.f) {}

  float& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  float at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  const float* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }
  size_t size() const { return a.size(); }

  void init_uniform(Rng& rng, double lo = -0.08, double hi = 0.08) {
    for (auto& v : a) v = static_cast<float>(rng.uniform(lo, hi));
  }
};

struct MatD {
  int rows = 0, cols = 0;
  std::vector<double> a;

  MatD() = default;
  MatD(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }
  void zero() { std::fill(a.begin(), a.end(), 0.0); }
};

using Vec = std::vector<double>;

double sigmoid(double x);

// Max-subtracted softmax; output sums to 1.
Vec softmax(std::span<const double> logits);
double cross_entropy(std::span<const double> probs, int target_index);

// ---------------------------------------------------------------------------
// Embeddings

struct EmbeddingTable {
  int dim = 0;
  MatF weights;  // |vocab| x dim

  Vec lookup(int id) const;
};

struct CbowConfig {
  int dim = 128;
  int window = 2;
  int epochs = 5;
  double lr = 0.05;
  uint64_t seed = 1;
};

struct CbowResult {
  EmbeddingTable table;
  MatF out_weights;                  // output projection, |vocab| x dim
  std::vector<double> epoch_losses;  // mean cross-entropy per epoch
};

// Predicts each token from the average embedding of its window context via a
// full softmax; plain SGD with norm clipping.
CbowResult train_cbow(const std::vector<std::vector<int>>& corpus, int vocab_size,
                      const CbowConfig& cfg);

// Loss of a single CBOW position. dh receives the grad w.r.t. the averaged
// context embedding (each context row takes dh/|context|); d_out accumulates
// the output-matrix grad. Either may be null.
double cbow_position(const MatF& embed, const MatF& out_mat,
                     std::span<const int> context, int target, Vec* dh, MatD* d_out);

// ---------------------------------------------------------------------------
// Recurrent cells

enum class CellKind { elman, gru, lstm };
std::string to_string(CellKind k);
CellKind cell_kind_from_string(const std::string& s);

struct RecurrentCell {
  CellKind kind = CellKind::lstm;
  int input_dim = 0;
  int hidden_dim = 0;
  MatF wx;  // (gates*hidden) x input
  MatF wh;  // (gates*hidden) x hidden
  std::vector<float> b;

  static RecurrentCell create(CellKind kind, int input_dim, int hidden_dim, Rng& rng);
  int gate_count() const;
};

struct CellState {
  Vec h;
  Vec c;  // lstm only

  static CellState zeros(const RecurrentCell& cell);
};

// Per-step activations recorded for backprop.
struct CellTape {
  Vec x, h_prev, c_prev;
  Vec pre;      // gate pre-activations (gates*hidden)
  Vec act;      // gate activations
  Vec hh_n;     // gru: wh_n * h_prev
  Vec c, tanh_c;
  Vec h;
};

CellState cell_step(const RecurrentCell& cell, const Vec& x, const CellState& prev,
                    CellTape* tape = nullptr);

struct CellGrads {
  MatD wx, wh;
  Vec b;

  explicit CellGrads(const RecurrentCell& cell);
  void zero();
};

// Consumes dL/dh (and dL/dc for lstm) at this step, accumulates parameter
// grads, and rewrites dh/dc with the grads w.r.t. the previous state.
// dx receives the grad w.r.t. the step input.
void cell_backward(const RecurrentCell& cell, const CellTape& tape, Vec& dh, Vec& dc,
                   CellGrads& grads, Vec& dx);

// ---------------------------------------------------------------------------
// Attention (bilinear scoring)

struct AttentionParams {
  MatF w;  // hidden x hidden

  static AttentionParams create(int hidden_dim, Rng& rng);
};

struct AttentionContext {
  Vec weights;  // nonnegative, sum 1
  Vec context;  // sum_t weights[t] * enc[t]
};

struct AttentionTape {
  std::vector<Vec> w_enc;  // W * enc[t]
  AttentionContext out;
};

AttentionContext attend(const std::vector<Vec>& encoder_states, const Vec& decoder_state,
                        const AttentionParams& params, AttentionTape* tape = nullptr);

// d_context (and optionally d_weights) flow back into the encoder states,
// the decoder state and the bilinear matrix.
void attend_backward(const std::vector<Vec>& encoder_states, const Vec& decoder_state,
                     const AttentionParams& params, const AttentionTape& tape,
                     const Vec& d_context, const Vec* d_weights,
                     std::vector<Vec>& d_enc, Vec& d_dec, MatD& d_w);

// ---------------------------------------------------------------------------
// SGD helpers

// Returns min(1, clip/norm) for the accumulated squared norm.
double clip_scale(double sq_norm, double clip);
double sq_norm(const MatD& m);
double sq_norm(const Vec& v);
void sgd_step(MatF& param, const MatD& grad, double lr_scale);
void sgd_step(std::vector<float>& param, const Vec& grad, double lr_scale);

// ---------------------------------------------------------------------------
// Model container ("PFNN" binary + JSON sidecar)

struct NamedTensor {
  std::string name;
  MatF data;
};

struct ModelFile {
  uint32_t format_version = 1;
  std::string model_kind;  // "embedding" | "classifier" | "translator"
  std::string cell_kind = "none";
  std::map<std::string, std::string> meta;
  std::vector<NamedTensor> tensors;

  const MatF& tensor(const std::string& name) const;
};

void save_model(const std::string& path, const ModelFile& model);
ModelFile load_model(const std::string& path);

}  // namespace polyfuzz
