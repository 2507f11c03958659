#pragma once

#include <cmath>
#include <optional>

#include "newscap/tape.hpp"

namespace newscap::nn {

// z[2i] = sin(n / 10000^(2i/d)), z[2i+1] = cos(n / 10000^(2i/d))
template <typename S = float>
TensorT<S> sinusoidal_encoding(int position, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw DimensionError("sinusoidal_encoding: dim must be positive and even");
  TensorT<S> z(1, dim);
  for (int i = 0; i < dim / 2; ++i) {
    double freq = std::pow(10000.0, double(2 * i) / double(dim));
    z.at(0, 2 * i) = S(std::sin(double(position) / freq));
    z.at(0, 2 * i + 1) = S(std::cos(double(position) / freq));
  }
  return z;
}

template <typename S = float>
TensorT<S> sinusoidal_table(int length, int dim) {
  TensorT<S> t(length, dim);
  for (int n = 0; n < length; ++n) {
    TensorT<S> row = sinusoidal_encoding<S>(n, dim);
    std::copy(row.v.begin(), row.v.end(), t.row_ptr(n));
  }
  return t;
}

// Standalone kernels route through the tape so the library has exactly one
// softmax / layer-norm implementation.
template <typename S>
TensorT<S> softmax(const TensorT<S>& logits, const TensorT<uint8_t>* mask = nullptr) {
  TapeT<S> tape;
  return tape.val(tape.softmax_rows(tape.constant(logits), mask));
}

template <typename S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gain, const TensorT<S>& bias,
                      S eps = S(1e-5)) {
  if (x.n_cols < 2) throw DimensionError("layer_norm: need dim >= 2");
  TapeT<S> tape;
  return tape.val(
      tape.layer_norm_rows(tape.constant(x), tape.constant(gain), tape.constant(bias), eps));
}

template <typename S>
struct MhaParamsT {
  typename TapeT<S>::Ref wq, wk, wv, wo;  // each [d,d], applied as X*W
};

template <typename S>
struct MhaOutT {
  typename TapeT<S>::Ref output;   // [Tq, d]
  typename TapeT<S>::Ref weights;  // [Tq, Tk], head-averaged, rows sum to 1
};

struct DropoutSpec {
  double rate = 0.0;
  Rng* rng = nullptr;  // required when rate > 0
};

// Scaled dot-product multi-head attention, Q from q_in, K/V from kv_in.
// mask (optional, [Tq,Tk], 1 = allowed) is shared across heads.
template <typename S>
MhaOutT<S> multi_head_attention(TapeT<S>& tape, typename TapeT<S>::Ref q_in,
                                typename TapeT<S>::Ref kv_in, const MhaParamsT<S>& p, int heads,
                                const TensorT<uint8_t>* mask = nullptr,
                                DropoutSpec drop = {}) {
  using Ref = typename TapeT<S>::Ref;
  int d = tape.cols(q_in);
  if (heads <= 0 || d % heads != 0)
    throw ConfigError("attention: model dimension " + std::to_string(d) +
                      " not divisible by head count " + std::to_string(heads));
  int dh = d / heads;
  S scale = S(1.0 / std::sqrt(double(dh)));

  Ref q = tape.matmul(q_in, p.wq);
  Ref k = tape.matmul(kv_in, p.wk);
  Ref v = tape.matmul(kv_in, p.wv);

  std::vector<Ref> head_outs;
  Ref weight_sum{};
  for (int h = 0; h < heads; ++h) {
    Ref qh = tape.slice_cols(q, h * dh, (h + 1) * dh);
    Ref kh = tape.slice_cols(k, h * dh, (h + 1) * dh);
    Ref vh = tape.slice_cols(v, h * dh, (h + 1) * dh);
    Ref logits = tape.scale(tape.matmul(qh, tape.transpose(kh)), scale);
    Ref w = tape.softmax_rows(logits, mask);
    weight_sum = h == 0 ? w : tape.add(weight_sum, w);
    head_outs.push_back(tape.matmul(w, vh));
  }
  // concat head outputs along columns
  Ref cat = head_outs[0];
  for (size_t h = 1; h < head_outs.size(); ++h) cat = tape.concat_cols(cat, head_outs[h]);
  Ref out = tape.matmul(cat, p.wo);
  if (drop.rate > 0.0) out = tape.dropout(out, drop.rate, *drop.rng);
  return {out, tape.scale(weight_sum, S(1) / S(heads))};
}

// Attention weights only (per-head Q/K, head-averaged). Used for the pointer
// distributions, whose contract consumes the weights rather than the output.
template <typename S>
typename TapeT<S>::Ref pointer_attention_weights(TapeT<S>& tape, typename TapeT<S>::Ref q_in,
                                                 typename TapeT<S>::Ref keys,
                                                 typename TapeT<S>::Ref wq,
                                                 typename TapeT<S>::Ref wk, int heads) {
  using Ref = typename TapeT<S>::Ref;
  int d = tape.cols(q_in);
  if (heads <= 0 || d % heads != 0)
    throw ConfigError("pointer attention: dimension not divisible by heads");
  int dh = d / heads;
  S scale = S(1.0 / std::sqrt(double(dh)));
  Ref q = tape.matmul(q_in, wq);
  Ref k = tape.matmul(keys, wk);
  Ref sum{};
  for (int h = 0; h < heads; ++h) {
    Ref qh = tape.slice_cols(q, h * dh, (h + 1) * dh);
    Ref kh = tape.slice_cols(k, h * dh, (h + 1) * dh);
    Ref w = tape.softmax_rows(tape.scale(tape.matmul(qh, tape.transpose(kh)), scale));
    sum = h == 0 ? w : tape.add(sum, w);
  }
  return tape.scale(sum, S(1) / S(heads));
}

// Pairwise cosine similarity between rows of a and rows of b -> [n,m].
// Zero rows are guarded by a tiny norm floor.
template <typename S>
typename TapeT<S>::Ref cosine_matrix(TapeT<S>& tape, typename TapeT<S>::Ref a,
                                     typename TapeT<S>::Ref b) {
  using Ref = typename TapeT<S>::Ref;
  Ref na = tape.reciprocal(tape.sqrt_op(tape.clamp_min(tape.rowsum(tape.mul(a, a)), S(1e-12))));
  Ref nb = tape.reciprocal(tape.sqrt_op(tape.clamp_min(tape.rowsum(tape.mul(b, b)), S(1e-12))));
  Ref dots = tape.matmul(a, tape.transpose(b));
  return tape.mul_rowvec(tape.mul_colvec(dots, na), tape.transpose(nb));
}

// Causal mask for self-attention: row t may attend columns 0..t.
inline TensorT<uint8_t> causal_mask(int t) {
  TensorT<uint8_t> m(t, t, 0);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j <= i; ++j) m.at(i, j) = 1;
  return m;
}

}  // namespace newscap::nn
