#pragma once

#include <cmath>
#include <stdexcept>

#include "kgrl/tape.hpp"
#include "kgrl/tensor.hpp"

namespace kgrl::nn {

enum class Act { Relu, Tanh, None };

inline int apply_act(Tape& t, int x, Act act) {
  switch (act) {
    case Act::Relu: return t.relu(x);
    case Act::Tanh: return t.tanh(x);
    case Act::None: return x;
  }
  throw std::logic_error("apply_act: bad enum");
}

// x (n x a) * W (a x b) + bias row, on the tape. Pass bias = -1 to skip it.
inline int linear(Tape& t, int x, int W, int bias = -1) {
  int y = t.matmul(x, W);
  if (bias >= 0) y = t.add_row(y, bias);
  return y;
}

// Scaled dot-product self-attention, single head, d_k = d:
// softmax((EW^Q)(EW^K)^T / sqrt(d)) (EW^V).
inline int attention(Tape& t, int E, int wq, int wk, int wv) {
  int d = t.value(E).cols;
  int q = t.matmul(E, wq);
  int k = t.matmul(E, wk);
  int v = t.matmul(E, wv);
  int scores = t.scale(t.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d)));
  int weights = t.softmax_rows(scores);
  return t.matmul(weights, v);
}

inline Tensor2 linear_forward(const Tensor2& x, const Tensor2& W, const Tensor2* bias = nullptr) {
  Tensor2 y = matmul(x, W);
  if (bias) {
    if (bias->rows != 1 || bias->cols != y.cols)
      throw std::invalid_argument("linear_forward: bias must be 1 x cols");
    for (int r = 0; r < y.rows; ++r)
      for (int c = 0; c < y.cols; ++c) y.at(r, c) += bias->at(0, c);
  }
  return y;
}

inline Tensor2 attention_forward(const Tensor2& E, const Tensor2& wq, const Tensor2& wk,
                                 const Tensor2& wv) {
  Tape t;
  int e = t.constant(E);
  int out = attention(t, e, t.constant(wq), t.constant(wk), t.constant(wv));
  return t.value(out);
}

// Row-wise sum of embedding rows and positional rows.
inline Tensor2 positional_embed(const Tensor2& m_rows, const Tensor2& p_rows) {
  return add(m_rows, p_rows);
}

// D^{-1/2} (A + I) D^{-1/2} with D the row-sum degree of A + I. The self-loop
// keeps every degree >= 1, so no division guard is needed.
inline Tensor2 normalized_adjacency(const Tensor2& A) {
  if (A.rows != A.cols) throw std::invalid_argument("normalized_adjacency: A must be square");
  int n = A.rows;
  Tensor2 ahat = A;
  for (int i = 0; i < n; ++i) ahat.at(i, i) += 1.0;
  std::vector<double> dinv(n);
  for (int i = 0; i < n; ++i) {
    double deg = 0.0;
    for (int j = 0; j < n; ++j) {
      if (ahat.at(i, j) < 0.0) throw std::invalid_argument("normalized_adjacency: negative entry");
      deg += ahat.at(i, j);
    }
    dinv[i] = 1.0 / std::sqrt(deg);
  }
  Tensor2 norm(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) norm.at(i, j) = dinv[i] * ahat.at(i, j) * dinv[j];
  return norm;
}

// One propagation step sigma(norm_adj . H . W) on the tape; norm_adj enters as
// a constant because the adjacency is data, not a parameter.
inline int gcn_layer(Tape& t, int norm_adj, int H, int W, Act act) {
  return apply_act(t, t.matmul(t.matmul(norm_adj, H), W), act);
}

inline Tensor2 gcn_forward(const Tensor2& H, const Tensor2& A, const Tensor2& W, Act act) {
  if (A.rows != H.rows) throw std::invalid_argument("gcn_forward: A rows must match H rows");
  Tape t;
  int out = gcn_layer(t, t.constant(normalized_adjacency(A)), t.constant(H), t.constant(W), act);
  return t.value(out);
}

}  // namespace kgrl::nn
