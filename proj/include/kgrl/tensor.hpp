#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgrl::nn {

// Dense row-major matrix of doubles. A row vector is a 1xN Tensor2.
struct Tensor2 {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
    if (r < 0 || c < 0) throw std::invalid_argument("Tensor2: negative shape");
  }
  Tensor2(int r, int c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != static_cast<size_t>(r) * c)
      throw std::invalid_argument("Tensor2: data length does not match shape");
  }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return data.size(); }
  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline Tensor2 uniform_tensor(int rows, int cols, double bound, std::mt19937_64& rng) {
  Tensor2 t(rows, cols);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data) v = dist(rng);
  return t;
}

inline void check_shape(const Tensor2& t, int rows, int cols, const std::string& what) {
  if (t.rows != rows || t.cols != cols)
    throw std::invalid_argument(what + ": expected " + std::to_string(rows) + "x" +
                                std::to_string(cols) + ", got " + std::to_string(t.rows) +
                                "x" + std::to_string(t.cols));
}

// c = a * b
inline Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimensions disagree");
  Tensor2 c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) c.at(i, j) += aik * b.at(k, j);
    }
  return c;
}

// c = a * b^T
inline Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_nt: inner dimensions disagree");
  Tensor2 c(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.rows; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(j, k);
      c.at(i, j) = s;
    }
  return c;
}

// c = a^T * b
inline Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: inner dimensions disagree");
  Tensor2 c(a.cols, b.cols);
  for (int k = 0; k < a.rows; ++k)
    for (int i = 0; i < a.cols; ++i) {
      const double aki = a.at(k, i);
      if (aki == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) c.at(i, j) += aki * b.at(k, j);
    }
  return c;
}

inline Tensor2 add(const Tensor2& a, const Tensor2& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
  Tensor2 c = a;
  for (size_t i = 0; i < c.size(); ++i) c.data[i] += b.data[i];
  return c;
}

inline double dot(const Tensor2& a, const Tensor2& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

// In-place row softmax with max subtraction.
inline void softmax_rows_inplace(Tensor2& t) {
  for (int i = 0; i < t.rows; ++i) {
    double mx = t.at(i, 0);
    for (int j = 1; j < t.cols; ++j) mx = std::max(mx, t.at(i, j));
    double sum = 0.0;
    for (int j = 0; j < t.cols; ++j) {
      double e = std::exp(t.at(i, j) - mx);
      t.at(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < t.cols; ++j) t.at(i, j) /= sum;
  }
}

}  // namespace kgrl::nn
