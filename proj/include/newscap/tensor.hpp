#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numeric>
#include <ostream>
#include <vector>

#include "newscap/common.hpp"

namespace newscap::nn {

// Dense row-major matrix. Everything the model touches is rank 2; vectors are
// 1xN or Nx1. Scalar type S is float in training and double in the gradient
// oracle's shadow instantiation.
template <typename S>
struct TensorT {
  int n_rows = 0;
  int n_cols = 0;
  std::vector<S> v;

  TensorT() = default;
  TensorT(int rows, int cols, S fill = S(0))
      : n_rows(rows), n_cols(cols), v(size_t(rows) * size_t(cols), fill) {}

  static TensorT from_rows(std::initializer_list<std::initializer_list<S>> rows) {
    TensorT t(int(rows.size()), rows.size() ? int(rows.begin()->size()) : 0);
    int r = 0;
    for (const auto& row : rows) {
      if (int(row.size()) != t.n_cols) throw DimensionError("ragged initializer");
      std::copy(row.begin(), row.end(), t.v.begin() + size_t(r++) * t.n_cols);
    }
    return t;
  }

  int rows() const { return n_rows; }
  int cols() const { return n_cols; }
  size_t size() const { return v.size(); }

  S& at(int r, int c) { return v[size_t(r) * n_cols + c]; }
  S at(int r, int c) const { return v[size_t(r) * n_cols + c]; }

  S* row_ptr(int r) { return v.data() + size_t(r) * n_cols; }
  const S* row_ptr(int r) const { return v.data() + size_t(r) * n_cols; }

  bool same_shape(const TensorT& o) const { return n_rows == o.n_rows && n_cols == o.n_cols; }

  bool all_finite() const {
    for (S x : v)
      if (!std::isfinite(double(x))) return false;
    return true;
  }

  void fill(S x) { std::fill(v.begin(), v.end(), x); }

  template <typename T>
  TensorT<T> cast() const {
    TensorT<T> out(n_rows, n_cols);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = T(v[i]);
    return out;
  }
};

template <typename S>
void check_same_shape(const TensorT<S>& a, const TensorT<S>& b, const char* what) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(what) + ": shape mismatch (" + std::to_string(a.n_rows) + "x" +
                         std::to_string(a.n_cols) + " vs " + std::to_string(b.n_rows) + "x" +
                         std::to_string(b.n_cols) + ")");
}

// C += or = A * B
template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.n_cols != b.n_rows) throw DimensionError("matmul: inner dimensions disagree");
  TensorT<S> c(a.n_rows, b.n_cols);
  for (int i = 0; i < a.n_rows; ++i) {
    const S* ar = a.row_ptr(i);
    S* cr = c.row_ptr(i);
    for (int k = 0; k < a.n_cols; ++k) {
      S aik = ar[k];
      if (aik == S(0)) continue;
      const S* br = b.row_ptr(k);
      for (int j = 0; j < b.n_cols; ++j) cr[j] += aik * br[j];
    }
  }
  return c;
}

template <typename S>
TensorT<S> transpose(const TensorT<S>& a) {
  TensorT<S> t(a.n_cols, a.n_rows);
  for (int i = 0; i < a.n_rows; ++i)
    for (int j = 0; j < a.n_cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

template <typename S>
void axpy(TensorT<S>& y, S alpha, const TensorT<S>& x) {
  check_same_shape(y, x, "axpy");
  for (size_t i = 0; i < y.v.size(); ++i) y.v[i] += alpha * x.v[i];
}

template <typename S>
S dot_all(const TensorT<S>& a, const TensorT<S>& b) {
  check_same_shape(a, b, "dot_all");
  S s = 0;
  for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
  return s;
}

template <typename S>
std::ostream& operator<<(std::ostream& os, const TensorT<S>& t) {
  os << "[" << t.n_rows << "x" << t.n_cols << "]";
  for (int i = 0; i < t.n_rows; ++i) {
    os << (i ? "; " : " ");
    for (int j = 0; j < t.n_cols; ++j) os << (j ? "," : "") << t.at(i, j);
  }
  return os;
}

using Tensor = TensorT<float>;

}  // namespace newscap::nn
