#pragma once

#include <cblas.h>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "vap/common.hpp"
#include "vap/rng.hpp"

namespace vap {

// Dense row-major tensor. Rank is implicit in the shape vector; most ops work
// on rank-2 [rows, cols] views.
template <typename S>
struct Tensor {
  std::vector<int> shape;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shp) : shape(std::move(shp)) {
    data.assign(static_cast<std::size_t>(numel_of(shape)), S(0));
  }

  static long numel_of(const std::vector<int>& shp) {
    long n = 1;
    for (int d : shp) n *= d;
    return n;
  }

  long numel() const { return static_cast<long>(data.size()); }
  bool empty() const { return data.empty(); }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const {
    long n = numel();
    return shape.empty() || shape[0] == 0 ? 0 : static_cast<int>(n / shape[0]);
  }

  S& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  S at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

  void fill(S v) { std::fill(data.begin(), data.end(), v); }

  void add_(const Tensor& other) {
    require<DimensionError>(other.numel() == numel(), "tensor add: size mismatch");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += other.data[i];
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i)
      s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
  }
};

inline void blas_gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
                      const float* a, int lda, const float* b, int ldb, float beta, float* c,
                      int ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

inline void blas_gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
                      const double* a, int lda, const double* b, int ldb, double beta, double* c,
                      int ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

// C[m,n] (+)= A op B with row-major contiguous operands.
template <typename S>
void gemm(bool trans_a, bool trans_b, const Tensor<S>& a, const Tensor<S>& b, Tensor<S>& c,
          S alpha = S(1), S beta = S(0)) {
  const int m = c.shape[0];
  const int n = c.shape[1];
  const int k = trans_a ? a.shape[0] : a.shape[1];
  const int lda = a.shape[1];
  const int ldb = b.shape[1];
  blas_gemm(trans_a, trans_b, m, n, k, alpha, a.data.data(), lda, b.data.data(), ldb, beta,
            c.data.data(), n);
}

template <typename S>
Tensor<S> uniform_tensor(std::vector<int> shape, S lo, S hi, Rng& rng) {
  Tensor<S> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<S>(rng.uniform(lo, hi));
  return t;
}

}  // namespace vap
