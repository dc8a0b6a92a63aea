// SPDX-License-Identifier: Apache-2.0
// Scalar reference kernels. These are the semantics the SIMD variants must match.

#include "pebble/kernels.hpp"

namespace pebble::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_accumulate_scalar(const double* x, std::size_t in, const double* w,
                            double* y, std::size_t out) {
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    const double* row = w + i * out;
    for (std::size_t o = 0; o < out; ++o) y[o] += xi * row[o];
  }
}

void squared_distances_scalar(const double* query, std::size_t dim,
                              const double* points, std::size_t count,
                              double* out) {
  for (std::size_t j = 0; j < count; ++j) {
    const double* p = points + j * dim;
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = query[d] - p[d];
      acc += diff * diff;
    }
    out[j] = acc;
  }
}

void matmul_accumulate_scalar(const double* x, std::size_t rows, std::size_t in,
                              const double* w, std::size_t out, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    gemv_accumulate_scalar(x + r * in, in, w, y + r * out, out);
  }
}

void matmul_tn_accumulate_scalar(const double* x, std::size_t rows, std::size_t in,
                                 const double* d, std::size_t out, double* g) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * in;
    const double* dr = d + r * out;
    for (std::size_t i = 0; i < in; ++i) axpy_scalar(xr[i], dr, g + i * out, out);
  }
}

void matmul_nt_scalar(const double* d, std::size_t rows, std::size_t out,
                      const double* w, std::size_t in, double* dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < in; ++i) {
      dx[r * in + i] = dot_scalar(d + r * out, w + i * out, out);
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{dot_scalar,
                                 axpy_scalar,
                                 gemv_accumulate_scalar,
                                 squared_distances_scalar,
                                 matmul_accumulate_scalar,
                                 matmul_tn_accumulate_scalar,
                                 matmul_nt_scalar};
  return table;
}

}  // namespace pebble::kernels
