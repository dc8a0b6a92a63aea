// SPDX-License-Identifier: Apache-2.0
// AVX2 + FMA kernels. Built with -mavx2 -mfma; only reached after CPUID says so.

#include "pebble/kernels.hpp"

#if defined(PEBBLE_HAVE_AVX2)
#include <immintrin.h>
#endif

namespace pebble::kernels {

#if defined(PEBBLE_HAVE_AVX2)
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Output tiles of 16 stay in registers across the whole input loop.
void gemv_accumulate_avx2(const double* x, std::size_t in, const double* w,
                          double* y, std::size_t out) {
  std::size_t o = 0;
  for (; o + 16 <= out; o += 16) {
    __m256d y0 = _mm256_loadu_pd(y + o);
    __m256d y1 = _mm256_loadu_pd(y + o + 4);
    __m256d y2 = _mm256_loadu_pd(y + o + 8);
    __m256d y3 = _mm256_loadu_pd(y + o + 12);
    for (std::size_t i = 0; i < in; ++i) {
      const __m256d xi = _mm256_set1_pd(x[i]);
      const double* row = w + i * out + o;
      y0 = _mm256_fmadd_pd(xi, _mm256_loadu_pd(row), y0);
      y1 = _mm256_fmadd_pd(xi, _mm256_loadu_pd(row + 4), y1);
      y2 = _mm256_fmadd_pd(xi, _mm256_loadu_pd(row + 8), y2);
      y3 = _mm256_fmadd_pd(xi, _mm256_loadu_pd(row + 12), y3);
    }
    _mm256_storeu_pd(y + o, y0);
    _mm256_storeu_pd(y + o + 4, y1);
    _mm256_storeu_pd(y + o + 8, y2);
    _mm256_storeu_pd(y + o + 12, y3);
  }
  for (; o + 4 <= out; o += 4) {
    __m256d acc = _mm256_loadu_pd(y + o);
    for (std::size_t i = 0; i < in; ++i) {
      acc = _mm256_fmadd_pd(_mm256_set1_pd(x[i]),
                            _mm256_loadu_pd(w + i * out + o), acc);
    }
    _mm256_storeu_pd(y + o, acc);
  }
  for (; o < out; ++o) {
    double acc = y[o];
    for (std::size_t i = 0; i < in; ++i) acc += x[i] * w[i * out + o];
    y[o] = acc;
  }
}

// Four points per vector, dimensions accumulated in order with a separate
// multiply and add, so every distance is bitwise equal to the scalar kernel.
void squared_distances_avx2(const double* query, std::size_t dim,
                            const double* points, std::size_t count,
                            double* out) {
  std::size_t j = 0;
  for (; j + 4 <= count; j += 4) {
    const double* p0 = points + j * dim;
    const double* p1 = p0 + dim;
    const double* p2 = p1 + dim;
    const double* p3 = p2 + dim;
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t d = 0; d < dim; ++d) {
      const __m256d p = _mm256_set_pd(p3[d], p2[d], p1[d], p0[d]);
      const __m256d diff = _mm256_sub_pd(_mm256_set1_pd(query[d]), p);
      acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    _mm256_storeu_pd(out + j, acc);
  }
  if (j < count) {
    scalar_table().squared_distances(query, dim, points + j * dim, count - j, out + j);
  }
}

// y (rows x out) += x w. Register tile: 4 rows x 8 columns, so every loaded
// weight vector feeds four FMAs.
void matmul_accumulate_avx2(const double* x, std::size_t rows, std::size_t in,
                            const double* w, std::size_t out, double* y) {
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    const double* x0 = x + r * in;
    const double* x1 = x0 + in;
    const double* x2 = x1 + in;
    const double* x3 = x2 + in;
    double* y0 = y + r * out;
    double* y1 = y0 + out;
    double* y2 = y1 + out;
    double* y3 = y2 + out;
    std::size_t o = 0;
    for (; o + 8 <= out; o += 8) {
      __m256d a00 = _mm256_loadu_pd(y0 + o), a01 = _mm256_loadu_pd(y0 + o + 4);
      __m256d a10 = _mm256_loadu_pd(y1 + o), a11 = _mm256_loadu_pd(y1 + o + 4);
      __m256d a20 = _mm256_loadu_pd(y2 + o), a21 = _mm256_loadu_pd(y2 + o + 4);
      __m256d a30 = _mm256_loadu_pd(y3 + o), a31 = _mm256_loadu_pd(y3 + o + 4);
      for (std::size_t i = 0; i < in; ++i) {
        const __m256d w0 = _mm256_loadu_pd(w + i * out + o);
        const __m256d w1 = _mm256_loadu_pd(w + i * out + o + 4);
        __m256d b = _mm256_set1_pd(x0[i]);
        a00 = _mm256_fmadd_pd(b, w0, a00);
        a01 = _mm256_fmadd_pd(b, w1, a01);
        b = _mm256_set1_pd(x1[i]);
        a10 = _mm256_fmadd_pd(b, w0, a10);
        a11 = _mm256_fmadd_pd(b, w1, a11);
        b = _mm256_set1_pd(x2[i]);
        a20 = _mm256_fmadd_pd(b, w0, a20);
        a21 = _mm256_fmadd_pd(b, w1, a21);
        b = _mm256_set1_pd(x3[i]);
        a30 = _mm256_fmadd_pd(b, w0, a30);
        a31 = _mm256_fmadd_pd(b, w1, a31);
      }
      _mm256_storeu_pd(y0 + o, a00);
      _mm256_storeu_pd(y0 + o + 4, a01);
      _mm256_storeu_pd(y1 + o, a10);
      _mm256_storeu_pd(y1 + o + 4, a11);
      _mm256_storeu_pd(y2 + o, a20);
      _mm256_storeu_pd(y2 + o + 4, a21);
      _mm256_storeu_pd(y3 + o, a30);
      _mm256_storeu_pd(y3 + o + 4, a31);
    }
    for (; o < out; ++o) {
      double s0 = y0[o], s1 = y1[o], s2 = y2[o], s3 = y3[o];
      for (std::size_t i = 0; i < in; ++i) {
        const double wi = w[i * out + o];
        s0 += x0[i] * wi;
        s1 += x1[i] * wi;
        s2 += x2[i] * wi;
        s3 += x3[i] * wi;
      }
      y0[o] = s0;
      y1[o] = s1;
      y2[o] = s2;
      y3[o] = s3;
    }
  }
  for (; r < rows; ++r) gemv_accumulate_avx2(x + r * in, in, w, y + r * out, out);
}

// g (in x out) += x^T d. Tile: 4 inputs x 8 outputs held across the row loop.
void matmul_tn_accumulate_avx2(const double* x, std::size_t rows, std::size_t in,
                               const double* d, std::size_t out, double* g) {
  std::size_t i = 0;
  for (; i + 4 <= in; i += 4) {
    double* g0 = g + i * out;
    double* g1 = g0 + out;
    double* g2 = g1 + out;
    double* g3 = g2 + out;
    std::size_t o = 0;
    for (; o + 8 <= out; o += 8) {
      __m256d a00 = _mm256_loadu_pd(g0 + o), a01 = _mm256_loadu_pd(g0 + o + 4);
      __m256d a10 = _mm256_loadu_pd(g1 + o), a11 = _mm256_loadu_pd(g1 + o + 4);
      __m256d a20 = _mm256_loadu_pd(g2 + o), a21 = _mm256_loadu_pd(g2 + o + 4);
      __m256d a30 = _mm256_loadu_pd(g3 + o), a31 = _mm256_loadu_pd(g3 + o + 4);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * in + i;
        const __m256d d0 = _mm256_loadu_pd(d + r * out + o);
        const __m256d d1 = _mm256_loadu_pd(d + r * out + o + 4);
        __m256d b = _mm256_set1_pd(xr[0]);
        a00 = _mm256_fmadd_pd(b, d0, a00);
        a01 = _mm256_fmadd_pd(b, d1, a01);
        b = _mm256_set1_pd(xr[1]);
        a10 = _mm256_fmadd_pd(b, d0, a10);
        a11 = _mm256_fmadd_pd(b, d1, a11);
        b = _mm256_set1_pd(xr[2]);
        a20 = _mm256_fmadd_pd(b, d0, a20);
        a21 = _mm256_fmadd_pd(b, d1, a21);
        b = _mm256_set1_pd(xr[3]);
        a30 = _mm256_fmadd_pd(b, d0, a30);
        a31 = _mm256_fmadd_pd(b, d1, a31);
      }
      _mm256_storeu_pd(g0 + o, a00);
      _mm256_storeu_pd(g0 + o + 4, a01);
      _mm256_storeu_pd(g1 + o, a10);
      _mm256_storeu_pd(g1 + o + 4, a11);
      _mm256_storeu_pd(g2 + o, a20);
      _mm256_storeu_pd(g2 + o + 4, a21);
      _mm256_storeu_pd(g3 + o, a30);
      _mm256_storeu_pd(g3 + o + 4, a31);
    }
    for (; o < out; ++o) {
      double s0 = g0[o], s1 = g1[o], s2 = g2[o], s3 = g3[o];
      for (std::size_t r = 0; r < rows; ++r) {
        const double dr = d[r * out + o];
        const double* xr = x + r * in + i;
        s0 += xr[0] * dr;
        s1 += xr[1] * dr;
        s2 += xr[2] * dr;
        s3 += xr[3] * dr;
      }
      g0[o] = s0;
      g1[o] = s1;
      g2[o] = s2;
      g3[o] = s3;
    }
  }
  for (; i < in; ++i) {
    for (std::size_t r = 0; r < rows; ++r) {
      axpy_avx2(x[r * in + i], d + r * out, g + i * out, out);
    }
  }
}

// dx (rows x in) = d w^T: each entry is a dot product over outputs. Tile:
// 2 rows x 4 inputs, eight accumulators reduced at the end.
void matmul_nt_avx2(const double* d, std::size_t rows, std::size_t out,
                    const double* w, std::size_t in, double* dx) {
  std::size_t r = 0;
  for (; r + 2 <= rows; r += 2) {
    const double* d0 = d + r * out;
    const double* d1 = d0 + out;
    std::size_t i = 0;
    for (; i + 4 <= in; i += 4) {
      const double* w0 = w + i * out;
      const double* w1 = w0 + out;
      const double* w2 = w1 + out;
      const double* w3 = w2 + out;
      __m256d a00 = _mm256_setzero_pd(), a01 = _mm256_setzero_pd();
      __m256d a02 = _mm256_setzero_pd(), a03 = _mm256_setzero_pd();
      __m256d a10 = _mm256_setzero_pd(), a11 = _mm256_setzero_pd();
      __m256d a12 = _mm256_setzero_pd(), a13 = _mm256_setzero_pd();
      std::size_t o = 0;
      for (; o + 4 <= out; o += 4) {
        const __m256d v0 = _mm256_loadu_pd(d0 + o);
        const __m256d v1 = _mm256_loadu_pd(d1 + o);
        __m256d wv = _mm256_loadu_pd(w0 + o);
        a00 = _mm256_fmadd_pd(v0, wv, a00);
        a10 = _mm256_fmadd_pd(v1, wv, a10);
        wv = _mm256_loadu_pd(w1 + o);
        a01 = _mm256_fmadd_pd(v0, wv, a01);
        a11 = _mm256_fmadd_pd(v1, wv, a11);
        wv = _mm256_loadu_pd(w2 + o);
        a02 = _mm256_fmadd_pd(v0, wv, a02);
        a12 = _mm256_fmadd_pd(v1, wv, a12);
        wv = _mm256_loadu_pd(w3 + o);
        a03 = _mm256_fmadd_pd(v0, wv, a03);
        a13 = _mm256_fmadd_pd(v1, wv, a13);
      }
      double s[8] = {hsum(a00), hsum(a01), hsum(a02), hsum(a03),
                     hsum(a10), hsum(a11), hsum(a12), hsum(a13)};
      for (; o < out; ++o) {
        s[0] += d0[o] * w0[o];
        s[1] += d0[o] * w1[o];
        s[2] += d0[o] * w2[o];
        s[3] += d0[o] * w3[o];
        s[4] += d1[o] * w0[o];
        s[5] += d1[o] * w1[o];
        s[6] += d1[o] * w2[o];
        s[7] += d1[o] * w3[o];
      }
      for (int k = 0; k < 4; ++k) {
        dx[r * in + i + k] = s[k];
        dx[(r + 1) * in + i + k] = s[4 + k];
      }
    }
    for (; i < in; ++i) {
      dx[r * in + i] = dot_avx2(d0, w + i * out, out);
      dx[(r + 1) * in + i] = dot_avx2(d1, w + i * out, out);
    }
  }
  for (; r < rows; ++r) {
    for (std::size_t i = 0; i < in; ++i) dx[r * in + i] = dot_avx2(d + r * out, w + i * out, out);
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{dot_avx2,
                                 axpy_avx2,
                                 gemv_accumulate_avx2,
                                 squared_distances_avx2,
                                 matmul_accumulate_avx2,
                                 matmul_tn_accumulate_avx2,
                                 matmul_nt_avx2};
  return table;
}

#else

const KernelTable& avx2_table() { return scalar_table(); }

#endif

}  // namespace pebble::kernels
