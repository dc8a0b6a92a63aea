// SPDX-License-Identifier: Apache-2.0
/**
 * @file   kernels.hpp
 * @brief  Dense double-precision inner loops used by the networks and the
 *         k-NN estimators. Each kernel has a scalar reference and an AVX2/FMA
 *         variant; the variant is picked once at startup from CPUID and can be
 *         overridden with PEBBLE_ISA=scalar|avx2 or set_isa().
 */
#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace pebble::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);
bool isa_supported(Isa isa);
Isa active_isa();
// Throws std::invalid_argument when the ISA is not supported on this CPU.
void set_isa(Isa isa);

// sum_i a[i] * b[i]
double dot(std::span<const double> a, std::span<const double> b);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// y[o] += sum_i x[i] * w[i * y.size() + o]; w is row-major (x.size() x y.size()).
void gemv_accumulate(std::span<const double> x, std::span<const double> w,
                     std::span<double> y);

// y (rows x out) += x (rows x in) * w (in x out); all row-major.
void matmul_accumulate(std::span<const double> x, std::size_t rows,
                       std::span<const double> w, std::span<double> y);

// g (in x out) += x^T d with x (rows x in) and d (rows x out).
void matmul_tn_accumulate(std::span<const double> x, std::span<const double> d,
                          std::size_t rows, std::span<double> g);

// dx (rows x in) = d (rows x out) * w^T with w (in x out).
void matmul_nt(std::span<const double> d, std::size_t rows,
               std::span<const double> w, std::span<double> dx);

// out[j] = ||query - points[j*dim : (j+1)*dim]||^2 with dim = query.size().
void squared_distances(std::span<const double> query,
                       std::span<const double> points, std::span<double> out);

/// Kernel table for one ISA. Tests call both tables directly to check
/// equivalence regardless of which one is active.
struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*gemv_accumulate)(const double* x, std::size_t in, const double* w,
                          double* y, std::size_t out);
  void (*squared_distances)(const double* query, std::size_t dim,
                            const double* points, std::size_t count,
                            double* out);
  void (*matmul_accumulate)(const double* x, std::size_t rows, std::size_t in,
                            const double* w, std::size_t out, double* y);
  void (*matmul_tn_accumulate)(const double* x, std::size_t rows, std::size_t in,
                               const double* d, std::size_t out, double* g);
  void (*matmul_nt)(const double* d, std::size_t rows, std::size_t out,
                    const double* w, std::size_t in, double* dx);
};

const KernelTable& scalar_table();
// Falls back to the scalar table when the binary was built without AVX2.
const KernelTable& avx2_table();
const KernelTable& table_for(Isa isa);

}  // namespace pebble::kernels
