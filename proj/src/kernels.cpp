// SPDX-License-Identifier: Apache-2.0

#include "pebble/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace pebble::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(PEBBLE_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() {
  if (const char* forced = std::getenv("PEBBLE_ISA")) {
    const std::string v(forced);
    if (v == "scalar") return Isa::kScalar;
    if (v == "avx2" && cpu_has_avx2()) return Isa::kAvx2;
  }
  return cpu_has_avx2() ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<const KernelTable*>& active_table() {
  static std::atomic<const KernelTable*> table{&table_for(initial_isa())};
  return table;
}

std::atomic<Isa>& active_isa_slot() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

void check_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": length mismatch " +
                                std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

std::string_view isa_name(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

bool isa_supported(Isa isa) {
  return isa == Isa::kScalar || cpu_has_avx2();
}

Isa active_isa() { return active_isa_slot().load(); }

void set_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::invalid_argument("ISA not supported on this CPU: " +
                                std::string(isa_name(isa)));
  }
  active_isa_slot().store(isa);
  active_table().store(&table_for(isa));
}

const KernelTable& table_for(Isa isa) {
  return isa == Isa::kAvx2 ? avx2_table() : scalar_table();
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_same_size(a.size(), b.size(), "dot");
  return active_table().load(std::memory_order_relaxed)->dot(a.data(), b.data(),
                                                             a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_same_size(x.size(), y.size(), "axpy");
  active_table().load(std::memory_order_relaxed)->axpy(alpha, x.data(), y.data(),
                                                       x.size());
}

void gemv_accumulate(std::span<const double> x, std::span<const double> w,
                     std::span<double> y) {
  check_same_size(w.size(), x.size() * y.size(), "gemv_accumulate");
  active_table().load(std::memory_order_relaxed)
      ->gemv_accumulate(x.data(), x.size(), w.data(), y.data(), y.size());
}

void matmul_accumulate(std::span<const double> x, std::size_t rows,
                       std::span<const double> w, std::span<double> y) {
  if (rows == 0) return;
  const std::size_t in = x.size() / rows;
  const std::size_t out = y.size() / rows;
  check_same_size(x.size(), rows * in, "matmul_accumulate x");
  check_same_size(y.size(), rows * out, "matmul_accumulate y");
  check_same_size(w.size(), in * out, "matmul_accumulate w");
  active_table().load(std::memory_order_relaxed)
      ->matmul_accumulate(x.data(), rows, in, w.data(), out, y.data());
}

void matmul_tn_accumulate(std::span<const double> x, std::span<const double> d,
                          std::size_t rows, std::span<double> g) {
  if (rows == 0) return;
  const std::size_t in = x.size() / rows;
  const std::size_t out = d.size() / rows;
  check_same_size(x.size(), rows * in, "matmul_tn_accumulate x");
  check_same_size(d.size(), rows * out, "matmul_tn_accumulate d");
  check_same_size(g.size(), in * out, "matmul_tn_accumulate g");
  active_table().load(std::memory_order_relaxed)
      ->matmul_tn_accumulate(x.data(), rows, in, d.data(), out, g.data());
}

void matmul_nt(std::span<const double> d, std::size_t rows,
               std::span<const double> w, std::span<double> dx) {
  if (rows == 0) return;
  const std::size_t out = d.size() / rows;
  const std::size_t in = dx.size() / rows;
  check_same_size(d.size(), rows * out, "matmul_nt d");
  check_same_size(dx.size(), rows * in, "matmul_nt dx");
  check_same_size(w.size(), in * out, "matmul_nt w");
  active_table().load(std::memory_order_relaxed)
      ->matmul_nt(d.data(), rows, out, w.data(), in, dx.data());
}

void squared_distances(std::span<const double> query,
                       std::span<const double> points, std::span<double> out) {
  const std::size_t dim = query.size();
  if (dim == 0) throw std::invalid_argument("squared_distances: empty query");
  check_same_size(points.size(), out.size() * dim, "squared_distances");
  active_table().load(std::memory_order_relaxed)
      ->squared_distances(query.data(), dim, points.data(), out.size(),
                          out.data());
}

}  // namespace pebble::kernels
