#pragma once

// Dense inner-loop kernels over contiguous double arrays.
//
// Every vector variant must produce results bit-identical to the scalar
// reference: lanes run over independent outputs, never across a reduction,
// and no fused multiply-add is used. The equivalence tests in
// tests/simd_test.cc enforce this.

#include <cstddef>
#include <string_view>

namespace rfmt::simd {

enum class Backend { kScalar, kAvx2, kNeon };

std::string_view backend_name(Backend b);

struct KernelTable {
  Backend backend;
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // out[i] = a[i] + b[i]
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  // out[i] = a[i] * b[i]
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // out[i] = s * x[i]
  void (*scale)(const double* x, double s, double* out, std::size_t n);
  // y[i] += x[i]
  void (*accumulate)(const double* x, double* y, std::size_t n);
  // max over x[0..n), n >= 1
  double (*max)(const double* x, std::size_t n);
};

const KernelTable& scalar_kernels();
// nullptr when the variant is not compiled in or the CPU lacks support.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// The table selected at startup: the widest supported variant, unless the
// RFMT_SIMD environment variable names another one ("scalar", "avx2", "neon").
const KernelTable& kernels();

// Overrides the active table; returns false if `b` is unavailable here.
bool set_backend(Backend b);

}  // namespace rfmt::simd
