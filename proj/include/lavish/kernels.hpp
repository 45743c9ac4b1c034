// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense double-precision inner loops used by the tensor core. Each kernel has
// a scalar reference implementation and optional vector variants; the active
// backend is chosen once at startup from CPU features and can be overridden
// with LAVISH_SIMD=scalar|avx2|neon or set_backend().

#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace lavish::kernels {

enum class Backend { Scalar, Avx2, Neon };

struct KernelTable {
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // out = a + b
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define LAVISH_HAVE_AVX2_KERNELS 1
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
}  // namespace avx2
#endif

#if defined(__aarch64__)
#define LAVISH_HAVE_NEON_KERNELS 1
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
}  // namespace neon
#endif

// True when the backend is compiled in and the running CPU supports it.
bool backend_available(Backend b);
std::vector<Backend> available_backends();

Backend active_backend();
// Throws std::invalid_argument if the backend is unavailable.
void set_backend(Backend b);
std::string_view backend_name(Backend b);

const KernelTable& table();
const KernelTable& table_for(Backend b);

// Row-major matrix products built on the active table.
// C[p x r] += A[p x q] * B[q x r]
void gemm_nn(const double* a, const double* b, double* c, std::size_t p, std::size_t q, std::size_t r);
// C[p x r] += A[p x q] * B[r x q]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t p, std::size_t q, std::size_t r);
// C[q x r] += A[p x q]^T * B[p x r]
void gemm_tn(const double* a, const double* b, double* c, std::size_t p, std::size_t q, std::size_t r);

}  // namespace lavish::kernels
