// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#include "lavish/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace lavish::kernels {
namespace {

constexpr KernelTable kScalarTable{&scalar::dot, &scalar::axpy, &scalar::add};
#ifdef LAVISH_HAVE_AVX2_KERNELS
constexpr KernelTable kAvx2Table{&avx2::dot, &avx2::axpy, &avx2::add};
#endif
#ifdef LAVISH_HAVE_NEON_KERNELS
constexpr KernelTable kNeonTable{&neon::dot, &neon::axpy, &neon::add};
#endif

Backend detect_backend() {
    if (const char* env = std::getenv("LAVISH_SIMD")) {
        const std::string name(env);
        if (name == "scalar") return Backend::Scalar;
        if (name == "avx2" && backend_available(Backend::Avx2)) return Backend::Avx2;
        if (name == "neon" && backend_available(Backend::Neon)) return Backend::Neon;
    }
    if (backend_available(Backend::Avx2)) return Backend::Avx2;
    if (backend_available(Backend::Neon)) return Backend::Neon;
    return Backend::Scalar;
}

Backend& active_slot() {
    static Backend backend = detect_backend();
    return backend;
}

const KernelTable*& active_table() {
    static const KernelTable* t = &table_for(active_slot());
    return t;
}

}  // namespace

bool backend_available(Backend b) {
    switch (b) {
        case Backend::Scalar:
            return true;
        case Backend::Avx2:
#ifdef LAVISH_HAVE_AVX2_KERNELS
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Backend::Neon:
#ifdef LAVISH_HAVE_NEON_KERNELS
            return true;
#else
            return false;
#endif
    }
    return false;
}

std::vector<Backend> available_backends() {
    std::vector<Backend> out;
    for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
        if (backend_available(b)) out.push_back(b);
    }
    return out;
}

Backend active_backend() { return active_slot(); }

void set_backend(Backend b) {
    if (!backend_available(b)) {
        throw std::invalid_argument("kernel backend '" + std::string(backend_name(b)) + "' is not available");
    }
    active_slot() = b;
    active_table() = &table_for(b);
}

std::string_view backend_name(Backend b) {
    switch (b) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
        case Backend::Neon: return "neon";
    }
    return "unknown";
}

const KernelTable& table_for(Backend b) {
    switch (b) {
        case Backend::Scalar:
            return kScalarTable;
        case Backend::Avx2:
#ifdef LAVISH_HAVE_AVX2_KERNELS
            return kAvx2Table;
#else
            break;
#endif
        case Backend::Neon:
#ifdef LAVISH_HAVE_NEON_KERNELS
            return kNeonTable;
#else
            break;
#endif
    }
    throw std::invalid_argument("kernel backend '" + std::string(backend_name(b)) + "' is not compiled in");
}

const KernelTable& table() { return *active_table(); }

void gemm_nn(const double* a, const double* b, double* c, std::size_t p, std::size_t q, std::size_t r) {
    const auto axpy = table().axpy;
    for (std::size_t i = 0; i < p; ++i) {
        double* crow = c + i * r;
        for (std::size_t k = 0; k < q; ++k) {
            const double aik = a[i * q + k];
            if (aik != 0.0) axpy(aik, b + k * r, crow, r);
        }
    }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t p, std::size_t q, std::size_t r) {
    const auto dot = table().dot;
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
            c[i * r + j] += dot(a + i * q, b + j * q, q);
        }
    }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t p, std::size_t q, std::size_t r) {
    const auto axpy = table().axpy;
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t k = 0; k < q; ++k) {
            const double aik = a[i * q + k];
            if (aik != 0.0) axpy(aik, b + i * r, c + k * r, r);
        }
    }
}

}  // namespace lavish::kernels
