#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Arithmetic inner loops used by the estimators and metric code. Every kernel
// has a scalar reference implementation and, on x86-64 with AVX2+FMA, a
// vectorized variant. The active backend is picked once at startup; set
// UQAUDIT_SIMD=scalar to force the reference path.
//
// SIMD variants may reorder floating-point reductions, so they agree with the
// scalar kernels only up to rounding. Integer-valued kernels (count_geq) are
// exact on both paths.

namespace uqaudit::kernels {

struct Ops {
    double (*dot)(const double* a, const double* b, std::size_t n);
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    double (*sum)(const double* x, std::size_t n);
    // Sum of squared deviations from a precomputed mean.
    double (*sumsq_dev)(const double* x, std::size_t n, double mean);
    std::size_t (*count_geq)(const double* x, std::size_t n, double threshold);
    double (*sq_dist)(const double* a, const double* b, std::size_t n);
};

const Ops& active();
std::string_view backend_name();

// Direct access to the individual backends, for equivalence tests.
const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when unsupported by the CPU

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double sum(std::span<const double> x) {
    return active().sum(x.data(), x.size());
}
inline double sumsq_dev(std::span<const double> x, double mean) {
    return active().sumsq_dev(x.data(), x.size(), mean);
}
inline std::size_t count_geq(std::span<const double> x, double threshold) {
    return active().count_geq(x.data(), x.size(), threshold);
}
inline double sq_dist(std::span<const double> a, std::span<const double> b) {
    return active().sq_dist(a.data(), b.data(), a.size());
}

}  // namespace uqaudit::kernels
