#ifndef INFOFLOW_SIMD_PAIRWISE_HPP
#define INFOFLOW_SIMD_PAIRWISE_HPP

// Pairwise RBF inner loops shared by the flow, the discrepancy and the
// bandwidth heuristic. Every kernel exists as a scalar reference and, on
// x86-64, an AVX2/FMA variant; the active table is picked once at startup from
// CPUID and can be pinned with INFOFLOW_ISA=scalar|avx2.
//
// Inputs are structure-of-arrays blocks: coordinate d of particle j is
// cols[d * m + j]. Row results are reduced in a fixed order, so a row's value
// does not depend on which thread computed it.

#include <cstddef>
#include <string>

namespace infoflow::simd {

enum class Isa
{
    kScalar,
    kAvx2,
};

std::string to_string(Isa isa);

struct PairwiseKernels
{
    Isa isa;

    /// out[d] = sum_j K_ij * (s_jd + (z_id - z_jd) * inv_h), K_ij = exp(-|z_i - z_j|^2 * inv_h / 2).
    void (*ansatz_row)(const double *coords, const double *scores, std::size_t m, std::size_t dim,
                       std::size_t i, double inv_h, double *out);

    /// Returns sum_j V_ij of the RBF Stein kernel; writes V_ij to row_out[j] when row_out is non-null.
    double (*stein_row)(const double *coords, const double *scores, std::size_t m, std::size_t dim,
                        std::size_t i, double inv_h, double *row_out);

    /// out[j - i - 1] = |z_i - z_j|^2 for j in (i, m).
    void (*sqdist_row)(const double *coords, std::size_t m, std::size_t dim, std::size_t i, double *out);

    /// out[r] = w_r^T V w_r for the `reps` weight vectors stored row-major in w (reps x m).
    void (*quad_forms)(const double *v, std::size_t m, const double *w, std::size_t reps, double *out);
};

const PairwiseKernels &scalar_kernels();
/// nullptr when the build or the CPU lacks AVX2/FMA.
const PairwiseKernels *avx2_kernels();

/// Table used by the library; detected on first use.
const PairwiseKernels &active_kernels();
/// Pin the table (tests, benchmarks). Throws if the ISA is unavailable.
void set_active_isa(Isa isa);
Isa active_isa();

} // namespace infoflow::simd

#endif
