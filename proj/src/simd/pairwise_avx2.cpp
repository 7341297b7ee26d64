// AVX2/FMA variants of the pairwise kernels. This translation unit is the only
// one compiled with -mavx2 -mfma; it is reached through the dispatch table
// after a CPUID check, never called directly.

#include <immintrin.h>

#include <cmath>

#include "infoflow/simd/pairwise.hpp"

namespace infoflow::simd {

namespace {

constexpr std::size_t kMaxDim = 32;

inline double hsum(__m256d v)
{
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d pair_lo = _mm_add_sd(lo, _mm_unpackhi_pd(lo, lo));
    const __m128d pair_hi = _mm_add_sd(hi, _mm_unpackhi_pd(hi, hi));
    return _mm_cvtsd_f64(_mm_add_sd(pair_lo, pair_hi));
}

// exp for four doubles: x = n*ln2 + r with |r| <= ln2/2, degree-13 Taylor
// polynomial for e^r, then scale by 2^n through the exponent bits. Arguments
// below -708 flush to zero (no subnormal results).
inline __m256d exp_pd(__m256d x)
{
    const __m256d lo = _mm256_set1_pd(-708.0);
    const __m256d hi = _mm256_set1_pd(709.0);
    const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
    x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93145751953125e-1), x);
    r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212e-6), r);

    __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 479001600.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

    const __m128i n32 = _mm256_cvtpd_epi32(n);
    const __m256i biased = _mm256_add_epi64(_mm256_cvtepi32_epi64(n32), _mm256_set1_epi64x(1023));
    const __m256d scale = _mm256_castsi256_pd(_mm256_slli_epi64(biased, 52));
    return _mm256_blendv_pd(_mm256_mul_pd(p, scale), _mm256_setzero_pd(), underflow);
}

void ansatz_row_avx2(const double *coords, const double *scores, std::size_t m, std::size_t dim,
                     std::size_t i, double inv_h, double *out)
{
    if (dim > kMaxDim)
    {
        scalar_kernels().ansatz_row(coords, scores, m, dim, i, inv_h, out);
        return;
    }
    __m256d acc[kMaxDim];
    __m256d zi[kMaxDim];
    for (std::size_t d = 0; d < dim; ++d)
    {
        acc[d] = _mm256_setzero_pd();
        zi[d] = _mm256_set1_pd(coords[d * m + i]);
    }
    const __m256d vinv_h = _mm256_set1_pd(inv_h);
    const __m256d vneg_half_inv_h = _mm256_set1_pd(-0.5 * inv_h);

    std::size_t j = 0;
    for (; j + 4 <= m; j += 4)
    {
        __m256d sq = _mm256_setzero_pd();
        for (std::size_t d = 0; d < dim; ++d)
        {
            const __m256d diff = _mm256_sub_pd(zi[d], _mm256_loadu_pd(coords + d * m + j));
            sq = _mm256_fmadd_pd(diff, diff, sq);
        }
        const __m256d k = exp_pd(_mm256_mul_pd(sq, vneg_half_inv_h));
        for (std::size_t d = 0; d < dim; ++d)
        {
            const __m256d diff = _mm256_sub_pd(zi[d], _mm256_loadu_pd(coords + d * m + j));
            const __m256d term = _mm256_fmadd_pd(diff, vinv_h, _mm256_loadu_pd(scores + d * m + j));
            acc[d] = _mm256_fmadd_pd(k, term, acc[d]);
        }
    }
    for (std::size_t d = 0; d < dim; ++d)
    {
        out[d] = hsum(acc[d]);
    }
    for (; j < m; ++j)
    {
        double sq = 0.0;
        for (std::size_t d = 0; d < dim; ++d)
        {
            const double diff = coords[d * m + i] - coords[d * m + j];
            sq += diff * diff;
        }
        const double k = std::exp(-0.5 * inv_h * sq);
        for (std::size_t d = 0; d < dim; ++d)
        {
            const double diff = coords[d * m + i] - coords[d * m + j];
            out[d] += k * (scores[d * m + j] + diff * inv_h);
        }
    }
}

double stein_row_avx2(const double *coords, const double *scores, std::size_t m, std::size_t dim,
                      std::size_t i, double inv_h, double *row_out)
{
    if (dim > kMaxDim)
    {
        return scalar_kernels().stein_row(coords, scores, m, dim, i, inv_h, row_out);
    }
    __m256d zi[kMaxDim];
    __m256d si[kMaxDim];
    for (std::size_t d = 0; d < dim; ++d)
    {
        zi[d] = _mm256_set1_pd(coords[d * m + i]);
        si[d] = _mm256_set1_pd(scores[d * m + i]);
    }
    const double trace_const = static_cast<double>(dim) * inv_h;
    const __m256d vinv_h = _mm256_set1_pd(inv_h);
    const __m256d vinv_h2 = _mm256_set1_pd(inv_h * inv_h);
    const __m256d vtrace = _mm256_set1_pd(trace_const);
    const __m256d vneg_half_inv_h = _mm256_set1_pd(-0.5 * inv_h);

    __m256d total = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= m; j += 4)
    {
        __m256d sq = _mm256_setzero_pd();
        __m256d sdot = _mm256_setzero_pd();
        __m256d cross = _mm256_setzero_pd();
        for (std::size_t d = 0; d < dim; ++d)
        {
            const __m256d diff = _mm256_sub_pd(zi[d], _mm256_loadu_pd(coords + d * m + j));
            const __m256d sj = _mm256_loadu_pd(scores + d * m + j);
            sq = _mm256_fmadd_pd(diff, diff, sq);
            sdot = _mm256_fmadd_pd(si[d], sj, sdot);
            cross = _mm256_fmadd_pd(_mm256_sub_pd(si[d], sj), diff, cross);
        }
        const __m256d k = exp_pd(_mm256_mul_pd(sq, vneg_half_inv_h));
        __m256d inner = _mm256_fmadd_pd(cross, vinv_h, sdot);
        inner = _mm256_add_pd(inner, vtrace);
        inner = _mm256_fnmadd_pd(sq, vinv_h2, inner);
        const __m256d v = _mm256_mul_pd(k, inner);
        if (row_out != nullptr)
        {
            _mm256_storeu_pd(row_out + j, v);
        }
        total = _mm256_add_pd(total, v);
    }
    double sum = hsum(total);
    for (; j < m; ++j)
    {
        double sq = 0.0;
        double sdot = 0.0;
        double cross = 0.0;
        for (std::size_t d = 0; d < dim; ++d)
        {
            const double diff = coords[d * m + i] - coords[d * m + j];
            const double a = scores[d * m + i];
            const double b = scores[d * m + j];
            sq += diff * diff;
            sdot += a * b;
            cross += (a - b) * diff;
        }
        const double k = std::exp(-0.5 * inv_h * sq);
        const double v = k * (sdot + cross * inv_h + trace_const - sq * inv_h * inv_h);
        if (row_out != nullptr)
        {
            row_out[j] = v;
        }
        sum += v;
    }
    return sum;
}

void sqdist_row_avx2(const double *coords, std::size_t m, std::size_t dim, std::size_t i, double *out)
{
    if (dim > kMaxDim)
    {
        scalar_kernels().sqdist_row(coords, m, dim, i, out);
        return;
    }
    __m256d zi[kMaxDim];
    for (std::size_t d = 0; d < dim; ++d)
    {
        zi[d] = _mm256_set1_pd(coords[d * m + i]);
    }
    std::size_t j = i + 1;
    for (; j + 4 <= m; j += 4)
    {
        __m256d sq = _mm256_setzero_pd();
        for (std::size_t d = 0; d < dim; ++d)
        {
            const __m256d diff = _mm256_sub_pd(zi[d], _mm256_loadu_pd(coords + d * m + j));
            sq = _mm256_fmadd_pd(diff, diff, sq);
        }
        _mm256_storeu_pd(out + (j - i - 1), sq);
    }
    for (; j < m; ++j)
    {
        double sq = 0.0;
        for (std::size_t d = 0; d < dim; ++d)
        {
            const double diff = coords[d * m + i] - coords[d * m + j];
            sq += diff * diff;
        }
        out[j - i - 1] = sq;
    }
}

// Eight replicates share each load of a matrix row; the matrix is streamed
// once per group instead of once per replicate.
void quad_forms_avx2(const double *v, std::size_t m, const double *w, std::size_t reps, double *out)
{
    constexpr std::size_t kGroup = 8;
    std::size_t r0 = 0;
    for (; r0 + kGroup <= reps; r0 += kGroup)
    {
        double acc[kGroup] = {};
        for (std::size_t i = 0; i < m; ++i)
        {
            const double *row = v + i * m;
            __m256d dots[kGroup];
            for (std::size_t g = 0; g < kGroup; ++g)
            {
                dots[g] = _mm256_setzero_pd();
            }
            std::size_t j = 0;
            for (; j + 4 <= m; j += 4)
            {
                const __m256d vij = _mm256_loadu_pd(row + j);
                for (std::size_t g = 0; g < kGroup; ++g)
                {
                    dots[g] = _mm256_fmadd_pd(vij, _mm256_loadu_pd(w + (r0 + g) * m + j), dots[g]);
                }
            }
            for (std::size_t g = 0; g < kGroup; ++g)
            {
                const double *wr = w + (r0 + g) * m;
                double dot = hsum(dots[g]);
                for (std::size_t jt = j; jt < m; ++jt)
                {
                    dot += row[jt] * wr[jt];
                }
                acc[g] += wr[i] * dot;
            }
        }
        for (std::size_t g = 0; g < kGroup; ++g)
        {
            out[r0 + g] = acc[g];
        }
    }
    for (; r0 < reps; ++r0)
    {
        const double *wr = w + r0 * m;
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i)
        {
            const double *row = v + i * m;
            __m256d dot4 = _mm256_setzero_pd();
            std::size_t j = 0;
            for (; j + 4 <= m; j += 4)
            {
                dot4 = _mm256_fmadd_pd(_mm256_loadu_pd(row + j), _mm256_loadu_pd(wr + j), dot4);
            }
            double dot = hsum(dot4);
            for (; j < m; ++j)
            {
                dot += row[j] * wr[j];
            }
            acc += wr[i] * dot;
        }
        out[r0] = acc;
    }
}

} // namespace

const PairwiseKernels &avx2_kernels_table()
{
    static const PairwiseKernels table{
        Isa::kAvx2, ansatz_row_avx2, stein_row_avx2, sqdist_row_avx2, quad_forms_avx2,
    };
    return table;
}

} // namespace infoflow::simd
