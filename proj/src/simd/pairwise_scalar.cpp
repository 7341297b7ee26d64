#include <cmath>

#include "infoflow/simd/pairwise.hpp"

namespace infoflow::simd {

namespace {

void ansatz_row_scalar(const double *coords, const double *scores, std::size_t m, std::size_t dim,
                       std::size_t i, double inv_h, double *out)
{
    for (std::size_t d = 0; d < dim; ++d)
    {
        out[d] = 0.0;
    }
    for (std::size_t j = 0; j < m; ++j)
    {
        double sq = 0.0;
        for (std::size_t d = 0; d < dim; ++d)
        {
            const double diff = coords[d * m + i] - coords[d * m + j];
            sq += diff * diff;
        }
        const double k = std::exp(-0.5 * sq * inv_h);
        for (std::size_t d = 0; d < dim; ++d)
        {
            const double diff = coords[d * m + i] - coords[d * m + j];
            out[d] += k * (scores[d * m + j] + diff * inv_h);
        }
    }
}

double stein_row_scalar(const double *coords, const double *scores, std::size_t m, std::size_t dim,
                        std::size_t i, double inv_h, double *row_out)
{
    const double trace_const = static_cast<double>(dim) * inv_h;
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j)
    {
        double sq = 0.0;
        double sdot = 0.0;
        double cross = 0.0;
        for (std::size_t d = 0; d < dim; ++d)
        {
            const double diff = coords[d * m + i] - coords[d * m + j];
            const double si = scores[d * m + i];
            const double sj = scores[d * m + j];
            sq += diff * diff;
            sdot += si * sj;
            cross += (si - sj) * diff;
        }
        const double k = std::exp(-0.5 * sq * inv_h);
        const double v = k * (sdot + cross * inv_h + trace_const - sq * inv_h * inv_h);
        if (row_out != nullptr)
        {
            row_out[j] = v;
        }
        total += v;
    }
    return total;
}

void sqdist_row_scalar(const double *coords, std::size_t m, std::size_t dim, std::size_t i, double *out)
{
    for (std::size_t j = i + 1; j < m; ++j)
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

void quad_forms_scalar(const double *v, std::size_t m, const double *w, std::size_t reps, double *out)
{
    for (std::size_t r = 0; r < reps; ++r)
    {
        const double *wr = w + r * m;
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i)
        {
            const double *row = v + i * m;
            double dot = 0.0;
            for (std::size_t j = 0; j < m; ++j)
            {
                dot += row[j] * wr[j];
            }
            acc += wr[i] * dot;
        }
        out[r] = acc;
    }
}

} // namespace

const PairwiseKernels &scalar_kernels()
{
    static const PairwiseKernels table{
        Isa::kScalar, ansatz_row_scalar, stein_row_scalar, sqdist_row_scalar, quad_forms_scalar,
    };
    return table;
}

} // namespace infoflow::simd
