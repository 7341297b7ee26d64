#include <doctest.h>

#include <vector>

#include "infoflow/simd/pairwise.hpp"
#include "test_util.hpp"

using namespace infoflow;
using namespace infoflow::simd;

namespace {

std::vector<double> randoms(std::size_t n, Rng &rng, double scale)
{
    std::vector<double> v(n);
    for (double &x : v)
    {
        x = scale * rng.normal();
    }
    return v;
}

double close(double a, double b)
{
    return std::abs(a - b) / std::max(1.0, std::abs(b));
}

} // namespace

TEST_CASE("active table is usable")
{
    const PairwiseKernels &k = active_kernels();
    CHECK(k.ansatz_row != nullptr);
    CHECK((active_isa() == Isa::kScalar || active_isa() == Isa::kAvx2));
    set_active_isa(Isa::kScalar);
    CHECK(active_isa() == Isa::kScalar);
    if (avx2_kernels() != nullptr)
    {
        set_active_isa(Isa::kAvx2);
        CHECK(active_isa() == Isa::kAvx2);
    }
    else
    {
        CHECK_THROWS_AS(set_active_isa(Isa::kAvx2), ConfigError);
    }
}

TEST_CASE("AVX2 kernels agree with the scalar reference")
{
    const PairwiseKernels *fast = avx2_kernels();
    if (fast == nullptr)
    {
        MESSAGE("AVX2 unavailable; equivalence test skipped");
        return;
    }
    const PairwiseKernels &ref = scalar_kernels();
    Rng rng(2024);
    for (std::size_t m : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 33u, 100u})
    {
        for (std::size_t dim : {1u, 2u, 3u, 5u, 40u})
        {
            const auto coords = randoms(m * dim, rng, 1.5);
            const auto scores = randoms(m * dim, rng, 2.0);
            const double inv_h = 1.0 / (0.3 + rng.uniform() * 2.0);
            std::vector<double> a(dim);
            std::vector<double> b(dim);
            std::vector<double> ra(m);
            std::vector<double> rb(m);
            for (std::size_t i = 0; i < m; ++i)
            {
                ref.ansatz_row(coords.data(), scores.data(), m, dim, i, inv_h, a.data());
                fast->ansatz_row(coords.data(), scores.data(), m, dim, i, inv_h, b.data());
                for (std::size_t d = 0; d < dim; ++d)
                {
                    CHECK(close(b[d], a[d]) < 1e-12);
                }
                const double sa = ref.stein_row(coords.data(), scores.data(), m, dim, i, inv_h, ra.data());
                const double sb = fast->stein_row(coords.data(), scores.data(), m, dim, i, inv_h, rb.data());
                CHECK(close(sb, sa) < 1e-12);
                for (std::size_t j = 0; j < m; ++j)
                {
                    CHECK(close(rb[j], ra[j]) < 1e-12);
                }
                CHECK(fast->stein_row(coords.data(), scores.data(), m, dim, i, inv_h, nullptr) == sb);
                std::vector<double> da(m);
                std::vector<double> db(m);
                ref.sqdist_row(coords.data(), m, dim, i, da.data());
                fast->sqdist_row(coords.data(), m, dim, i, db.data());
                for (std::size_t j = 0; j + i + 1 < m; ++j)
                {
                    CHECK(close(db[j], da[j]) < 1e-13);
                }
            }
        }
    }
}

TEST_CASE("AVX2 exp handles far tails")
{
    const PairwiseKernels *fast = avx2_kernels();
    if (fast == nullptr)
    {
        return;
    }
    // Points 40 apart with a tiny bandwidth push the exponent below the double range.
    std::vector<double> coords{0.0, 40.0, 80.0, 1e-3, 0.5};
    std::vector<double> scores{1.0, 1.0, 1.0, 1.0, 1.0};
    for (double inv_h : {1e-6, 1.0, 100.0, 1e4})
    {
        double a = 0.0;
        double b = 0.0;
        scalar_kernels().ansatz_row(coords.data(), scores.data(), 5, 1, 0, inv_h, &a);
        fast->ansatz_row(coords.data(), scores.data(), 5, 1, 0, inv_h, &b);
        CHECK(std::isfinite(b));
        CHECK(close(b, a) < 1e-12);
    }
}

TEST_CASE("quad_forms agree")
{
    const PairwiseKernels *fast = avx2_kernels();
    Rng rng(99);
    for (std::size_t m : {1u, 3u, 4u, 9u, 64u, 101u})
    {
        for (std::size_t reps : {1u, 7u, 8u, 19u})
        {
            const auto v = randoms(m * m, rng, 1.0);
            std::vector<double> w(reps * m);
            for (double &x : w)
            {
                x = rng.rademacher();
            }
            std::vector<double> a(reps);
            scalar_kernels().quad_forms(v.data(), m, w.data(), reps, a.data());
            for (std::size_t r = 0; r < reps; ++r)
            {
                double naive = 0.0;
                for (std::size_t i = 0; i < m; ++i)
                {
                    for (std::size_t j = 0; j < m; ++j)
                    {
                        naive += w[r * m + i] * v[i * m + j] * w[r * m + j];
                    }
                }
                CHECK(std::abs(a[r] - naive) <= 1e-10 * std::max(1.0, std::abs(naive)) * m);
            }
            if (fast != nullptr)
            {
                std::vector<double> b(reps);
                fast->quad_forms(v.data(), m, w.data(), reps, b.data());
                for (std::size_t r = 0; r < reps; ++r)
                {
                    CHECK(std::abs(b[r] - a[r]) <= 1e-12 * std::max(1.0, std::abs(a[r])) * m);
                }
            }
        }
    }
}
