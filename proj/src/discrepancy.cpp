#include "infoflow/discrepancy.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "infoflow/parallel.hpp"
#include "infoflow/simd/pairwise.hpp"

namespace infoflow {

namespace {

// Replicates are evaluated in blocks so each block's weights fit in cache.
constexpr std::size_t kBootstrapBlock = 32;

Point checked_score(const ScoreModel &target, std::span<const double> z)
{
    Point s = score(target, z);
    for (double v : s)
    {
        if (!std::isfinite(v))
        {
            throw NumericError("stein_kernel: non-finite score");
        }
    }
    return s;
}

} // namespace

std::string to_string(GofDecision d)
{
    return d == GofDecision::kRejectH0 ? "reject_H0" : "accept_H0";
}

double stein_kernel(const ScoreModel &target, const RbfKernel &kernel, std::span<const double> z,
                    std::span<const double> z_prime)
{
    if (z.size() != z_prime.size())
    {
        throw InputError("stein_kernel: points differ in dimension");
    }
    const Point s = checked_score(target, z);
    const Point sp = checked_score(target, z_prime);
    const double h = kernel.bandwidth();
    const double k = kernel(z, z_prime);
    double sdot = 0.0;
    double cross = 0.0;
    double sq = 0.0;
    for (std::size_t d = 0; d < z.size(); ++d)
    {
        const double diff = z[d] - z_prime[d];
        sdot += s[d] * sp[d];
        // s(z)^T grad_{z'} K + grad_z K^T s(z')
        cross += (s[d] - sp[d]) * diff;
        sq += diff * diff;
    }
    const double trace = static_cast<double>(z.size()) / h - sq / (h * h);
    return k * (sdot + cross / h + trace);
}

Eigen::MatrixXd stein_matrix(const ParticleSet &points, const ScoreModel &target, const RbfKernel &kernel)
{
    const std::size_t m = points.size();
    const std::vector<double> scores = score_columns(points, target);
    const std::vector<double> cols = points.columns();
    const double inv_h = 1.0 / kernel.bandwidth();
    const auto &kernels = simd::active_kernels();
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> v(m, m);
    parallel::parallel_for(m, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
        {
            kernels.stein_row(cols.data(), scores.data(), m, points.dim(), i, inv_h, v.row(i).data());
        }
    });
    return v;
}

double ksd(const ParticleSet &points, const ScoreModel &target, const RbfKernel &kernel)
{
    const std::size_t m = points.size();
    const std::vector<double> scores = score_columns(points, target);
    const std::vector<double> cols = points.columns();
    const double inv_h = 1.0 / kernel.bandwidth();
    const auto &kernels = simd::active_kernels();
    std::vector<double> row_sums(m);
    parallel::parallel_for(m, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
        {
            row_sums[i] = kernels.stein_row(cols.data(), scores.data(), m, points.dim(), i, inv_h, nullptr);
        }
    });
    double total = 0.0;
    for (double r : row_sums)
    {
        total += r;
    }
    return total / (static_cast<double>(m) * static_cast<double>(m));
}

GofResult gof_test(const ParticleSet &points, const ScoreModel &target, const RbfKernel &kernel, double alpha,
                   std::size_t bootstrap_draws, const Rng &rng)
{
    if (!(alpha > 0.0 && alpha < 1.0))
    {
        throw ConfigError("gof_test: alpha must lie in (0, 1)");
    }
    if (bootstrap_draws < 100)
    {
        throw ConfigError("gof_test: need at least 100 bootstrap draws");
    }
    const std::size_t m = points.size();
    if (m < 2)
    {
        throw InputError("gof_test: need at least two particles");
    }

    const Eigen::MatrixXd vcol = stein_matrix(points, target, kernel);
    // stein_matrix is symmetric, so the column-major buffer is also the row-major one.
    const double *v = vcol.data();
    const double norm = 1.0 / (static_cast<double>(m) * static_cast<double>(m));

    const double stat = ksd(points, target, kernel);

    const std::size_t blocks = (bootstrap_draws + kBootstrapBlock - 1) / kBootstrapBlock;
    std::vector<double> replicates(bootstrap_draws);
    const auto &kernels = simd::active_kernels();
    parallel::parallel_for(blocks, [&](std::size_t begin, std::size_t end) {
        std::vector<double> w(kBootstrapBlock * m);
        for (std::size_t blk = begin; blk < end; ++blk)
        {
            const std::size_t first = blk * kBootstrapBlock;
            const std::size_t reps = std::min(kBootstrapBlock, bootstrap_draws - first);
            for (std::size_t r = 0; r < reps; ++r)
            {
                Rng stream = rng.derive(first + r);
                for (std::size_t i = 0; i < m; ++i)
                {
                    w[r * m + i] = stream.rademacher();
                }
            }
            kernels.quad_forms(v, m, w.data(), reps, replicates.data() + first);
            for (std::size_t r = 0; r < reps; ++r)
            {
                replicates[first + r] *= norm;
            }
        }
    });

    std::sort(replicates.begin(), replicates.end());
    const auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(bootstrap_draws)));
    GofResult res;
    res.statistic = stat;
    res.threshold = replicates[std::clamp<std::size_t>(rank, 1, bootstrap_draws) - 1];
    res.alpha = alpha;
    res.decision = stat > res.threshold ? GofDecision::kRejectH0 : GofDecision::kAcceptH0;
    res.bootstrap_draws = bootstrap_draws;
    return res;
}

} // namespace infoflow
