#include "infoflow/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "infoflow/simd/pairwise.hpp"

namespace infoflow {

namespace {

void check_dims(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
    {
        throw InputError("kernel: points have dimensions " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
    }
}

double squared_distance(std::span<const double> a, std::span<const double> b)
{
    double sq = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d)
    {
        const double diff = a[d] - b[d];
        sq += diff * diff;
    }
    return sq;
}

double lower_median_sq_distance(const ParticleSet &points)
{
    const std::size_t m = points.size();
    const std::size_t pairs = m * (m - 1) / 2;
    const std::vector<double> cols = points.columns();
    std::vector<double> dists(pairs);
    const auto &kernels = simd::active_kernels();
    std::size_t offset = 0;
    for (std::size_t i = 0; i + 1 < m; ++i)
    {
        kernels.sqdist_row(cols.data(), m, points.dim(), i, dists.data() + offset);
        offset += m - i - 1;
    }
    const auto mid = dists.begin() + static_cast<std::ptrdiff_t>((pairs - 1) / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    return *mid;
}

} // namespace

RbfKernel::RbfKernel(double bandwidth) : h_(bandwidth)
{
    if (!(h_ > 0.0) || !std::isfinite(h_))
    {
        throw InputError("RbfKernel: bandwidth must be finite and > 0");
    }
}

double RbfKernel::operator()(std::span<const double> a, std::span<const double> b) const
{
    check_dims(a, b);
    return std::exp(-squared_distance(a, b) / (2.0 * h_));
}

Point RbfKernel::grad_first(std::span<const double> z_prime, std::span<const double> z) const
{
    check_dims(z_prime, z);
    const double k = (*this)(z_prime, z);
    Point g(z.size());
    for (std::size_t d = 0; d < z.size(); ++d)
    {
        g[d] = k * (z[d] - z_prime[d]) / h_;
    }
    return g;
}

double median_bandwidth(const ParticleSet &points)
{
    if (points.size() < 2)
    {
        throw InputError("median_bandwidth: need at least two particles");
    }
    const double med = lower_median_sq_distance(points);
    return med > 0.0 ? med : 1.0;
}

double resolve_bandwidth(const BandwidthPolicy &policy, const ParticleSet &points)
{
    if (policy.kind == BandwidthPolicy::Kind::kFixed)
    {
        return policy.fixed_h;
    }
    if (points.size() < 2)
    {
        return 1.0;
    }
    const double med = lower_median_sq_distance(points);
    if (!(med > 0.0))
    {
        return 1.0;
    }
    switch (policy.kind)
    {
    case BandwidthPolicy::Kind::kMedianDistance:
        return std::sqrt(med);
    case BandwidthPolicy::Kind::kMedianLog:
        return med / std::log(static_cast<double>(points.size()) + 1.0);
    default:
        return med;
    }
}

Eigen::MatrixXd kernel_matrix(const RbfKernel &kernel, const ParticleSet &points)
{
    const auto m = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd k(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
    {
        k(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < m; ++j)
        {
            const double v = kernel(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)]);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

} // namespace infoflow
