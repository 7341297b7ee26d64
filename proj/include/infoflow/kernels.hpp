#ifndef INFOFLOW_KERNELS_HPP
#define INFOFLOW_KERNELS_HPP

#include <span>

#include <Eigen/Dense>

#include "infoflow/core.hpp"

namespace infoflow {

/// RBF kernel K(z, z') = exp(-|z - z'|^2 / (2h)) with bandwidth h in squared-distance units.
class RbfKernel
{
public:
    /// Throws InputError unless h is finite and > 0.
    explicit RbfKernel(double bandwidth);

    double bandwidth() const noexcept { return h_; }

    double operator()(std::span<const double> a, std::span<const double> b) const;

    /// Gradient in the first argument: K(z', z) (z - z') / h.
    Point grad_first(std::span<const double> z_prime, std::span<const double> z) const;

private:
    double h_;
};

/// Lower median (index floor((P-1)/2)) of the P pairwise squared distances; 1.0 if it is 0.
/// Throws InputError when M < 2.
double median_bandwidth(const ParticleSet &points);

/// Bandwidth for the cloud under a policy. Median-type policies fall back to 1.0 when M < 2.
double resolve_bandwidth(const BandwidthPolicy &policy, const ParticleSet &points);

/// Dense Gram matrix; symmetric with unit diagonal.
Eigen::MatrixXd kernel_matrix(const RbfKernel &kernel, const ParticleSet &points);

} // namespace infoflow

#endif
