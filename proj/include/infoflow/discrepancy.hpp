#ifndef INFOFLOW_DISCREPANCY_HPP
#define INFOFLOW_DISCREPANCY_HPP

#include <cstddef>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "infoflow/core.hpp"
#include "infoflow/kernels.hpp"
#include "infoflow/rng.hpp"
#include "infoflow/targets.hpp"

namespace infoflow {

enum class GofDecision
{
    kAcceptH0,
    kRejectH0,
};

std::string to_string(GofDecision d);

struct GofResult
{
    double statistic = 0.0;
    double threshold = 0.0;
    double alpha = 0.05;
    GofDecision decision = GofDecision::kAcceptH0;
    std::size_t bootstrap_draws = 0;
};

/// Stein kernel of the RBF kernel under the target's score. Throws NumericError on a non-finite score.
double stein_kernel(const ScoreModel &target, const RbfKernel &kernel, std::span<const double> z,
                    std::span<const double> z_prime);

/// Full M x M matrix of Stein-kernel values.
Eigen::MatrixXd stein_matrix(const ParticleSet &points, const ScoreModel &target, const RbfKernel &kernel);

/// V-statistic (1/M^2) sum_ij V(z_i, z_j), diagonal included.
double ksd(const ParticleSet &points, const ScoreModel &target, const RbfKernel &kernel);

/**
 * Wild-bootstrap goodness-of-fit test. Replicate b draws Rademacher weights
 * from rng.derive(b) and evaluates (1/M^2) w^T V w; the threshold is the
 * ceil((1 - alpha) B)-th smallest replicate. Throws ConfigError unless
 * 0 < alpha < 1 and B >= 100, InputError when M < 2.
 */
GofResult gof_test(const ParticleSet &points, const ScoreModel &target, const RbfKernel &kernel, double alpha,
                   std::size_t bootstrap_draws, const Rng &rng);

} // namespace infoflow

#endif
