#ifndef INFOFLOW_BASELINES_HPP
#define INFOFLOW_BASELINES_HPP

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

#include "infoflow/core.hpp"
#include "infoflow/kernels.hpp"
#include "infoflow/rng.hpp"
#include "infoflow/targets.hpp"

namespace infoflow {

/// Gaussian or Gaussian-mixture approximation of a target. Shares the target JSON layout.
class FittedApprox
{
public:
    /// Throws InputError unless the density is a Gaussian or GMM.
    explicit FittedApprox(TargetDensity density);

    const TargetDensity &density() const noexcept { return density_; }
    bool is_mixture() const noexcept;
    std::size_t components() const noexcept;

private:
    TargetDensity density_;
};

nlohmann::json to_json(const FittedApprox &f);
FittedApprox fitted_from_json(const nlohmann::json &doc);

/// Sample mean and divide-by-n covariance plus 1e-6 I. Throws InputError when n < 2.
FittedApprox fit_gaussian_mle(const std::vector<Point> &samples);

/**
 * Full-covariance EM from k-means++ seeds. Covariance eigenvalues are floored
 * at 1e-6; a component whose responsibility mass collapses is reseeded at a
 * random sample. Stops after `iters` iterations or when the mean
 * log-likelihood improves by less than 1e-8. `trace`, when given, receives
 * the mean log-likelihood before every M-step.
 */
FittedApprox fit_gmm_em(const std::vector<Point> &samples, std::size_t k, std::size_t iters, Rng &rng,
                        std::vector<double> *trace = nullptr);

std::vector<Point> sample_fitted(const FittedApprox &f, std::size_t n, Rng &rng);

/// KSD of M draws from the fitted approximation against the target.
double baseline_ksd(const TargetDensity &target, const FittedApprox &f, std::size_t m, const RbfKernel &kernel,
                    Rng &rng);

} // namespace infoflow

#endif
