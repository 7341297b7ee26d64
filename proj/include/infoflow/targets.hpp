#ifndef INFOFLOW_TARGETS_HPP
#define INFOFLOW_TARGETS_HPP

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "infoflow/core.hpp"
#include "infoflow/rng.hpp"

namespace infoflow {

/**
 * Anything a particle flow can follow: an unnormalized log-density and its
 * gradient. Implementations are immutable and safe to call concurrently.
 */
class ScoreModel
{
public:
    virtual ~ScoreModel() = default;

    virtual std::size_t dim() const = 0;
    /// Log-density up to an additive constant. z.size() == dim() is checked by callers.
    virtual double log_density(std::span<const double> z) const = 0;
    /// Writes grad_z log p(z) into out (out.size() == dim()).
    virtual void score(std::span<const double> z, std::span<double> out) const = 0;
};

struct GaussianTarget
{
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

/// Location-scale Student-t on the real line.
struct StudentTTarget
{
    double dof;
    double loc;
    double scale;
};

struct GmmTarget
{
    std::vector<double> weights;
    std::vector<GaussianTarget> components;
};

/// Sum of ring-shaped bumps exp(-(|z - c_k| - r_k)^2 / (2 w^2)).
struct RingMixtureTarget
{
    std::vector<Point> centers;
    std::vector<double> radii;
    double width;
};

/**
 * Two interlocking half-rings. For s in {+1, -1}: a ring of `radius` around
 * (0, s * separation) with radial width `radial_width`, cut to the half-plane
 * s * z_0 >= 0 by the smooth factor exp(-relu(-s * z_0 * sharpness)^2).
 */
struct TwoMoonTarget
{
    double radius;
    double radial_width;
    double separation;
    double sharpness;
};

using TargetVariant = std::variant<GaussianTarget, StudentTTarget, GmmTarget, RingMixtureTarget, TwoMoonTarget>;

/**
 * Benchmark target density. The constructor validates parameters (SPD
 * covariances, simplex weights, positive scales) and caches the Cholesky
 * factors needed by the log-density and score.
 */
class TargetDensity : public ScoreModel
{
public:
    explicit TargetDensity(TargetVariant variant);

    const TargetVariant &variant() const noexcept { return variant_; }
    std::string kind() const;

    std::size_t dim() const override { return dim_; }
    double log_density(std::span<const double> z) const override;
    void score(std::span<const double> z, std::span<double> out) const override;

private:
    struct GaussianCache
    {
        Eigen::VectorXd mean;
        Eigen::MatrixXd precision;
        double log_det = 0.0;
    };

    TargetVariant variant_;
    std::size_t dim_ = 0;
    std::vector<GaussianCache> gaussians_;
    std::vector<double> log_weights_;
};

/// Throws InputError when z.size() != model.dim().
double log_density_unnorm(const ScoreModel &model, std::span<const double> z);
Point score(const ScoreModel &model, std::span<const double> z);

/// Scores of every particle as a D x M structure-of-arrays block.
/// Throws NumericError naming the first particle with a non-finite score.
std::vector<double> score_columns(const ParticleSet &points, const ScoreModel &model);

/// Central difference of log_density per coordinate. Throws InputError unless step > 0.
Point finite_diff_score(const ScoreModel &model, std::span<const double> z, double step);

/// Axis-aligned box and log-density ceiling used for rejection sampling.
struct RejectionBox
{
    double lower = -5.0;
    double upper = 5.0;
    std::size_t grid = 400;
};

/**
 * n i.i.d. draws. Gaussian, Student-t and GMM use direct transforms; ring and
 * moon targets use rejection from a uniform box whose log-density ceiling is
 * the maximum over a grid x grid lattice. Throws SamplerError when acceptance
 * falls below 1e-4.
 */
std::vector<Point> sample_exact(const TargetDensity &target, std::size_t n, Rng &rng,
                                const RejectionBox &box = {});

/// init_particles overload drawing the initial cloud from a target.
ParticleSet init_particles(const TargetDensity &target, std::size_t m, Rng &rng);

TargetDensity target_from_json(const nlohmann::json &doc);
nlohmann::json to_json(const TargetDensity &target);

/// One-dimensional presets used by flow1d: "gauss-3", "student", "gmm-sym".
TargetDensity preset_1d(const std::string &name);
/// Two-dimensional presets used by approx2d: "mog", "mor", "tm".
TargetDensity preset_2d(const std::string &name);
/// Fixed bandwidth paired with each 2D preset in the approximation runs.
double preset_2d_bandwidth(const std::string &name);

const std::vector<std::string> &preset_1d_names();
const std::vector<std::string> &preset_2d_names();

} // namespace infoflow

#endif
