#include "infoflow/baselines.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "infoflow/discrepancy.hpp"

namespace infoflow {

namespace {

constexpr double kCovFloor = 1e-6;
constexpr double kTolerance = 1e-8;
// Responsibility mass below which a component counts as empty.
constexpr double kEmptyMass = 1e-10;

std::size_t check_samples(const std::vector<Point> &samples, std::size_t min_n, const char *who)
{
    if (samples.size() < min_n)
    {
        throw InputError(std::string(who) + ": need at least " + std::to_string(min_n) + " samples");
    }
    const std::size_t d = samples.front().size();
    if (d == 0)
    {
        throw InputError(std::string(who) + ": samples must be non-empty points");
    }
    for (const auto &p : samples)
    {
        if (p.size() != d)
        {
            throw InputError(std::string(who) + ": samples differ in dimension");
        }
        for (double v : p)
        {
            if (!std::isfinite(v))
            {
                throw InputError(std::string(who) + ": samples must be finite");
            }
        }
    }
    return d;
}

Eigen::MatrixXd as_matrix(const std::vector<Point> &samples, std::size_t d)
{
    Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < samples.size(); ++i)
    {
        for (std::size_t c = 0; c < d; ++c)
        {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = samples[i][c];
        }
    }
    return x;
}

// Smallest covariance with eigenvalues >= kCovFloor closest to cov.
Eigen::MatrixXd floor_covariance(const Eigen::MatrixXd &cov)
{
    const Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    if (eig.eigenvalues().minCoeff() >= kCovFloor)
    {
        return sym;
    }
    const Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(kCovFloor);
    Eigen::MatrixXd out = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

struct Component
{
    double weight;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

// log N(x_i | mean, cov) for every row.
Eigen::VectorXd log_gaussian_rows(const Eigen::MatrixXd &x, const Component &c)
{
    Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
    const Eigen::MatrixXd lower = llt.matrixL();
    const double log_det = 2.0 * lower.diagonal().array().log().sum();
    const auto d = static_cast<double>(x.cols());
    Eigen::MatrixXd centered = (x.rowwise() - c.mean.transpose()).transpose();
    lower.triangularView<Eigen::Lower>().solveInPlace(centered);
    const Eigen::VectorXd maha = centered.colwise().squaredNorm().transpose();
    return (-0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det) - 0.5 * maha.array()).matrix();
}

// Rows of log w_k + log N(x_i | k), normalized in place to log responsibilities; returns mean log-likelihood.
double e_step(const Eigen::MatrixXd &x, const std::vector<Component> &comps, Eigen::MatrixXd &log_resp)
{
    const auto n = x.rows();
    const auto k = static_cast<Eigen::Index>(comps.size());
    log_resp.resize(n, k);
    for (Eigen::Index c = 0; c < k; ++c)
    {
        const double lw = comps[static_cast<std::size_t>(c)].weight > 0.0
                              ? std::log(comps[static_cast<std::size_t>(c)].weight)
                              : -std::numeric_limits<double>::infinity();
        log_resp.col(c) = log_gaussian_rows(x, comps[static_cast<std::size_t>(c)]).array() + lw;
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
    {
        const double peak = log_resp.row(i).maxCoeff();
        const double lse = peak + std::log((log_resp.row(i).array() - peak).exp().sum());
        log_resp.row(i).array() -= lse;
        total += lse;
    }
    return total / static_cast<double>(n);
}

std::vector<Eigen::Index> kmeanspp(const Eigen::MatrixXd &x, std::size_t k, Rng &rng)
{
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<Eigen::Index> centers{static_cast<Eigen::Index>(rng.uniform_index(n))};
    Eigen::VectorXd d2 = (x.rowwise() - x.row(centers[0])).rowwise().squaredNorm();
    while (centers.size() < k)
    {
        const double total = d2.sum();
        std::size_t pick = 0;
        if (total > 0.0)
        {
            const double u = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i)
            {
                acc += d2[static_cast<Eigen::Index>(i)];
                if (u < acc)
                {
                    pick = i;
                    break;
                }
            }
        }
        else
        {
            pick = rng.uniform_index(n);
        }
        centers.push_back(static_cast<Eigen::Index>(pick));
        d2 = d2.cwiseMin((x.rowwise() - x.row(static_cast<Eigen::Index>(pick))).rowwise().squaredNorm());
    }
    return centers;
}

} // namespace

FittedApprox::FittedApprox(TargetDensity density) : density_(std::move(density))
{
    if (!std::holds_alternative<GaussianTarget>(density_.variant()) &&
        !std::holds_alternative<GmmTarget>(density_.variant()))
    {
        throw InputError("FittedApprox: expected a gaussian or gmm density, got " + density_.kind());
    }
}

bool FittedApprox::is_mixture() const noexcept
{
    return std::holds_alternative<GmmTarget>(density_.variant());
}

std::size_t FittedApprox::components() const noexcept
{
    if (const auto *g = std::get_if<GmmTarget>(&density_.variant()))
    {
        return g->components.size();
    }
    return 1;
}

nlohmann::json to_json(const FittedApprox &f)
{
    return to_json(f.density());
}

FittedApprox fitted_from_json(const nlohmann::json &doc)
{
    return FittedApprox(target_from_json(doc));
}

FittedApprox fit_gaussian_mle(const std::vector<Point> &samples)
{
    const std::size_t d = check_samples(samples, 2, "fit_gaussian_mle");
    const Eigen::MatrixXd x = as_matrix(samples, d);
    const Eigen::VectorXd mean = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(samples.size());
    cov = 0.5 * (cov + cov.transpose()).eval();
    cov.diagonal().array() += kCovFloor;
    return FittedApprox(TargetDensity(GaussianTarget{mean, cov}));
}

FittedApprox fit_gmm_em(const std::vector<Point> &samples, std::size_t k, std::size_t iters, Rng &rng,
                        std::vector<double> *trace)
{
    if (k < 1)
    {
        throw InputError("fit_gmm_em: k must be at least 1");
    }
    const std::size_t d = check_samples(samples, std::max<std::size_t>(k, 1), "fit_gmm_em");
    const Eigen::MatrixXd x = as_matrix(samples, d);
    const auto n = x.rows();

    const Eigen::VectorXd global_mean = x.colwise().mean().transpose();
    const Eigen::MatrixXd gc = x.rowwise() - global_mean.transpose();
    const Eigen::MatrixXd global_cov = floor_covariance(gc.transpose() * gc / static_cast<double>(n));

    std::vector<Component> comps;
    for (Eigen::Index c : kmeanspp(x, k, rng))
    {
        comps.push_back({1.0 / static_cast<double>(k), x.row(c).transpose(), global_cov});
    }

    Eigen::MatrixXd log_resp;
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < iters; ++it)
    {
        const double ll = e_step(x, comps, log_resp);
        if (trace != nullptr)
        {
            trace->push_back(ll);
        }
        if (it > 0 && ll - prev < kTolerance)
        {
            break;
        }
        prev = ll;

        const Eigen::MatrixXd resp = log_resp.array().exp().matrix();
        bool reseeded = false;
        for (std::size_t c = 0; c < k; ++c)
        {
            const Eigen::VectorXd r = resp.col(static_cast<Eigen::Index>(c));
            const double mass = r.sum();
            if (mass < kEmptyMass)
            {
                comps[c].mean = x.row(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(n))))
                                    .transpose();
                comps[c].cov = global_cov;
                comps[c].weight = 1.0 / static_cast<double>(k);
                reseeded = true;
                continue;
            }
            comps[c].weight = mass / static_cast<double>(n);
            comps[c].mean = (x.transpose() * r) / mass;
            const Eigen::MatrixXd centered = x.rowwise() - comps[c].mean.transpose();
            comps[c].cov = floor_covariance(centered.transpose() * r.asDiagonal() * centered / mass);
        }
        double wsum = 0.0;
        for (const auto &c : comps)
        {
            wsum += c.weight;
        }
        for (auto &c : comps)
        {
            c.weight /= wsum;
        }
        if (reseeded)
        {
            // The likelihood may drop after a reseed; restart the convergence check.
            prev = -std::numeric_limits<double>::infinity();
        }
    }

    GmmTarget g;
    for (auto &c : comps)
    {
        g.weights.push_back(c.weight);
        g.components.push_back({std::move(c.mean), std::move(c.cov)});
    }
    double wsum = 0.0;
    for (double w : g.weights)
    {
        wsum += w;
    }
    for (double &w : g.weights)
    {
        w /= wsum;
    }
    return FittedApprox(TargetDensity(std::move(g)));
}

std::vector<Point> sample_fitted(const FittedApprox &f, std::size_t n, Rng &rng)
{
    return sample_exact(f.density(), n, rng);
}

double baseline_ksd(const TargetDensity &target, const FittedApprox &f, std::size_t m, const RbfKernel &kernel,
                    Rng &rng)
{
    return ksd(ParticleSet::from_points(sample_fitted(f, m, rng)), target, kernel);
}

} // namespace infoflow
