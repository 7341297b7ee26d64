#include "infoflow/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace infoflow {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts...
{
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double log_sum_exp(std::span<const double> terms)
{
    double peak = kNegInf;
    for (double t : terms)
    {
        peak = std::max(peak, t);
    }
    if (peak == kNegInf)
    {
        return kNegInf;
    }
    double acc = 0.0;
    for (double t : terms)
    {
        acc += std::exp(t - peak);
    }
    return peak + std::log(acc);
}

void require_positive(double v, const char *what)
{
    if (!(v > 0.0) || !std::isfinite(v))
    {
        throw InputError(std::string("target: ") + what + " must be finite and > 0");
    }
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> z)
{
    return {z.data(), static_cast<Eigen::Index>(z.size())};
}

double relu(double v)
{
    return v > 0.0 ? v : 0.0;
}

} // namespace

TargetDensity::TargetDensity(TargetVariant variant) : variant_(std::move(variant))
{
    auto cache_gaussian = [this](const GaussianTarget &g) {
        const auto d = g.mean.size();
        if (d < 1 || g.covariance.rows() != d || g.covariance.cols() != d)
        {
            throw InputError("target: Gaussian mean/covariance shapes disagree");
        }
        if (!g.mean.allFinite() || !g.covariance.allFinite())
        {
            throw InputError("target: Gaussian parameters must be finite");
        }
        const double scale = std::max(1.0, g.covariance.cwiseAbs().maxCoeff());
        if ((g.covariance - g.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        {
            throw InputError("target: covariance is not symmetric");
        }
        Eigen::LLT<Eigen::MatrixXd> llt(g.covariance);
        if (llt.info() != Eigen::Success)
        {
            throw InputError("target: covariance is not positive definite");
        }
        GaussianCache cache;
        cache.mean = g.mean;
        cache.precision = llt.solve(Eigen::MatrixXd::Identity(d, d));
        cache.precision = 0.5 * (cache.precision + cache.precision.transpose()).eval();
        cache.log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        gaussians_.push_back(std::move(cache));
        return static_cast<std::size_t>(d);
    };

    std::visit(Overloaded{
                   [&](const GaussianTarget &g) { dim_ = cache_gaussian(g); },
                   [&](const StudentTTarget &t) {
                       require_positive(t.dof, "Student-t dof");
                       require_positive(t.scale, "Student-t scale");
                       if (!std::isfinite(t.loc))
                       {
                           throw InputError("target: Student-t location must be finite");
                       }
                       dim_ = 1;
                   },
                   [&](const GmmTarget &g) {
                       if (g.components.empty() || g.components.size() != g.weights.size())
                       {
                           throw InputError("target: GMM needs one weight per component");
                       }
                       double total = 0.0;
                       for (double w : g.weights)
                       {
                           if (!(w >= 0.0) || !std::isfinite(w))
                           {
                               throw InputError("target: GMM weights must be nonnegative");
                           }
                           total += w;
                       }
                       if (std::abs(total - 1.0) > 1e-12)
                       {
                           throw InputError("target: GMM weights must sum to 1");
                       }
                       for (const auto &c : g.components)
                       {
                           const std::size_t d = cache_gaussian(c);
                           if (dim_ != 0 && d != dim_)
                           {
                               throw InputError("target: GMM components differ in dimension");
                           }
                           dim_ = d;
                       }
                       for (double w : g.weights)
                       {
                           log_weights_.push_back(w > 0.0 ? std::log(w) : kNegInf);
                       }
                   },
                   [&](const RingMixtureTarget &r) {
                       if (r.centers.empty() || r.centers.size() != r.radii.size())
                       {
                           throw InputError("target: ring mixture needs one radius per center");
                       }
                       require_positive(r.width, "ring width");
                       dim_ = r.centers.front().size();
                       if (dim_ < 1)
                       {
                           throw InputError("target: ring centers must be non-empty");
                       }
                       for (std::size_t k = 0; k < r.centers.size(); ++k)
                       {
                           if (r.centers[k].size() != dim_)
                           {
                               throw InputError("target: ring centers differ in dimension");
                           }
                           require_positive(r.radii[k], "ring radius");
                       }
                   },
                   [&](const TwoMoonTarget &t) {
                       require_positive(t.radius, "moon radius");
                       require_positive(t.radial_width, "moon radial width");
                       require_positive(t.separation, "moon separation");
                       require_positive(t.sharpness, "moon sharpness");
                       dim_ = 2;
                   },
               },
               variant_);
}

std::string TargetDensity::kind() const
{
    return std::visit(Overloaded{
                          [](const GaussianTarget &) { return std::string("gaussian"); },
                          [](const StudentTTarget &) { return std::string("student_t"); },
                          [](const GmmTarget &) { return std::string("gmm"); },
                          [](const RingMixtureTarget &) { return std::string("mixture_of_rings"); },
                          [](const TwoMoonTarget &) { return std::string("two_moon"); },
                      },
                      variant_);
}

double TargetDensity::log_density(std::span<const double> z) const
{
    const auto x = as_vector(z);
    return std::visit(
        Overloaded{
            [&](const GaussianTarget &) {
                const Eigen::VectorXd d = x - gaussians_[0].mean;
                return -0.5 * d.dot(gaussians_[0].precision * d);
            },
            [&](const StudentTTarget &t) {
                const double u = (z[0] - t.loc) / t.scale;
                return -0.5 * (t.dof + 1.0) * std::log1p(u * u / t.dof);
            },
            [&](const GmmTarget &g) {
                std::vector<double> terms(g.components.size());
                for (std::size_t k = 0; k < terms.size(); ++k)
                {
                    const Eigen::VectorXd d = x - gaussians_[k].mean;
                    terms[k] = log_weights_[k] - 0.5 * gaussians_[k].log_det -
                               0.5 * d.dot(gaussians_[k].precision * d);
                }
                return log_sum_exp(terms);
            },
            [&](const RingMixtureTarget &r) {
                std::vector<double> terms(r.centers.size());
                const double inv_2w2 = 0.5 / (r.width * r.width);
                for (std::size_t k = 0; k < terms.size(); ++k)
                {
                    const double dist = (x - as_vector(r.centers[k])).norm();
                    const double e = dist - r.radii[k];
                    terms[k] = -e * e * inv_2w2;
                }
                return log_sum_exp(terms);
            },
            [&](const TwoMoonTarget &t) {
                std::array<double, 2> terms{};
                const double inv_2w2 = 0.5 / (t.radial_width * t.radial_width);
                for (int k = 0; k < 2; ++k)
                {
                    const double s = k == 0 ? 1.0 : -1.0;
                    const double dy = z[1] - s * t.separation;
                    const double e = std::hypot(z[0], dy) - t.radius;
                    const double cut = relu(-s * z[0] * t.sharpness);
                    terms[k] = -e * e * inv_2w2 - cut * cut;
                }
                return log_sum_exp(terms);
            },
        },
        variant_);
}

void TargetDensity::score(std::span<const double> z, std::span<double> out) const
{
    const auto x = as_vector(z);
    Eigen::Map<Eigen::VectorXd> result(out.data(), static_cast<Eigen::Index>(out.size()));
    std::visit(
        Overloaded{
            [&](const GaussianTarget &) { result = -(gaussians_[0].precision * (x - gaussians_[0].mean)); },
            [&](const StudentTTarget &t) {
                const double d = z[0] - t.loc;
                out[0] = -(t.dof + 1.0) * d / (t.dof * t.scale * t.scale + d * d);
            },
            [&](const GmmTarget &g) {
                const std::size_t k_count = g.components.size();
                std::vector<double> terms(k_count);
                std::vector<Eigen::VectorXd> grads(k_count);
                for (std::size_t k = 0; k < k_count; ++k)
                {
                    const Eigen::VectorXd d = x - gaussians_[k].mean;
                    grads[k] = -(gaussians_[k].precision * d);
                    terms[k] = log_weights_[k] - 0.5 * gaussians_[k].log_det - 0.5 * d.dot(-grads[k]);
                }
                const double lse = log_sum_exp(terms);
                result.setZero();
                for (std::size_t k = 0; k < k_count; ++k)
                {
                    const double resp = std::exp(terms[k] - lse);
                    if (resp > 0.0)
                    {
                        result += resp * grads[k];
                    }
                }
            },
            [&](const RingMixtureTarget &r) {
                const std::size_t k_count = r.centers.size();
                std::vector<double> terms(k_count);
                std::vector<Eigen::VectorXd> grads(k_count);
                const double w2 = r.width * r.width;
                for (std::size_t k = 0; k < k_count; ++k)
                {
                    const Eigen::VectorXd d = x - as_vector(r.centers[k]);
                    const double dist = d.norm();
                    const double e = dist - r.radii[k];
                    terms[k] = -0.5 * e * e / w2;
                    // The ring profile has a cone point at the center; take the zero subgradient there.
                    grads[k] = dist > 0.0 ? Eigen::VectorXd(-(e / (w2 * dist)) * d) : Eigen::VectorXd::Zero(d.size());
                }
                const double lse = log_sum_exp(terms);
                result.setZero();
                for (std::size_t k = 0; k < k_count; ++k)
                {
                    result += std::exp(terms[k] - lse) * grads[k];
                }
            },
            [&](const TwoMoonTarget &t) {
                std::array<double, 2> terms{};
                std::array<std::array<double, 2>, 2> grads{};
                const double w2 = t.radial_width * t.radial_width;
                for (int k = 0; k < 2; ++k)
                {
                    const double s = k == 0 ? 1.0 : -1.0;
                    const double dy = z[1] - s * t.separation;
                    const double dist = std::hypot(z[0], dy);
                    const double e = dist - t.radius;
                    const double cut = relu(-s * z[0] * t.sharpness);
                    terms[k] = -0.5 * e * e / w2 - cut * cut;
                    const double radial = dist > 0.0 ? -e / (w2 * dist) : 0.0;
                    grads[k][0] = radial * z[0] + 2.0 * cut * s * t.sharpness;
                    grads[k][1] = radial * dy;
                }
                const double lse = log_sum_exp(terms);
                out[0] = 0.0;
                out[1] = 0.0;
                for (int k = 0; k < 2; ++k)
                {
                    const double resp = std::exp(terms[k] - lse);
                    out[0] += resp * grads[k][0];
                    out[1] += resp * grads[k][1];
                }
            },
        },
        variant_);
}

double log_density_unnorm(const ScoreModel &model, std::span<const double> z)
{
    if (z.size() != model.dim())
    {
        throw InputError("log_density: point has dimension " + std::to_string(z.size()) + ", target expects " +
                         std::to_string(model.dim()));
    }
    return model.log_density(z);
}

Point score(const ScoreModel &model, std::span<const double> z)
{
    if (z.size() != model.dim())
    {
        throw InputError("score: point has dimension " + std::to_string(z.size()) + ", target expects " +
                         std::to_string(model.dim()));
    }
    Point out(z.size());
    model.score(z, out);
    return out;
}

std::vector<double> score_columns(const ParticleSet &points, const ScoreModel &model)
{
    if (points.dim() != model.dim())
    {
        throw InputError("particles have dimension " + std::to_string(points.dim()) + ", target expects " +
                         std::to_string(model.dim()));
    }
    const std::size_t m = points.size();
    const std::size_t dim = points.dim();
    std::vector<double> cols(m * dim);
    Point s(dim);
    for (std::size_t i = 0; i < m; ++i)
    {
        model.score(points[i], s);
        for (std::size_t d = 0; d < dim; ++d)
        {
            if (!std::isfinite(s[d]))
            {
                throw NumericError("non-finite score at particle " + std::to_string(i));
            }
            cols[d * m + i] = s[d];
        }
    }
    return cols;
}

Point finite_diff_score(const ScoreModel &model, std::span<const double> z, double step)
{
    if (!(step > 0.0) || !std::isfinite(step))
    {
        throw InputError("finite_diff_score: step must be finite and > 0");
    }
    if (z.size() != model.dim())
    {
        throw InputError("finite_diff_score: dimension mismatch");
    }
    Point probe(z.begin(), z.end());
    Point out(z.size());
    for (std::size_t d = 0; d < z.size(); ++d)
    {
        probe[d] = z[d] + step;
        const double up = model.log_density(probe);
        probe[d] = z[d] - step;
        const double down = model.log_density(probe);
        probe[d] = z[d];
        out[d] = (up - down) / (2.0 * step);
    }
    return out;
}

namespace {

Point draw_gaussian(const Eigen::VectorXd &mean, const Eigen::MatrixXd &chol_lower, Rng &rng)
{
    Eigen::VectorXd n(mean.size());
    for (Eigen::Index d = 0; d < n.size(); ++d)
    {
        n[d] = rng.normal();
    }
    const Eigen::VectorXd x = mean + chol_lower * n;
    return Point(x.data(), x.data() + x.size());
}

std::vector<Point> sample_rejection(const TargetDensity &target, std::size_t n, Rng &rng, const RejectionBox &box)
{
    if (target.dim() != 2)
    {
        throw SamplerError("rejection sampler supports 2D targets only");
    }
    if (!(box.upper > box.lower) || box.grid < 2)
    {
        throw SamplerError("rejection box is empty");
    }
    const double span = box.upper - box.lower;
    double log_max = kNegInf;
    std::array<double, 2> z{};
    for (std::size_t a = 0; a < box.grid; ++a)
    {
        z[0] = box.lower + span * static_cast<double>(a) / static_cast<double>(box.grid - 1);
        for (std::size_t b = 0; b < box.grid; ++b)
        {
            z[1] = box.lower + span * static_cast<double>(b) / static_cast<double>(box.grid - 1);
            log_max = std::max(log_max, target.log_density(z));
        }
    }

    std::vector<Point> out;
    out.reserve(n);
    std::size_t attempts = 0;
    while (out.size() < n)
    {
        z[0] = box.lower + span * rng.uniform();
        z[1] = box.lower + span * rng.uniform();
        ++attempts;
        if (rng.uniform() < std::exp(target.log_density(z) - log_max))
        {
            out.push_back({z[0], z[1]});
        }
        if (attempts >= 100000 && static_cast<double>(out.size()) < 1e-4 * static_cast<double>(attempts))
        {
            throw SamplerError("rejection acceptance rate below 1e-4; the box misses the target mass");
        }
    }
    return out;
}

} // namespace

std::vector<Point> sample_exact(const TargetDensity &target, std::size_t n, Rng &rng, const RejectionBox &box)
{
    if (n < 1)
    {
        throw InputError("sample_exact: n must be at least 1");
    }
    return std::visit(
        Overloaded{
            [&](const GaussianTarget &g) {
                const Eigen::MatrixXd lower = g.covariance.llt().matrixL();
                std::vector<Point> out;
                out.reserve(n);
                for (std::size_t i = 0; i < n; ++i)
                {
                    out.push_back(draw_gaussian(g.mean, lower, rng));
                }
                return out;
            },
            [&](const StudentTTarget &t) {
                std::vector<Point> out;
                out.reserve(n);
                for (std::size_t i = 0; i < n; ++i)
                {
                    const double normal = rng.normal();
                    const double chi2 = 2.0 * rng.gamma(0.5 * t.dof);
                    out.push_back({t.loc + t.scale * normal / std::sqrt(chi2 / t.dof)});
                }
                return out;
            },
            [&](const GmmTarget &g) {
                std::vector<Eigen::MatrixXd> lowers;
                for (const auto &c : g.components)
                {
                    lowers.emplace_back(c.covariance.llt().matrixL());
                }
                std::vector<Point> out;
                out.reserve(n);
                for (std::size_t i = 0; i < n; ++i)
                {
                    const double u = rng.uniform();
                    std::size_t k = 0;
                    double cumulative = g.weights[0];
                    while (u >= cumulative && k + 1 < g.weights.size())
                    {
                        ++k;
                        cumulative += g.weights[k];
                    }
                    // Skip zero-weight components that the cumulative walk can land on through rounding.
                    while (g.weights[k] == 0.0 && k > 0)
                    {
                        --k;
                    }
                    out.push_back(draw_gaussian(g.components[k].mean, lowers[k], rng));
                }
                return out;
            },
            [&](const RingMixtureTarget &) { return sample_rejection(target, n, rng, box); },
            [&](const TwoMoonTarget &) { return sample_rejection(target, n, rng, box); },
        },
        target.variant());
}

ParticleSet init_particles(const TargetDensity &target, std::size_t m, Rng &rng)
{
    if (m < 1)
    {
        throw ConfigError("init_particles: M must be at least 1");
    }
    return ParticleSet::from_points(sample_exact(target, m, rng));
}

namespace {

using nlohmann::json;

json vector_json(const Eigen::VectorXd &v)
{
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json matrix_json(const Eigen::MatrixXd &m)
{
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
    {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c)
        {
            row[static_cast<std::size_t>(c)] = m(r, c);
        }
        rows.push_back(row);
    }
    return rows;
}

Eigen::VectorXd parse_vector(const json &j)
{
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Eigen::MatrixXd parse_matrix(const json &j)
{
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty())
    {
        throw InputError("target JSON: empty matrix");
    }
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r)
    {
        if (rows[r].size() != rows.front().size())
        {
            throw InputError("target JSON: ragged matrix");
        }
        for (std::size_t c = 0; c < rows[r].size(); ++c)
        {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return m;
}

GaussianTarget parse_gaussian(const json &p)
{
    return {parse_vector(p.at("mean")), parse_matrix(p.at("covariance"))};
}

json gaussian_json(const GaussianTarget &g)
{
    return {{"mean", vector_json(g.mean)}, {"covariance", matrix_json(g.covariance)}};
}

} // namespace

TargetDensity target_from_json(const nlohmann::json &doc)
{
    try
    {
        const std::string variant = doc.at("variant").get<std::string>();
        const json &p = doc.at("parameters");
        if (variant == "gaussian")
        {
            return TargetDensity(parse_gaussian(p));
        }
        if (variant == "student_t")
        {
            return TargetDensity(StudentTTarget{p.at("dof").get<double>(), p.at("loc").get<double>(),
                                                p.at("scale").get<double>()});
        }
        if (variant == "gmm")
        {
            GmmTarget g;
            g.weights = p.at("weights").get<std::vector<double>>();
            for (const auto &c : p.at("components"))
            {
                g.components.push_back(parse_gaussian(c));
            }
            return TargetDensity(std::move(g));
        }
        if (variant == "mixture_of_rings")
        {
            return TargetDensity(RingMixtureTarget{p.at("centers").get<std::vector<Point>>(),
                                                   p.at("radii").get<std::vector<double>>(),
                                                   p.at("width").get<double>()});
        }
        if (variant == "two_moon")
        {
            return TargetDensity(TwoMoonTarget{p.at("radius").get<double>(), p.at("radial_width").get<double>(),
                                               p.at("separation").get<double>(), p.at("sharpness").get<double>()});
        }
        throw InputError("target JSON: unknown variant '" + variant + "'");
    }
    catch (const json::exception &e)
    {
        throw InputError(std::string("target JSON: ") + e.what());
    }
}

nlohmann::json to_json(const TargetDensity &target)
{
    json params = std::visit(
        Overloaded{
            [](const GaussianTarget &g) { return gaussian_json(g); },
            [](const StudentTTarget &t) { return json{{"dof", t.dof}, {"loc", t.loc}, {"scale", t.scale}}; },
            [](const GmmTarget &g) {
                json comps = json::array();
                for (const auto &c : g.components)
                {
                    comps.push_back(gaussian_json(c));
                }
                return json{{"weights", g.weights}, {"components", comps}};
            },
            [](const RingMixtureTarget &r) {
                return json{{"centers", r.centers}, {"radii", r.radii}, {"width", r.width}};
            },
            [](const TwoMoonTarget &t) {
                return json{{"radius", t.radius},
                            {"radial_width", t.radial_width},
                            {"separation", t.separation},
                            {"sharpness", t.sharpness}};
            },
        },
        target.variant());
    return {{"variant", target.kind()}, {"parameters", params}};
}

namespace {

GaussianTarget isotropic(std::vector<double> mean, double sigma)
{
    const auto d = static_cast<Eigen::Index>(mean.size());
    return {Eigen::Map<const Eigen::VectorXd>(mean.data(), d), sigma * sigma * Eigen::MatrixXd::Identity(d, d)};
}

} // namespace

const std::vector<std::string> &preset_1d_names()
{
    static const std::vector<std::string> names{"gauss-3", "student", "gmm-sym"};
    return names;
}

const std::vector<std::string> &preset_2d_names()
{
    static const std::vector<std::string> names{"mog", "mor", "tm"};
    return names;
}

TargetDensity preset_1d(const std::string &name)
{
    if (name == "gauss-3")
    {
        return TargetDensity(isotropic({-3.0}, 0.5));
    }
    if (name == "student")
    {
        return TargetDensity(StudentTTarget{9.0, 1.5, 0.5});
    }
    if (name == "gmm-sym")
    {
        return TargetDensity(GmmTarget{{0.5, 0.5}, {isotropic({-2.0}, 0.5), isotropic({2.0}, 0.5)}});
    }
    throw ConfigError("unknown 1D preset '" + name + "' (valid: gauss-3, student, gmm-sym)");
}

TargetDensity preset_2d(const std::string &name)
{
    if (name == "mog")
    {
        // Six equal-weight components on a circle of radius 3.
        GmmTarget g;
        for (int k = 0; k < 6; ++k)
        {
            const double angle = 2.0 * std::numbers::pi * k / 6.0;
            g.weights.push_back(1.0 / 6.0);
            g.components.push_back(isotropic({3.0 * std::cos(angle), 3.0 * std::sin(angle)}, 0.5));
        }
        // 6 * (1/6) rounds to 1 - 2^-53 at worst, inside the simplex tolerance.
        return TargetDensity(std::move(g));
    }
    if (name == "mor")
    {
        return TargetDensity(RingMixtureTarget{{{-2.0, 0.0}, {2.0, 0.0}}, {1.5, 1.5}, 0.2});
    }
    if (name == "tm")
    {
        return TargetDensity(TwoMoonTarget{2.0, 0.3, 1.0, 3.0});
    }
    throw ConfigError("unknown 2D preset '" + name + "' (valid: mog, mor, tm)");
}

double preset_2d_bandwidth(const std::string &name)
{
    if (name == "mog" || name == "tm")
    {
        return 0.5;
    }
    if (name == "mor")
    {
        return 1.0;
    }
    throw ConfigError("unknown 2D preset '" + name + "' (valid: mog, mor, tm)");
}

} // namespace infoflow
