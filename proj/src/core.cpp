#include "infoflow/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

namespace infoflow {

ParticleSet::ParticleSet(std::size_t dim, std::vector<double> coords, std::size_t time_step)
    : dim_(dim), coords_(std::move(coords)), time_step_(time_step)
{
    if (dim_ == 0)
    {
        throw InputError("ParticleSet: dimension must be at least 1");
    }
    if (coords_.empty() || coords_.size() % dim_ != 0)
    {
        throw InputError("ParticleSet: coordinate buffer is not a non-empty M x D block");
    }
    for (std::size_t k = 0; k < coords_.size(); ++k)
    {
        if (!std::isfinite(coords_[k]))
        {
            throw InputError("ParticleSet: non-finite coordinate at particle " + std::to_string(k / dim_));
        }
    }
}

ParticleSet ParticleSet::from_points(const std::vector<Point> &points, std::size_t time_step)
{
    if (points.empty())
    {
        throw InputError("ParticleSet: no points");
    }
    const std::size_t dim = points.front().size();
    std::vector<double> coords;
    coords.reserve(points.size() * dim);
    for (const auto &p : points)
    {
        if (p.size() != dim)
        {
            throw InputError("ParticleSet: points have different dimensions");
        }
        coords.insert(coords.end(), p.begin(), p.end());
    }
    return ParticleSet(dim, std::move(coords), time_step);
}

Point ParticleSet::point(std::size_t i) const
{
    auto row = (*this)[i];
    return Point(row.begin(), row.end());
}

std::vector<Point> ParticleSet::points() const
{
    std::vector<Point> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i)
    {
        out.push_back(point(i));
    }
    return out;
}

std::vector<double> ParticleSet::columns() const
{
    const std::size_t m = size();
    std::vector<double> cols(coords_.size());
    for (std::size_t i = 0; i < m; ++i)
    {
        for (std::size_t d = 0; d < dim_; ++d)
        {
            cols[d * m + i] = coords_[i * dim_ + d];
        }
    }
    return cols;
}

BandwidthPolicy BandwidthPolicy::parse(const std::string &text)
{
    if (text == "median")
    {
        return {Kind::kMedian, 1.0};
    }
    if (text == "median-dist")
    {
        return {Kind::kMedianDistance, 1.0};
    }
    if (text == "median-log")
    {
        return {Kind::kMedianLog, 1.0};
    }
    if (text.rfind("fixed:", 0) == 0)
    {
        const std::string value = text.substr(6);
        double h = 0.0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), h);
        if (ec != std::errc() || ptr != value.data() + value.size() || !(h > 0.0) || !std::isfinite(h))
        {
            throw ConfigError("bandwidth: fixed:<h> needs a finite h > 0, got '" + value + "'");
        }
        return fixed(h);
    }
    throw ConfigError("bandwidth: expected median|median-dist|median-log|fixed:<h>, got '" + text + "'");
}

std::string BandwidthPolicy::to_string() const
{
    switch (kind)
    {
    case Kind::kMedian:
        return "median";
    case Kind::kMedianDistance:
        return "median-dist";
    case Kind::kMedianLog:
        return "median-log";
    case Kind::kFixed:
        return "fixed:" + format_double(fixed_h);
    }
    return "median";
}

std::string to_string(DriftComposition c)
{
    return c == DriftComposition::kAnsatz ? "ansatz" : "score+ansatz";
}

DriftComposition parse_drift_composition(const std::string &text)
{
    if (text == "ansatz")
    {
        return DriftComposition::kAnsatz;
    }
    if (text == "score+ansatz")
    {
        return DriftComposition::kScorePlusAnsatz;
    }
    throw ConfigError("drift: expected ansatz|score+ansatz, got '" + text + "'");
}

void RunConfig::validate() const
{
    if (num_particles < 1)
    {
        throw ConfigError("RunConfig: num_particles must be at least 1");
    }
    if (!(step_size > 0.0) || !std::isfinite(step_size))
    {
        throw ConfigError("RunConfig: step size must be finite and > 0");
    }
    if (bandwidth.kind == BandwidthPolicy::Kind::kFixed &&
        (!(bandwidth.fixed_h > 0.0) || !std::isfinite(bandwidth.fixed_h)))
    {
        throw ConfigError("RunConfig: fixed bandwidth must be finite and > 0");
    }
}

std::string to_string(ScalarName name)
{
    switch (name)
    {
    case ScalarName::kKsd:
        return "ksd";
    case ScalarName::kLoglik:
        return "loglik";
    case ScalarName::kBandwidth:
        return "bandwidth";
    }
    return "ksd";
}

ScalarName parse_scalar_name(const std::string &text)
{
    if (text == "ksd")
    {
        return ScalarName::kKsd;
    }
    if (text == "loglik")
    {
        return ScalarName::kLoglik;
    }
    if (text == "bandwidth")
    {
        return ScalarName::kBandwidth;
    }
    throw RecordingError("unknown scalar name '" + text + "' (schema: ksd, loglik, bandwidth)");
}

std::optional<double> Snapshot::scalar(ScalarName name) const
{
    for (const auto &[n, v] : scalars)
    {
        if (n == name)
        {
            return v;
        }
    }
    return std::nullopt;
}

bool operator==(const Snapshot &a, const Snapshot &b)
{
    return a.t == b.t && a.particles == b.particles && a.scalars == b.scalars;
}

void RunRecord::append(Snapshot snapshot)
{
    auto pos = std::lower_bound(rows_.begin(), rows_.end(), snapshot.t,
                                [](const Snapshot &row, std::size_t t) { return row.t < t; });
    if (pos != rows_.end() && pos->t == snapshot.t)
    {
        throw RecordingError("duplicate snapshot at t=" + std::to_string(snapshot.t));
    }
    rows_.insert(pos, std::move(snapshot));
}

std::vector<std::pair<std::size_t, double>> RunRecord::series(ScalarName name) const
{
    std::vector<std::pair<std::size_t, double>> out;
    for (const auto &row : rows_)
    {
        if (auto v = row.scalar(name))
        {
            out.emplace_back(row.t, *v);
        }
    }
    return out;
}

void RunRecord::write_trajectory_csv(std::ostream &out) const
{
    std::size_t dim = 0;
    for (const auto &row : rows_)
    {
        if (row.particles)
        {
            dim = row.particles->dim();
            break;
        }
    }
    out << "t,particle_id";
    for (std::size_t d = 0; d < dim; ++d)
    {
        out << ",dim_" << d;
    }
    out << '\n';
    for (const auto &row : rows_)
    {
        if (!row.particles)
        {
            continue;
        }
        const auto &ps = *row.particles;
        for (std::size_t i = 0; i < ps.size(); ++i)
        {
            out << row.t << ',' << i;
            for (double v : ps[i])
            {
                out << ',' << format_double(v);
            }
            out << '\n';
        }
    }
}

void RunRecord::write_scalars_csv(std::ostream &out) const
{
    out << "t,name,value\n";
    for (const auto &row : rows_)
    {
        for (const auto &[name, value] : row.scalars)
        {
            out << row.t << ',' << to_string(name) << ',' << format_double(value) << '\n';
        }
    }
}

RunRecord record_snapshot(RunRecord record, const ParticleSet &ps,
                          std::vector<std::pair<ScalarName, double>> scalars)
{
    record.append(Snapshot{ps.time_step(), ps, std::move(scalars)});
    return record;
}

ParticleSet init_particles(std::size_t m, std::size_t dim, Rng &rng)
{
    if (m < 1 || dim < 1)
    {
        throw ConfigError("init_particles: M and D must be at least 1");
    }
    std::vector<double> coords(m * dim);
    for (auto &c : coords)
    {
        c = rng.normal();
    }
    return ParticleSet(dim, std::move(coords), 0);
}

CloudMoments cloud_moments(const ParticleSet &ps)
{
    const std::size_t m = ps.size();
    const std::size_t dim = ps.dim();
    CloudMoments out{Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Zero(dim, dim)};
    for (std::size_t i = 0; i < m; ++i)
    {
        out.mean += Eigen::Map<const Eigen::VectorXd>(ps[i].data(), dim);
    }
    out.mean /= static_cast<double>(m);
    if (m < 2)
    {
        return out;
    }
    for (std::size_t i = 0; i < m; ++i)
    {
        const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(ps[i].data(), dim) - out.mean;
        out.covariance.noalias() += c * c.transpose();
    }
    out.covariance /= static_cast<double>(m - 1);
    return out;
}

std::string format_double(double v)
{
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc())
    {
        return "nan";
    }
    return std::string(buf, ptr);
}

} // namespace infoflow
