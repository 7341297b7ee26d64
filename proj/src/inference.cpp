#include "infoflow/inference.hpp"

#include <cmath>
#include <string>

#include "infoflow/discrepancy.hpp"
#include "infoflow/parallel.hpp"
#include "infoflow/simd/pairwise.hpp"

namespace infoflow {

namespace {

constexpr double kDivergenceBound = 1e8;

std::vector<std::pair<ScalarName, double>> snapshot_scalars(const RunConfig &config, const ScoreModel &target,
                                                            const ParticleSet &ps)
{
    const double h = resolve_bandwidth(config.bandwidth, ps);
    std::vector<std::pair<ScalarName, double>> scalars;
    if (config.record_ksd)
    {
        scalars.emplace_back(ScalarName::kKsd, ksd(ps, target, RbfKernel(h)));
    }
    scalars.emplace_back(ScalarName::kBandwidth, h);
    return scalars;
}

void record(RunRecord &rec, const RunConfig &config, const ScoreModel &target, const ParticleSet &ps)
{
    Snapshot snap;
    snap.t = ps.time_step();
    if (config.record_particles)
    {
        snap.particles = ps;
    }
    snap.scalars = snapshot_scalars(config, target, ps);
    rec.append(std::move(snap));
}

} // namespace

DriftField::DriftField(std::size_t size, std::size_t dim, std::vector<double> values)
    : m_(size), d_(dim), values_(std::move(values))
{
    if (d_ == 0 || values_.size() != m_ * d_)
    {
        throw InputError("DriftField: expected " + std::to_string(m_) + " x " + std::to_string(d_) + " entries");
    }
    for (double v : values_)
    {
        if (!std::isfinite(v))
        {
            throw NumericError("DriftField: non-finite entry");
        }
    }
}

Point ansatz(const ParticleSet &points, const ScoreModel &target, const RbfKernel &kernel, std::size_t i)
{
    if (i >= points.size())
    {
        throw InputError("ansatz: particle index " + std::to_string(i) + " out of range");
    }
    const std::vector<double> scores = score_columns(points, target);
    const std::vector<double> cols = points.columns();
    Point out(points.dim());
    simd::active_kernels().ansatz_row(cols.data(), scores.data(), points.size(), points.dim(), i,
                                      1.0 / kernel.bandwidth(), out.data());
    const double inv_m = 1.0 / static_cast<double>(points.size());
    for (double &v : out)
    {
        v *= inv_m;
    }
    return out;
}

DriftField drift(const ParticleSet &points, const ScoreModel &target, const RbfKernel &kernel,
                 DriftComposition composition)
{
    const std::size_t m = points.size();
    const std::size_t dim = points.dim();
    const std::vector<double> scores = score_columns(points, target);
    const std::vector<double> cols = points.columns();
    const double inv_h = 1.0 / kernel.bandwidth();
    const double inv_m = 1.0 / static_cast<double>(m);
    const bool add_score = composition == DriftComposition::kScorePlusAnsatz;
    const auto &kernels = simd::active_kernels();

    std::vector<double> values(m * dim);
    parallel::parallel_for(m, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
        {
            double *row = values.data() + i * dim;
            kernels.ansatz_row(cols.data(), scores.data(), m, dim, i, inv_h, row);
            for (std::size_t d = 0; d < dim; ++d)
            {
                row[d] *= inv_m;
                if (add_score)
                {
                    row[d] = scores[d * m + i] + row[d];
                }
            }
        }
    });
    return DriftField(m, dim, std::move(values));
}

ParticleSet step(const ParticleSet &points, const DriftField &field, double eps)
{
    if (!(eps > 0.0) || !std::isfinite(eps))
    {
        throw InputError("step: step size must be finite and > 0");
    }
    if (field.size() != points.size() || field.dim() != points.dim())
    {
        throw InputError("step: drift field shape does not match the particle cloud");
    }
    std::vector<double> next(points.coords().begin(), points.coords().end());
    const auto f = field.values();
    for (std::size_t k = 0; k < next.size(); ++k)
    {
        next[k] += eps * f[k];
    }
    return ParticleSet(points.dim(), std::move(next), points.time_step() + 1);
}

RunRecord run_info(const RunConfig &config, const ScoreModel &target, const ParticleSet &init)
{
    config.validate();
    if (init.dim() != target.dim())
    {
        throw InputError("run_info: initial cloud has dimension " + std::to_string(init.dim()) +
                         ", target expects " + std::to_string(target.dim()));
    }
    if (init.size() != config.num_particles)
    {
        throw InputError("run_info: initial cloud has " + std::to_string(init.size()) + " particles, config asks for " +
                         std::to_string(config.num_particles));
    }

    RunRecord rec;
    ParticleSet ps = init;
    const std::size_t stride = config.snapshot_stride;
    if (stride > 0)
    {
        record(rec, config, target, ps);
    }
    for (std::size_t t = 1; t <= config.horizon; ++t)
    {
        const RbfKernel kernel(resolve_bandwidth(config.bandwidth, ps));
        DriftField field = [&] {
            try
            {
                return drift(ps, target, kernel, config.composition);
            }
            catch (const NumericError &e)
            {
                throw DivergenceError(t, std::string(e.what()) + " at step " + std::to_string(t) +
                                             "; try a smaller step size");
            }
        }();
        const auto cur = ps.coords();
        const auto f = field.values();
        std::vector<double> next(cur.size());
        for (std::size_t k = 0; k < next.size(); ++k)
        {
            next[k] = cur[k] + config.step_size * f[k];
            if (!std::isfinite(next[k]) || std::abs(next[k]) > kDivergenceBound)
            {
                throw DivergenceError(t, "particle " + std::to_string(k / ps.dim()) + " diverged at step " +
                                             std::to_string(t) + "; try a smaller step size");
            }
        }
        ps = ParticleSet(ps.dim(), std::move(next), ps.time_step() + 1);
        if (stride > 0 && (t % stride == 0 || t == config.horizon))
        {
            record(rec, config, target, ps);
        }
    }
    rec.set_final_particles(ps);
    return rec;
}

} // namespace infoflow
