#include "infoflow/metrics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "infoflow/error.hpp"

namespace infoflow {

MetricReport regression_metrics(std::span<const double> truth, std::span<const double> pred)
{
    if (truth.size() != pred.size())
    {
        throw InputError("regression_metrics: " + std::to_string(truth.size()) + " truth values vs " +
                         std::to_string(pred.size()) + " predictions");
    }
    if (truth.empty())
    {
        throw InputError("regression_metrics: need at least one value");
    }
    const auto n = static_cast<double>(truth.size());
    double mean = 0.0;
    for (double t : truth)
    {
        mean += t;
    }
    mean /= n;

    double sse = 0.0;
    double sst = 0.0;
    double abs_err = 0.0;
    double pct = 0.0;
    bool mape_defined = true;
    for (std::size_t i = 0; i < truth.size(); ++i)
    {
        const double e = truth[i] - pred[i];
        sse += e * e;
        sst += (truth[i] - mean) * (truth[i] - mean);
        abs_err += std::abs(e);
        if (truth[i] == 0.0)
        {
            mape_defined = false;
        }
        else
        {
            pct += std::abs(e / truth[i]);
        }
    }

    MetricReport r;
    r.n = truth.size();
    r.rmse = std::sqrt(sse / n);
    r.mae = abs_err / n;
    if (sst > 0.0)
    {
        r.r2 = 1.0 - sse / sst;
    }
    else
    {
        r.r2 = sse == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    }
    if (mape_defined)
    {
        r.mape = 100.0 * pct / n;
    }
    return r;
}

nlohmann::json to_json(const MetricReport &r)
{
    nlohmann::json doc;
    doc["rmse"] = r.rmse;
    doc["r2"] = std::isfinite(r.r2) ? nlohmann::json(r.r2) : nlohmann::json(nullptr);
    doc["mae"] = r.mae;
    doc["mape"] = r.mape ? nlohmann::json(*r.mape) : nlohmann::json(nullptr);
    doc["n"] = r.n;
    return doc;
}

KdeResult kde_gaussian(std::span<const double> samples, std::span<const double> grid)
{
    if (samples.size() < 2)
    {
        throw InputError("kde_gaussian: need at least two samples");
    }
    if (grid.empty())
    {
        throw InputError("kde_gaussian: grid is empty");
    }
    const auto n = static_cast<double>(samples.size());
    double mean = 0.0;
    for (double s : samples)
    {
        mean += s;
    }
    mean /= n;
    double var = 0.0;
    for (double s : samples)
    {
        var += (s - mean) * (s - mean);
    }
    var /= n - 1.0;

    KdeResult out;
    out.bandwidth = std::pow(n, -0.2) * std::sqrt(var);
    if (!(out.bandwidth > 0.0))
    {
        out.bandwidth = 1e-3;
        out.fallback = true;
    }
    const double bw = out.bandwidth;
    const double norm = 1.0 / (n * bw * std::sqrt(2.0 * std::numbers::pi));
    out.density.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g)
    {
        double acc = 0.0;
        for (double s : samples)
        {
            const double u = (grid[g] - s) / bw;
            acc += std::exp(-0.5 * u * u);
        }
        out.density[g] = acc * norm;
    }
    return out;
}

} // namespace infoflow
