#ifndef INFOFLOW_METRICS_HPP
#define INFOFLOW_METRICS_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace infoflow {

struct MetricReport
{
    double rmse = 0.0;
    double r2 = 0.0;
    double mae = 0.0;
    /// Percent. Empty when some truth value is zero.
    std::optional<double> mape;
    std::size_t n = 0;
};

/// Throws InputError on a length mismatch or empty input. With constant truth, R^2 is 1 for a
/// perfect fit and -inf otherwise.
MetricReport regression_metrics(std::span<const double> truth, std::span<const double> pred);

/// One-line form with "mape": null when undefined.
nlohmann::json to_json(const MetricReport &r);

struct KdeResult
{
    std::vector<double> density;
    double bandwidth = 0.0;
    /// Set when the sample variance was zero and the 1e-3 fallback bandwidth was used.
    bool fallback = false;
};

/// Gaussian KDE with Scott's bandwidth n^(-1/5) * sample std (n - 1 denominator). Needs n >= 2 and a non-empty grid.
KdeResult kde_gaussian(std::span<const double> samples, std::span<const double> grid);

} // namespace infoflow

#endif
