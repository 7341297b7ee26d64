#ifndef INFOFLOW_TEST_UTIL_HPP
#define INFOFLOW_TEST_UTIL_HPP

#include <cmath>
#include <vector>

#include "infoflow/core.hpp"
#include "infoflow/rng.hpp"

namespace testutil {

inline infoflow::ParticleSet random_cloud(std::size_t m, std::size_t dim, infoflow::Rng &rng, double scale = 1.0)
{
    std::vector<double> c(m * dim);
    for (double &v : c)
    {
        v = scale * rng.normal();
    }
    return infoflow::ParticleSet(dim, std::move(c));
}

inline double rel_err(double a, double b, double floor = 1e-8)
{
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale < floor ? std::abs(a - b) : std::abs(a - b) / scale;
}

} // namespace testutil

#endif
