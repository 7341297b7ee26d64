#ifndef INFOFLOW_RNG_HPP
#define INFOFLOW_RNG_HPP

#include <array>
#include <cstddef>
#include <cstdint>

namespace infoflow {

/**
 * Seeded xoshiro256** generator.
 *
 * The 256-bit state is expanded from the 64-bit seed with splitmix64, so the
 * integer and uniform streams are identical on every platform. Normal and
 * gamma variates are produced by the transforms below rather than by
 * <random> distributions, whose algorithms are implementation defined.
 */
class Rng
{
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const noexcept { return seed_; }

    /// Independent stream for replicate or datapoint `stream`, seeded as seed ^ stream.
    Rng derive(std::uint64_t stream) const { return Rng(seed_ ^ stream); }

    std::uint64_t next_u64();

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();

    /// Uniform integer on [0, n).
    std::size_t uniform_index(std::size_t n);

    /// Standard normal via the Marsaglia polar method (pairs cached).
    double normal();

    /// Gamma(shape, 1) via Marsaglia-Tsang squeeze.
    double gamma(double shape);

    /// -1 or +1 with equal probability.
    double rademacher();

private:
    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

} // namespace infoflow

#endif
