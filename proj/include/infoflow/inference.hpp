#ifndef INFOFLOW_INFERENCE_HPP
#define INFOFLOW_INFERENCE_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "infoflow/core.hpp"
#include "infoflow/kernels.hpp"
#include "infoflow/targets.hpp"

namespace infoflow {

/// Per-particle velocities, M x D row-major like ParticleSet.
class DriftField
{
public:
    /// Throws InputError on a shape mismatch or a non-finite entry.
    DriftField(std::size_t size, std::size_t dim, std::vector<double> values);

    std::size_t size() const noexcept { return m_; }
    std::size_t dim() const noexcept { return d_; }
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * d_, d_}; }
    std::span<const double> values() const noexcept { return values_; }

private:
    std::size_t m_;
    std::size_t d_;
    std::vector<double> values_;
};

/// Kernel ansatz at particle i: (1/M) sum_j [K(z_j, z_i) s(z_j) + grad_first K(z_j, z_i)], self-term included.
Point ansatz(const ParticleSet &points, const ScoreModel &target, const RbfKernel &kernel, std::size_t i);

/// Velocity of every particle under the chosen composition.
DriftField drift(const ParticleSet &points, const ScoreModel &target, const RbfKernel &kernel,
                 DriftComposition composition);

/// Forward Euler: z_i + eps * field_i, time step + 1. Throws InputError unless eps > 0 and shapes match.
ParticleSet step(const ParticleSet &points, const DriftField &field, double eps);

/**
 * Runs `config.horizon` Euler steps from `init`, re-resolving the bandwidth
 * before each one. Snapshots are taken at t = 0, every `snapshot_stride`
 * steps and at the last step. Throws DivergenceError with the failing step
 * when a coordinate leaves [-1e8, 1e8] or becomes non-finite.
 */
RunRecord run_info(const RunConfig &config, const ScoreModel &target, const ParticleSet &init);

} // namespace infoflow

#endif
