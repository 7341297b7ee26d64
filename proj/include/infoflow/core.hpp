#ifndef INFOFLOW_CORE_HPP
#define INFOFLOW_CORE_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "infoflow/error.hpp"
#include "infoflow/rng.hpp"

namespace infoflow {

/// A latent coordinate vector.
using Point = std::vector<double>;

/**
 * Uniformly weighted particle cloud: M points in a D-dimensional latent space
 * at integer time step t. Coordinates are stored row-major (particle i owns
 * entries [i*D, (i+1)*D)). Values are immutable once constructed; flows build
 * new sets and the index of each particle is preserved.
 */
class ParticleSet
{
public:
    /// Throws InputError unless M >= 1, the buffer is M*D long and all entries are finite.
    ParticleSet(std::size_t dim, std::vector<double> coords, std::size_t time_step = 0);

    static ParticleSet from_points(const std::vector<Point> &points, std::size_t time_step = 0);

    std::size_t size() const noexcept { return coords_.size() / dim_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t time_step() const noexcept { return time_step_; }

    std::span<const double> operator[](std::size_t i) const
    {
        return {coords_.data() + i * dim_, dim_};
    }
    std::span<const double> coords() const noexcept { return coords_; }

    Point point(std::size_t i) const;
    std::vector<Point> points() const;

    /// Structure-of-arrays copy: entry (d, i) lives at d*M + i.
    std::vector<double> columns() const;

    bool operator==(const ParticleSet &other) const = default;

private:
    std::size_t dim_;
    std::vector<double> coords_;
    std::size_t time_step_;
};

/// How the RBF bandwidth is chosen for each step.
struct BandwidthPolicy
{
    enum class Kind
    {
        kMedian,         ///< lower median of pairwise squared distances
        kMedianDistance, ///< lower median of pairwise distances
        kMedianLog,      ///< squared-distance median divided by log(M + 1)
        kFixed,          ///< constant h
    };

    Kind kind = Kind::kMedian;
    double fixed_h = 1.0;

    static BandwidthPolicy median() { return {}; }
    static BandwidthPolicy fixed(double h) { return {Kind::kFixed, h}; }

    /// Accepts "median", "median-dist", "median-log" and "fixed:<h>".
    static BandwidthPolicy parse(const std::string &text);
    std::string to_string() const;
};

/// Which terms make up the particle velocity.
enum class DriftComposition
{
    /// Kernel ansatz alone, E_Q[K(z',z) s(z') + grad_{z'} K(z',z)].
    kAnsatz,
    /// Direct score plus the kernel ansatz, s(z) + E_Q[...], as in the literal Euler update.
    kScorePlusAnsatz,
};

std::string to_string(DriftComposition c);
DriftComposition parse_drift_composition(const std::string &text);

struct RunConfig
{
    std::size_t num_particles = 200;
    std::size_t horizon = 2000;
    double step_size = 0.05;
    std::uint64_t seed = 0;
    BandwidthPolicy bandwidth = BandwidthPolicy::median();
    DriftComposition composition = DriftComposition::kAnsatz;
    /// Record a snapshot every `snapshot_stride` steps (plus t=0 and t=T); 0 records nothing.
    std::size_t snapshot_stride = 10;
    bool record_particles = true;
    bool record_ksd = true;

    /// Throws ConfigError when an invariant is violated.
    void validate() const;
};

/// Names allowed in a snapshot's scalar list.
enum class ScalarName
{
    kKsd,
    kLoglik,
    kBandwidth,
};

std::string to_string(ScalarName name);
/// Throws RecordingError on names outside the schema.
ScalarName parse_scalar_name(const std::string &text);

struct Snapshot
{
    std::size_t t = 0;
    std::optional<ParticleSet> particles;
    std::vector<std::pair<ScalarName, double>> scalars;

    std::optional<double> scalar(ScalarName name) const;
};

/**
 * Trajectory of a run: snapshot rows keyed by unique time step, kept sorted
 * ascending, plus the final cloud.
 */
class RunRecord
{
public:
    /// Throws RecordingError if a row with the same t exists.
    void append(Snapshot snapshot);

    const std::vector<Snapshot> &snapshots() const noexcept { return rows_; }
    std::size_t size() const noexcept { return rows_.size(); }
    bool empty() const noexcept { return rows_.empty(); }

    /// Values of one scalar across rows that carry it, as (t, value) pairs.
    std::vector<std::pair<std::size_t, double>> series(ScalarName name) const;

    const std::optional<ParticleSet> &final_particles() const noexcept { return final_; }
    void set_final_particles(ParticleSet ps) { final_ = std::move(ps); }

    /// `t,particle_id,dim_0..dim_{D-1}` for every row with particles.
    void write_trajectory_csv(std::ostream &out) const;
    /// `t,name,value` for every scalar of every row.
    void write_scalars_csv(std::ostream &out) const;

    bool operator==(const RunRecord &other) const = default;

private:
    std::vector<Snapshot> rows_;
    std::optional<ParticleSet> final_;
};

bool operator==(const Snapshot &a, const Snapshot &b);

/// Functional form of RunRecord::append.
RunRecord record_snapshot(RunRecord record, const ParticleSet &ps,
                          std::vector<std::pair<ScalarName, double>> scalars);

/// M i.i.d. standard normal points in D dimensions, t = 0.
ParticleSet init_particles(std::size_t m, std::size_t dim, Rng &rng);

struct CloudMoments
{
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

/// Arithmetic mean and unbiased (M - 1) covariance; zero covariance when M = 1.
CloudMoments cloud_moments(const ParticleSet &ps);

/// Shortest round-trip decimal form used by every CSV/JSON writer.
std::string format_double(double v);

} // namespace infoflow

#endif
