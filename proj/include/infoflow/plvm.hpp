#ifndef INFOFLOW_PLVM_HPP
#define INFOFLOW_PLVM_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "infoflow/core.hpp"
#include "infoflow/rng.hpp"
#include "infoflow/targets.hpp"

namespace infoflow {

/// x = W z + b.
struct LinearDecoder
{
    Eigen::MatrixXd w;
    Eigen::VectorXd b;
};

/// x = W2 tanh(W1 z + b1) + b2.
struct MlpDecoder
{
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;
};

using Decoder = std::variant<LinearDecoder, MlpDecoder>;

/// true marks a dimension that is observed.
using ObservationMask = std::vector<bool>;

/**
 * Decoder with isotropic Gaussian noise and a standard normal prior on the
 * latent. Parameters flatten to one vector: matrices row-major in declaration
 * order, then log(sigma) last.
 */
class PlvmModel
{
public:
    /// Throws ModelError on inconsistent shapes, non-finite values or sigma <= 0.
    PlvmModel(Decoder decoder, double sigma);

    const Decoder &decoder() const noexcept { return decoder_; }
    double sigma() const noexcept { return sigma_; }
    bool is_linear() const noexcept { return std::holds_alternative<LinearDecoder>(decoder_); }
    std::string kind() const { return is_linear() ? "linear" : "mlp"; }

    std::size_t obs_dim() const noexcept { return obs_dim_; }
    std::size_t latent_dim() const noexcept { return latent_dim_; }
    std::size_t num_parameters() const;

    Eigen::VectorXd decode(std::span<const double> z) const;

    Eigen::VectorXd parameters() const;
    /// Model with the given flattened parameters. Throws ModelError on a size mismatch.
    PlvmModel with_parameters(const Eigen::VectorXd &theta) const;

private:
    Decoder decoder_;
    double sigma_;
    std::size_t obs_dim_ = 0;
    std::size_t latent_dim_ = 0;
};

nlohmann::json to_json(const PlvmModel &m);
PlvmModel model_from_json(const nlohmann::json &doc);

/// log N(x | decode(z), sigma^2 I) over the observed dimensions, normalizer included.
double loglik(const PlvmModel &m, std::span<const double> x, std::span<const double> z,
              const ObservationMask *mask = nullptr);

/// grad_z [log N(z | 0, I) + loglik(m, x, z)] with the likelihood restricted to observed dimensions.
Point posterior_score(const PlvmModel &m, std::span<const double> x, std::span<const double> z,
                      const ObservationMask *mask = nullptr);

/// Gradient of loglik in the flattened parameter layout (last entry is d/d log sigma).
Eigen::VectorXd grad_theta_loglik(const PlvmModel &m, std::span<const double> x, std::span<const double> z);

/// Posterior P(z | x) as a flow target.
class PlvmPosterior : public ScoreModel
{
public:
    PlvmPosterior(const PlvmModel &model, Point x, std::optional<ObservationMask> mask = std::nullopt);

    std::size_t dim() const override { return model_.latent_dim(); }
    double log_density(std::span<const double> z) const override;
    void score(std::span<const double> z, std::span<double> out) const override;

private:
    PlvmModel model_;
    Point x_;
    std::optional<ObservationMask> mask_;
};

struct Dataset
{
    Eigen::MatrixXd rows;
    std::vector<std::string> columns;

    std::size_t size() const noexcept { return static_cast<std::size_t>(rows.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(rows.cols()); }
    Point row(std::size_t n) const;
};

/// Reads a CSV with a header row. Throws IoError when the file is unreadable or has no data rows.
Dataset read_dataset_csv(const std::string &path);
void write_dataset_csv(const Dataset &data, std::ostream &out);

enum class MStepMode
{
    kAuto,       ///< closed form for linear decoders, gradient ascent otherwise
    kGradient,
    kClosedForm, ///< linear decoders only
};

std::string to_string(MStepMode mode);
MStepMode parse_m_step_mode(const std::string &text);

struct MStepOptions
{
    MStepMode mode = MStepMode::kAuto;
    double rate = 1e-2;
    std::size_t iters = 50;
    /// Lower bound applied to sigma after every update.
    double sigma_floor = 1e-6;
};

struct EmConfig
{
    std::size_t epochs = 20;
    double m_step_rate = 1e-2;
    std::size_t m_step_iters = 50;
    MStepMode m_step_mode = MStepMode::kAuto;
    double sigma_floor = 0.05;
    bool warm_start = true;
    RunConfig inner = default_inner();

    static RunConfig default_inner();

    /// Throws ConfigError on epochs == 0, a negative rate or an invalid inner config.
    void validate() const;
};

/// 1 / (1 + |J|^2 / sigma^2), with |J| the spectral norm of W (linear) or |W2| |W1| (MLP):
/// an inverse bound on the curvature of the log-posterior.
double stable_step_size(const PlvmModel &m);

/**
 * Approximate posterior cloud for one observation: run_info on PlvmPosterior
 * from `init`, or from standard normal draws seeded with inner.seed. The step
 * size is capped at stable_step_size(m).
 */
ParticleSet e_step(const PlvmModel &m, std::span<const double> x, const RunConfig &inner,
                   const std::optional<ParticleSet> &init = std::nullopt, const ObservationMask *mask = nullptr);

using ObservationCloud = std::pair<Point, ParticleSet>;

/// Maximizes the mean loglik over every (observation, particle) pair. rate == 0 leaves gradient mode a no-op.
PlvmModel m_step(const PlvmModel &m, const std::vector<ObservationCloud> &pairs, const MStepOptions &options);

/// Mean loglik over every (observation, particle) pair.
double expected_loglik(const PlvmModel &m, const std::vector<ObservationCloud> &pairs);

struct EmResult
{
    PlvmModel model;
    /// One row per epoch (t = 1..epochs) carrying the loglik scalar.
    RunRecord record;
    std::vector<double> monitor;
    std::vector<ParticleSet> clouds;
};

/// Alternates E-steps (datapoint n seeded inner.seed ^ n) and M-steps for cfg.epochs epochs.
EmResult run_info_em(const PlvmModel &m0, const Dataset &data, const EmConfig &cfg);

/// Mean decoded value on the unobserved dimensions after an E-step that only sees observed ones.
Eigen::VectorXd predict(const PlvmModel &m, std::span<const double> x_partial, const ObservationMask &mask,
                        const RunConfig &inner);

/// predict for every row; row n uses inner.seed ^ n. Columns follow the unobserved dimensions in order.
Eigen::MatrixXd predict_dataset(const PlvmModel &m, const Dataset &data, const ObservationMask &mask,
                                const RunConfig &inner);

/// Mask observing everything except `target_cols`. Throws InputError on out-of-range columns.
ObservationMask mask_from_targets(std::size_t dim, const std::vector<std::size_t> &target_cols);

struct SyntheticData
{
    Dataset data;
    PlvmModel generator;
    double noise;
    Eigen::MatrixXd latents;
};

/// z ~ N(0, I), x = W z + b + noise * eps with W entries N(0, 1/d_obs) and b entries N(0, 1).
SyntheticData synthetic_linear(std::size_t n, std::size_t d_obs, std::size_t d_lv, double noise, Rng &rng);
/// Same with a random tanh MLP decoder of the given hidden width.
SyntheticData synthetic_mlp(std::size_t n, std::size_t d_obs, std::size_t d_lv, std::size_t hidden, double noise,
                            Rng &rng);

nlohmann::json to_json(const SyntheticData &s);

/// Random initial model for training: weights N(0, 1/fan_in), zero biases, sigma = 1.
PlvmModel random_model(const std::string &kind, std::size_t d_obs, std::size_t d_lv, std::size_t hidden, Rng &rng);

} // namespace infoflow

#endif
