#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "infoflow/plvm.hpp"
#include "test_util.hpp"

using namespace infoflow;

namespace {

PlvmModel linear1d(double w, double b, double sigma)
{
    return PlvmModel(LinearDecoder{Eigen::MatrixXd::Constant(1, 1, w), Eigen::VectorXd::Constant(1, b)}, sigma);
}

Point rand_point(std::size_t n, Rng &rng, double scale = 1.0)
{
    Point p(n);
    for (double &v : p)
    {
        v = scale * rng.normal();
    }
    return p;
}

struct Posterior
{
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

Posterior exact_posterior(const LinearDecoder &d, double sigma, const Point &x)
{
    const auto xv = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::MatrixXd prec =
        Eigen::MatrixXd::Identity(d.w.cols(), d.w.cols()) + d.w.transpose() * d.w / (sigma * sigma);
    const Eigen::MatrixXd cov = prec.inverse();
    return {cov * d.w.transpose() * (xv - d.b) / (sigma * sigma), cov};
}

double op_norm(const Eigen::MatrixXd &m)
{
    return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()[0];
}

} // namespace

TEST_CASE("model validation")
{
    CHECK_THROWS_AS(linear1d(1.0, 0.0, 0.0), ModelError);
    CHECK_THROWS_AS(linear1d(1.0, 0.0, -1.0), ModelError);
    CHECK_THROWS_AS(PlvmModel(LinearDecoder{Eigen::MatrixXd::Ones(2, 1), Eigen::VectorXd::Zero(3)}, 1.0), ModelError);
    CHECK_THROWS_AS(linear1d(std::nan(""), 0.0, 1.0), ModelError);
    Rng rng(1);
    const PlvmModel mlp = random_model("mlp", 4, 2, 6, rng);
    CHECK(mlp.num_parameters() == 6 * 2 + 6 + 4 * 6 + 4 + 1);
    CHECK(mlp.with_parameters(mlp.parameters()).parameters() == mlp.parameters());
    CHECK_THROWS_AS(mlp.with_parameters(Eigen::VectorXd::Zero(3)), ModelError);
    CHECK_THROWS_AS(random_model("conv", 4, 2, 6, rng), ConfigError);
}

TEST_CASE("loglik examples")
{
    const PlvmModel id(LinearDecoder{Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3)}, 1.0);
    const Point z{0.4, -1.0, 2.0};
    CHECK(loglik(id, z, z) == doctest::Approx(-1.5 * std::log(2 * std::numbers::pi)).epsilon(1e-15));
    const Point x{1.4, -1.0, 0.0};
    CHECK(loglik(id, x, z) == doctest::Approx(-1.5 * std::log(2 * std::numbers::pi) - 0.5 * (1.0 + 4.0)).epsilon(1e-14));
    const ObservationMask mask{true, true, false};
    CHECK(loglik(id, x, z, &mask) == doctest::Approx(-std::log(2 * std::numbers::pi) - 0.5).epsilon(1e-14));
    CHECK_THROWS_AS(loglik(id, Point{1.0}, z), InputError);
}

TEST_CASE("posterior score examples")
{
    const PlvmModel id(LinearDecoder{Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2)}, 1.0);
    const Point s0 = posterior_score(id, Point{0.0, 0.0}, Point{0.0, 0.0});
    CHECK(s0 == Point{0.0, 0.0});
    CHECK(posterior_score(linear1d(2.0, 0.0, 1.0), Point{4.0}, Point{1.0})[0] == doctest::Approx(3.0));
}

TEST_CASE("grad_theta examples")
{
    const Eigen::VectorXd g = grad_theta_loglik(linear1d(1.0, 0.0, 1.0), Point{3.0}, Point{1.0});
    CHECK(g[0] == doctest::Approx(2.0));
    CHECK(g[1] == doctest::Approx(2.0));
    CHECK(g[2] == doctest::Approx(-1.0 + 4.0));
    Rng rng(2);
    const PlvmModel mlp = random_model("mlp", 3, 2, 5, rng);
    const Point z = rand_point(2, rng);
    const Eigen::VectorXd x = mlp.decode(z);
    const Eigen::VectorXd gz = grad_theta_loglik(mlp, Point(x.data(), x.data() + x.size()), z);
    CHECK(gz.head(gz.size() - 1).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("analytic gradients match finite differences")
{
    Rng rng(17);
    for (const char *kind : {"linear", "mlp"})
    {
        for (int trial = 0; trial < 40; ++trial)
        {
            const std::size_t d_obs = 2 + rng.uniform_index(4);
            const std::size_t d_lv = 1 + rng.uniform_index(3);
            const PlvmModel base = random_model(kind, d_obs, d_lv, 4 + rng.uniform_index(5), rng);
            Eigen::VectorXd theta = base.parameters();
            for (Eigen::Index i = 0; i < theta.size(); ++i)
            {
                theta[i] += 0.3 * rng.normal();
            }
            const PlvmModel m = base.with_parameters(theta);
            const Point x = rand_point(d_obs, rng, 2.0);
            const Point z = rand_point(d_lv, rng);
            const PlvmPosterior post(m, x);
            const Point s = posterior_score(m, x, z);
            const Point fd = finite_diff_score(post, z, 1e-5);
            for (std::size_t d = 0; d < d_lv; ++d)
            {
                CHECK(testutil::rel_err(s[d], fd[d], 1e-3) < 1e-5);
            }
            const Eigen::VectorXd g = grad_theta_loglik(m, x, z);
            const double e = 1e-6;
            for (Eigen::Index i = 0; i < theta.size(); ++i)
            {
                Eigen::VectorXd up = theta;
                Eigen::VectorXd dn = theta;
                up[i] += e;
                dn[i] -= e;
                const double num = (loglik(m.with_parameters(up), x, z) - loglik(m.with_parameters(dn), x, z)) / (2 * e);
                CHECK(testutil::rel_err(g[i], num, 1e-3) < 1e-5);
            }
        }
    }
}

TEST_CASE("masked posterior ignores unobserved dimensions")
{
    Rng rng(4);
    const PlvmModel m = random_model("linear", 3, 2, 0, rng);
    const ObservationMask mask{true, false, true};
    const Point z{0.3, -0.2};
    const Point a = posterior_score(m, Point{1.0, 5.0, -1.0}, z, &mask);
    const Point b = posterior_score(m, Point{1.0, -9.0, -1.0}, z, &mask);
    CHECK(a == b);
    const ObservationMask wrong{true, false};
    CHECK_THROWS_AS(posterior_score(m, Point{1.0, 5.0, -1.0}, z, &wrong), InputError);
}

TEST_CASE("closed-form M-step recovers the generating weights")
{
    Rng rng(12);
    Eigen::MatrixXd w(4, 2);
    w << 1.0, -0.5, 0.3, 2.0, -1.2, 0.7, 0.0, 1.5;
    const PlvmModel truth(LinearDecoder{w, Eigen::VectorXd::Zero(4)}, 1.0);
    std::vector<ObservationCloud> pairs;
    for (int n = 0; n < 30; ++n)
    {
        const Point z = rand_point(2, rng);
        const Eigen::VectorXd x = w * Eigen::Map<const Eigen::Vector2d>(z.data());
        pairs.emplace_back(Point(x.data(), x.data() + 4), ParticleSet(2, z));
    }
    const PlvmModel start = random_model("linear", 4, 2, 0, rng);
    const PlvmModel fit = m_step(start, pairs, MStepOptions{MStepMode::kClosedForm});
    const auto &dec = std::get<LinearDecoder>(fit.decoder());
    CHECK((dec.w - w).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(dec.b.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(fit.sigma() == 1e-6);

    Rng r2(3);
    const PlvmModel mlp = random_model("mlp", 4, 2, 3, r2);
    CHECK_THROWS_AS(m_step(mlp, pairs, MStepOptions{MStepMode::kClosedForm}), ConfigError);
}

TEST_CASE("gradient M-step arithmetic")
{
    const PlvmModel m = linear1d(1.0, 0.0, 1.0);
    const std::vector<ObservationCloud> pairs{{Point{3.0}, ParticleSet(1, {1.0, 2.0})}, {Point{0.0}, ParticleSet(1, {1.0})}};
    MStepOptions none{MStepMode::kGradient, 0.0, 50};
    CHECK(m_step(m, pairs, none).parameters() == m.parameters());

    // Hand gradients: (x - w z - b) z, (x - w z - b), -1 + r^2 per pair, averaged within then across observations.
    const double gw = (0.5 * (2.0 * 1.0 + 1.0 * 2.0) + (-1.0 * 1.0)) / 2.0;
    const double gb = (0.5 * (2.0 + 1.0) + (-1.0)) / 2.0;
    const double gs = (0.5 * ((-1.0 + 4.0) + (-1.0 + 1.0)) + (-1.0 + 1.0)) / 2.0;
    const PlvmModel one = m_step(m, pairs, MStepOptions{MStepMode::kGradient, 0.1, 1});
    const Eigen::VectorXd th = one.parameters();
    CHECK(th[0] == doctest::Approx(1.0 + 0.1 * gw).epsilon(1e-14));
    CHECK(th[1] == doctest::Approx(0.1 * gb).epsilon(1e-14));
    CHECK(th[2] == doctest::Approx(0.1 * gs).epsilon(1e-14));
    CHECK_THROWS_AS(m_step(m, pairs, MStepOptions{MStepMode::kGradient, -1.0, 1}), ConfigError);
}

TEST_CASE("E-step matches the conjugate posterior")
{
    Rng rng(21);
    for (int draw = 0; draw < 3; ++draw)
    {
        const PlvmModel gen = random_model("linear", 5, 2, 0, rng);
        Eigen::VectorXd theta = gen.parameters();
        theta[theta.size() - 1] = std::log(0.5);
        const PlvmModel m = gen.with_parameters(theta);
        const Point x = rand_point(5, rng, 1.5);
        RunConfig inner;
        inner.num_particles = 300;
        inner.horizon = 1000;
        inner.step_size = 0.05;
        inner.seed = 100 + static_cast<std::uint64_t>(draw);
        const ParticleSet cloud = e_step(m, x, inner);
        const Posterior ref = exact_posterior(std::get<LinearDecoder>(m.decoder()), m.sigma(), x);
        const CloudMoments mom = cloud_moments(cloud);
        const double scale = std::sqrt(op_norm(ref.cov));
        CHECK((mom.mean - ref.mean).norm() < 0.05 * scale);
        CHECK(op_norm(mom.covariance - ref.cov) < 0.15 * op_norm(ref.cov));
    }
}

TEST_CASE("E-step special cases")
{
    Rng rng(5);
    const PlvmModel m = random_model("linear", 3, 2, 0, rng);
    RunConfig inner = EmConfig::default_inner();
    inner.horizon = 0;
    const ParticleSet init = testutil::random_cloud(inner.num_particles, 2, rng);
    CHECK(e_step(m, Point{0.1, 0.2, 0.3}, inner, init) == init);

    // W = 0: the likelihood is flat in z, so the cloud targets the prior.
    const PlvmModel flat(LinearDecoder{Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Ones(3)}, 1.0);
    RunConfig wide;
    wide.num_particles = 400;
    wide.horizon = 1000;
    wide.step_size = 0.05;
    wide.seed = 9;
    const CloudMoments mom = cloud_moments(e_step(flat, Point{1.0, 1.0, 1.0}, wide));
    CHECK(mom.mean.norm() < 0.1);
    CHECK((mom.covariance - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 0.15);
}

TEST_CASE("stable_step_size")
{
    CHECK(stable_step_size(linear1d(2.0, 0.0, 1.0)) == doctest::Approx(0.2));
    CHECK(stable_step_size(linear1d(0.0, 0.0, 1.0)) == 1.0);
}

TEST_CASE("predict")
{
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 2);
    const Eigen::Vector3d b(0.5, -1.0, 2.0);
    const PlvmModel zero(LinearDecoder{w, b}, 0.3);
    const ObservationMask mask{true, false, false};
    RunConfig inner = EmConfig::default_inner();
    const Eigen::VectorXd p = predict(zero, Point{4.0, std::nan(""), 0.0}, mask, inner);
    REQUIRE(p.size() == 2);
    CHECK(p[0] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK_THROWS_AS(predict(zero, Point{1, 2, 3}, ObservationMask{true, true, true}, inner), InputError);
    CHECK_THROWS_AS(predict(zero, Point{1, 2, 3}, ObservationMask{false, false, false}, inner), InputError);
    CHECK_THROWS_AS(mask_from_targets(3, {3}), InputError);
    CHECK(mask_from_targets(3, {0, 2}) == ObservationMask{false, true, false});
}

TEST_CASE("noiseless linear data predicts held-out columns")
{
    Rng rng(30);
    const SyntheticData train = synthetic_linear(120, 5, 2, 0.0, rng);
    // Held-out rows from the same generator.
    Dataset held;
    held.columns = train.data.columns;
    held.rows.resize(40, 5);
    for (Eigen::Index n = 0; n < 40; ++n)
    {
        const Point z = rand_point(2, rng);
        held.rows.row(n) = train.generator.decode(z).transpose();
    }
    EmConfig cfg;
    cfg.epochs = 15;
    Rng init(32);
    const EmResult res = run_info_em(random_model("linear", 5, 2, 0, init), train.data, cfg);
    const ObservationMask mask = mask_from_targets(5, {4});
    const Eigen::MatrixXd pred = predict_dataset(res.model, held, mask, EmConfig::default_inner());
    const Eigen::VectorXd truth = held.rows.col(4);
    const double sse = (pred.col(0) - truth).squaredNorm();
    const double sst = (truth.array() - truth.mean()).square().sum();
    CHECK(1.0 - sse / sst > 0.9);
}

TEST_CASE("EM composition, determinism and recording")
{
    Rng rng(40);
    const SyntheticData syn = synthetic_linear(20, 4, 2, 0.1, rng);
    Rng init(41);
    const PlvmModel m0 = random_model("linear", 4, 2, 0, init);
    EmConfig cfg;
    cfg.epochs = 1;
    cfg.inner.horizon = 50;
    const EmResult one = run_info_em(m0, syn.data, cfg);

    std::vector<ObservationCloud> pairs;
    for (std::size_t n = 0; n < syn.data.size(); ++n)
    {
        RunConfig inner = cfg.inner;
        inner.seed = cfg.inner.seed ^ n;
        pairs.emplace_back(syn.data.row(n), e_step(m0, syn.data.row(n), inner));
    }
    const PlvmModel manual = m_step(m0, pairs, MStepOptions{cfg.m_step_mode, cfg.m_step_rate, cfg.m_step_iters,
                                                            cfg.sigma_floor});
    CHECK(manual.parameters() == one.model.parameters());
    CHECK(one.monitor.size() == 1);
    CHECK(one.monitor[0] == expected_loglik(manual, pairs));
    REQUIRE(one.record.size() == 1);
    CHECK(one.record.snapshots()[0].t == 1);

    cfg.epochs = 3;
    const EmResult a = run_info_em(m0, syn.data, cfg);
    const EmResult b = run_info_em(m0, syn.data, cfg);
    CHECK(a.model.parameters() == b.model.parameters());
    CHECK(a.monitor == b.monitor);
    CHECK(a.record.series(ScalarName::kLoglik).size() == 3);

    cfg.epochs = 0;
    CHECK_THROWS_AS(run_info_em(m0, syn.data, cfg), ConfigError);
}

TEST_CASE("gradient M-step trains an MLP decoder")
{
    Rng rng(50);
    const SyntheticData syn = synthetic_mlp(30, 3, 1, 4, 0.1, rng);
    Rng init(51);
    EmConfig cfg;
    cfg.epochs = 4;
    cfg.inner.horizon = 100;
    const EmResult res = run_info_em(random_model("mlp", 3, 1, 4, init), syn.data, cfg);
    CHECK(res.monitor.back() > res.monitor.front());
    CHECK(!res.model.is_linear());
}

TEST_CASE("model JSON and dataset CSV round trips")
{
    Rng rng(60);
    for (const char *kind : {"linear", "mlp"})
    {
        const PlvmModel m = random_model(kind, 3, 2, 4, rng);
        const PlvmModel back = model_from_json(nlohmann::json::parse(to_json(m).dump()));
        CHECK(back.parameters() == m.parameters());
        CHECK(back.kind() == kind);
    }
    CHECK_THROWS_AS(model_from_json(nlohmann::json{{"decoder", "rnn"}, {"sigma", 1.0}}), ModelError);

    const SyntheticData syn = synthetic_linear(7, 3, 1, 0.2, rng);
    const auto dir = std::filesystem::temp_directory_path() / "infoflow_test_plvm";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "data.csv").string();
    {
        std::ofstream out(path);
        write_dataset_csv(syn.data, out);
    }
    const Dataset back = read_dataset_csv(path);
    CHECK(back.columns == syn.data.columns);
    CHECK(back.rows == syn.data.rows);

    {
        std::ofstream out(path);
        out << "a,b\n";
    }
    CHECK_THROWS_AS(read_dataset_csv(path), IoError);
    {
        std::ofstream out(path);
    }
    CHECK_THROWS_AS(read_dataset_csv(path), IoError);
    {
        std::ofstream out(path);
        out << "a,b\n1,x\n";
    }
    CHECK_THROWS_AS(read_dataset_csv(path), IoError);
    CHECK_THROWS_AS(read_dataset_csv((dir / "missing.csv").string()), IoError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("m-step mode names")
{
    CHECK(parse_m_step_mode("closed-form") == MStepMode::kClosedForm);
    CHECK(to_string(MStepMode::kAuto) == "auto");
    CHECK_THROWS_AS(parse_m_step_mode("newton"), ConfigError);
}
