// infoflow command-line driver.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "infoflow/baselines.hpp"
#include "infoflow/core.hpp"
#include "infoflow/discrepancy.hpp"
#include "infoflow/inference.hpp"
#include "infoflow/io.hpp"
#include "infoflow/metrics.hpp"
#include "infoflow/parallel.hpp"
#include "infoflow/plvm.hpp"
#include "infoflow/targets.hpp"

using namespace infoflow;
using nlohmann::json;

namespace {

enum ExitCode
{
    kOk = 0,
    kUsage = 2,
    kIo = 3,
    kDiverged = 4,
};

// Streams derived from --seed for the independent random pieces of one command.
enum Stream : std::uint64_t
{
    kInitStream = 0x1000,
    kTruthStream = 0x2000,
    kFitStream = 0x3000,
    kDrawStream = 0x4000,
    kTestStream = 0x5000,
    kModelStream = 0x6000,
    kDataStream = 0x7000,
};

struct Global
{
    std::uint64_t seed = 0;
    std::string out = "out";
    std::size_t threads = 1;
    std::string bandwidth;
};

std::string join_names(const std::vector<std::string> &names)
{
    std::string s;
    for (const auto &n : names)
    {
        s += (s.empty() ? "" : ", ") + n;
    }
    return s;
}

std::string csv(const std::function<void(std::ostream &)> &writer)
{
    std::ostringstream out;
    writer(out);
    return out.str();
}

void emit(const Global &g, const std::string &file, const json &summary)
{
    const std::string line = io::json_line(summary);
    io::write_text_file(io::join(g.out, file), line);
    std::cout << line;
}

std::vector<double> linspace(double lo, double hi, std::size_t n)
{
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return g;
}

ParticleSet read_points_csv(const std::string &path)
{
    const Dataset d = read_dataset_csv(path);
    const bool has_id = !d.columns.empty() && d.columns.front() == "particle_id";
    const std::size_t first = has_id ? 1 : 0;
    if (d.dim() <= first)
    {
        throw IoError("points file '" + path + "' has no coordinate columns");
    }
    const std::size_t dim = d.dim() - first;
    std::vector<double> coords;
    coords.reserve(d.size() * dim);
    for (Eigen::Index i = 0; i < d.rows.rows(); ++i)
    {
        for (std::size_t k = first; k < d.dim(); ++k)
        {
            coords.push_back(d.rows(i, static_cast<Eigen::Index>(k)));
        }
    }
    return ParticleSet(dim, std::move(coords));
}

std::vector<std::size_t> parse_columns(const std::string &text)
{
    std::vector<std::size_t> cols;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        std::size_t used = 0;
        unsigned long v = 0;
        try
        {
            v = std::stoul(item, &used);
        }
        catch (const std::exception &)
        {
            used = 0;
        }
        if (used == 0 || used != item.size())
        {
            throw ConfigError("--target-cols: '" + item + "' is not a column index");
        }
        cols.push_back(v);
    }
    if (cols.empty())
    {
        throw ConfigError("--target-cols: no columns given");
    }
    return cols;
}

// ---------------------------------------------------------------- flow1d

struct Flow1dArgs
{
    std::string target = "gauss-3";
    std::size_t particles = 200;
    std::size_t steps = 2000;
    double eps = 0.05;
    std::size_t stride = 10;
    std::string drift = "ansatz";
    std::size_t grid = 401;
    double grid_lo = -8.0;
    double grid_hi = 8.0;
};

int cmd_flow1d(const Global &g, const Flow1dArgs &a)
{
    const TargetDensity target = preset_1d(a.target);
    RunConfig cfg;
    cfg.num_particles = a.particles;
    cfg.horizon = a.steps;
    cfg.step_size = a.eps;
    cfg.seed = g.seed;
    cfg.snapshot_stride = a.stride;
    cfg.bandwidth = g.bandwidth.empty() ? BandwidthPolicy::median() : BandwidthPolicy::parse(g.bandwidth);
    cfg.composition = parse_drift_composition(a.drift);
    if (a.stride == 0)
    {
        throw ConfigError("flow1d: --stride must be at least 1");
    }
    if (a.grid < 2 || !(a.grid_hi > a.grid_lo))
    {
        throw ConfigError("flow1d: KDE grid needs >= 2 points and grid-hi > grid-lo");
    }
    cfg.validate();

    Rng rng = Rng(g.seed).derive(kInitStream);
    const ParticleSet init = init_particles(cfg.num_particles, 1, rng);
    const RunRecord rec = run_info(cfg, target, init);

    io::ensure_directory(g.out);
    io::write_text_file(io::join(g.out, "trajectory.csv"), csv([&](std::ostream &o) { rec.write_trajectory_csv(o); }));
    io::write_text_file(io::join(g.out, "ksd.csv"), csv([&](std::ostream &o) {
                            o << "t,ksd\n";
                            for (const auto &[t, v] : rec.series(ScalarName::kKsd))
                            {
                                o << t << ',' << format_double(v) << '\n';
                            }
                        }));
    const std::vector<double> grid = linspace(a.grid_lo, a.grid_hi, a.grid);
    io::write_text_file(io::join(g.out, "kde.csv"), csv([&](std::ostream &o) {
                            o << "t,grid,density\n";
                            for (const auto &snap : rec.snapshots())
                            {
                                if (!snap.particles || snap.particles->size() < 2)
                                {
                                    continue;
                                }
                                const auto coords = snap.particles->coords();
                                const KdeResult kde = kde_gaussian(coords, grid);
                                for (std::size_t i = 0; i < grid.size(); ++i)
                                {
                                    o << snap.t << ',' << format_double(grid[i]) << ','
                                      << format_double(kde.density[i]) << '\n';
                                }
                            }
                        }));

    const auto series = rec.series(ScalarName::kKsd);
    json summary;
    summary["command"] = "flow1d";
    summary["target"] = a.target;
    summary["particles"] = a.particles;
    summary["steps"] = a.steps;
    summary["step_size"] = a.eps;
    summary["drift"] = to_string(cfg.composition);
    summary["bandwidth"] = cfg.bandwidth.to_string();
    summary["seed"] = g.seed;
    summary["initial_ksd"] = series.front().second;
    summary["final_ksd"] = series.back().second;
    const auto &final = *rec.final_particles();
    const CloudMoments mom = cloud_moments(final);
    summary["final_mean"] = mom.mean[0];
    summary["final_variance"] = mom.covariance(0, 0);
    emit(g, "summary.json", summary);
    return kOk;
}

// -------------------------------------------------------------- approx2d

struct Approx2dArgs
{
    std::string target = "mog";
    std::string target_json;
    std::string method = "info";
    std::size_t particles = 500;
    std::size_t steps = 3000;
    double eps = 0.05;
    std::string drift = "ansatz";
    double alpha = 0.05;
    std::size_t bootstrap = 1000;
    std::size_t components = 8;
    std::size_t gmm_iters = 500;
};

int cmd_approx2d(const Global &g, const Approx2dArgs &a)
{
    if (a.method != "info" && a.method != "gauss" && a.method != "gmm")
    {
        throw ConfigError("approx2d: unknown method '" + a.method + "' (valid: info, gauss, gmm)");
    }
    const bool from_file = !a.target_json.empty();
    const json doc = from_file ? io::read_json_file(a.target_json) : json();
    const TargetDensity target = from_file ? target_from_json(doc) : preset_2d(a.target);
    // Preset files may carry their own fixed bandwidth; --bandwidth wins.
    BandwidthPolicy policy;
    if (!g.bandwidth.empty())
    {
        policy = BandwidthPolicy::parse(g.bandwidth);
    }
    else if (!from_file)
    {
        policy = BandwidthPolicy::fixed(preset_2d_bandwidth(a.target));
    }
    else if (doc.contains("bandwidth"))
    {
        policy = BandwidthPolicy::fixed(doc.at("bandwidth").get<double>());
    }
    const std::string target_name = from_file ? a.target_json : a.target;

    const Rng root(g.seed);
    ParticleSet cloud = [&] {
        if (a.method == "info")
        {
            RunConfig cfg;
            cfg.num_particles = a.particles;
            cfg.horizon = a.steps;
            cfg.step_size = a.eps;
            cfg.seed = g.seed;
            cfg.bandwidth = policy;
            cfg.composition = parse_drift_composition(a.drift);
            cfg.snapshot_stride = 0;
            cfg.validate();
            Rng rng = root.derive(kInitStream);
            const ParticleSet init = init_particles(cfg.num_particles, target.dim(), rng);
            return *run_info(cfg, target, init).final_particles();
        }
        if (a.particles < 2)
        {
            throw ConfigError("approx2d: baselines need at least two particles");
        }
        Rng truth_rng = root.derive(kTruthStream);
        const std::vector<Point> truth = sample_exact(target, a.particles, truth_rng);
        Rng fit_rng = root.derive(kFitStream);
        const FittedApprox fit =
            a.method == "gauss" ? fit_gaussian_mle(truth) : fit_gmm_em(truth, a.components, a.gmm_iters, fit_rng);
        io::ensure_directory(g.out);
        io::write_text_file(io::join(g.out, "fitted.json"), io::json_line(to_json(fit)));
        Rng draw_rng = root.derive(kDrawStream);
        return ParticleSet::from_points(sample_fitted(fit, a.particles, draw_rng));
    }();

    const RbfKernel kernel(resolve_bandwidth(policy, cloud));
    const double value = ksd(cloud, target, kernel);
    const GofResult gof = gof_test(cloud, target, kernel, a.alpha, a.bootstrap, root.derive(kTestStream));

    io::ensure_directory(g.out);
    io::write_text_file(io::join(g.out, "cloud.csv"), csv([&](std::ostream &o) { io::write_points_csv(o, cloud); }));
    json summary;
    summary["command"] = "approx2d";
    summary["method"] = a.method;
    summary["target"] = target_name;
    summary["particles"] = cloud.size();
    summary["bandwidth"] = kernel.bandwidth();
    summary["seed"] = g.seed;
    summary["ksd"] = value;
    summary["gof_statistic"] = gof.statistic;
    summary["gof_threshold"] = gof.threshold;
    summary["gof_decision"] = to_string(gof.decision);
    emit(g, "summary.json", summary);
    return kOk;
}

// ------------------------------------------------------------------- gof

struct GofArgs
{
    std::string target = "gauss-3";
    std::string target_json;
    std::string points;
    double alpha = 0.05;
    std::size_t bootstrap = 1000;
};

int cmd_gof(const Global &g, const GofArgs &a)
{
    const TargetDensity target = [&] {
        if (!a.target_json.empty())
        {
            return target_from_json(io::read_json_file(a.target_json));
        }
        const auto &names2d = preset_2d_names();
        if (std::find(names2d.begin(), names2d.end(), a.target) != names2d.end())
        {
            return preset_2d(a.target);
        }
        const auto &names1d = preset_1d_names();
        if (std::find(names1d.begin(), names1d.end(), a.target) != names1d.end())
        {
            return preset_1d(a.target);
        }
        throw ConfigError("gof: unknown target '" + a.target + "' (valid: " + join_names(names1d) + ", " +
                          join_names(names2d) + ")");
    }();
    const ParticleSet cloud = read_points_csv(a.points);
    if (cloud.dim() != target.dim())
    {
        throw InputError("gof: points have dimension " + std::to_string(cloud.dim()) + ", target expects " +
                         std::to_string(target.dim()));
    }
    const BandwidthPolicy policy = g.bandwidth.empty() ? BandwidthPolicy::median() : BandwidthPolicy::parse(g.bandwidth);
    const RbfKernel kernel(resolve_bandwidth(policy, cloud));
    const GofResult res = gof_test(cloud, target, kernel, a.alpha, a.bootstrap, Rng(g.seed).derive(kTestStream));

    io::ensure_directory(g.out);
    json summary;
    summary["statistic"] = res.statistic;
    summary["threshold"] = res.threshold;
    summary["alpha"] = res.alpha;
    summary["decision"] = to_string(res.decision);
    summary["B"] = res.bootstrap_draws;
    emit(g, "gof.json", summary);
    return kOk;
}

// -------------------------------------------------------------- em-train

struct EmArgs
{
    std::string data;
    std::string synthetic;
    std::size_t n = 200;
    std::size_t d_obs = 5;
    std::size_t d_lv = 2;
    std::size_t hidden = 16;
    double noise = 0.1;
    std::string decoder = "linear";
    std::size_t epochs = 20;
    double rate = 1e-2;
    std::size_t m_iters = 50;
    std::string m_step = "auto";
    double sigma_floor = 0.05;
    bool cold_start = false;
    std::size_t particles = 32;
    std::size_t steps = 300;
    double eps = 0.05;
};

int cmd_em_train(const Global &g, const EmArgs &a)
{
    if (a.data.empty() == a.synthetic.empty())
    {
        throw ConfigError("em-train: give exactly one of --data and --synthetic");
    }
    const Rng root(g.seed);
    io::ensure_directory(g.out);

    Dataset data;
    if (!a.synthetic.empty())
    {
        Rng data_rng = root.derive(kDataStream);
        SyntheticData syn = [&] {
            if (a.synthetic == "linear")
            {
                return synthetic_linear(a.n, a.d_obs, a.d_lv, a.noise, data_rng);
            }
            if (a.synthetic == "mlp")
            {
                return synthetic_mlp(a.n, a.d_obs, a.d_lv, a.hidden, a.noise, data_rng);
            }
            throw ConfigError("em-train: --synthetic must be linear or mlp, got '" + a.synthetic + "'");
        }();
        io::write_text_file(io::join(g.out, "generator.json"), io::json_line(to_json(syn)));
        io::write_text_file(io::join(g.out, "data.csv"), csv([&](std::ostream &o) { write_dataset_csv(syn.data, o); }));
        data = std::move(syn.data);
    }
    else
    {
        data = read_dataset_csv(a.data);
    }

    EmConfig cfg;
    cfg.epochs = a.epochs;
    cfg.m_step_rate = a.rate;
    cfg.m_step_iters = a.m_iters;
    cfg.m_step_mode = parse_m_step_mode(a.m_step);
    cfg.sigma_floor = a.sigma_floor;
    cfg.warm_start = !a.cold_start;
    cfg.inner.num_particles = a.particles;
    cfg.inner.horizon = a.steps;
    cfg.inner.step_size = a.eps;
    cfg.inner.seed = g.seed;
    if (!g.bandwidth.empty())
    {
        cfg.inner.bandwidth = BandwidthPolicy::parse(g.bandwidth);
    }
    cfg.validate();

    Rng model_rng = root.derive(kModelStream);
    const PlvmModel m0 = random_model(a.decoder, data.dim(), a.d_lv, a.hidden, model_rng);
    const EmResult res = run_info_em(m0, data, cfg);

    io::write_text_file(io::join(g.out, "model.json"), io::json_line(to_json(res.model)));
    io::write_text_file(io::join(g.out, "monitor.csv"), csv([&](std::ostream &o) {
                            o << "epoch,expected_loglik\n";
                            for (std::size_t e = 0; e < res.monitor.size(); ++e)
                            {
                                o << e + 1 << ',' << format_double(res.monitor[e]) << '\n';
                            }
                        }));
    json summary;
    summary["command"] = "em-train";
    summary["decoder"] = a.decoder;
    summary["rows"] = data.size();
    summary["epochs"] = a.epochs;
    summary["seed"] = g.seed;
    summary["sigma"] = res.model.sigma();
    summary["final_expected_loglik"] = res.monitor.back();
    emit(g, "summary.json", summary);
    return kOk;
}

// --------------------------------------------------------------- predict

struct PredictArgs
{
    std::string model;
    std::string data;
    std::string target_cols;
    std::size_t particles = 32;
    std::size_t steps = 300;
    double eps = 0.05;
};

int cmd_predict(const Global &g, const PredictArgs &a)
{
    const PlvmModel model = model_from_json(io::read_json_file(a.model));
    const Dataset data = read_dataset_csv(a.data);
    if (data.dim() != model.obs_dim())
    {
        throw ConfigError("predict: data has " + std::to_string(data.dim()) + " columns, model observes " +
                          std::to_string(model.obs_dim()));
    }
    std::vector<std::size_t> targets = parse_columns(a.target_cols);
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    for (std::size_t c : targets)
    {
        if (c >= data.dim())
        {
            throw ConfigError("predict: target column " + std::to_string(c) + " is missing (data has " +
                              std::to_string(data.dim()) + " columns)");
        }
    }
    const ObservationMask mask = mask_from_targets(data.dim(), targets);

    RunConfig inner = EmConfig::default_inner();
    inner.num_particles = a.particles;
    inner.horizon = a.steps;
    inner.step_size = a.eps;
    inner.seed = g.seed;
    if (!g.bandwidth.empty())
    {
        inner.bandwidth = BandwidthPolicy::parse(g.bandwidth);
    }
    const Eigen::MatrixXd pred = predict_dataset(model, data, mask, inner);

    std::vector<double> truth_all;
    std::vector<double> pred_all;
    for (Eigen::Index i = 0; i < pred.rows(); ++i)
    {
        for (std::size_t t = 0; t < targets.size(); ++t)
        {
            truth_all.push_back(data.rows(i, static_cast<Eigen::Index>(targets[t])));
            pred_all.push_back(pred(i, static_cast<Eigen::Index>(t)));
        }
    }
    const MetricReport report = regression_metrics(truth_all, pred_all);

    io::ensure_directory(g.out);
    io::write_text_file(io::join(g.out, "predictions.csv"), csv([&](std::ostream &o) {
                            o << "row";
                            for (std::size_t c : targets)
                            {
                                o << ',' << data.columns[c] << "_true," << data.columns[c] << "_pred";
                            }
                            o << '\n';
                            for (Eigen::Index i = 0; i < pred.rows(); ++i)
                            {
                                o << i;
                                for (std::size_t t = 0; t < targets.size(); ++t)
                                {
                                    o << ',' << format_double(data.rows(i, static_cast<Eigen::Index>(targets[t])))
                                      << ',' << format_double(pred(i, static_cast<Eigen::Index>(t)));
                                }
                                o << '\n';
                            }
                        }));
    emit(g, "metrics.json", to_json(report));
    return kOk;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Particle-flow variational inference experiments"};
    app.require_subcommand(1);
    Global g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--bandwidth", g.bandwidth, "median | median-dist | median-log | fixed:<h>");

    Flow1dArgs f1;
    auto *flow = app.add_subcommand("flow1d", "1D particle trajectories with KSD and KDE output");
    flow->add_option("--target", f1.target, "gauss-3 | student | gmm-sym")->capture_default_str();
    flow->add_option("-M,--particles", f1.particles)->capture_default_str();
    flow->add_option("-T,--steps", f1.steps)->capture_default_str();
    flow->add_option("--eps", f1.eps, "Euler step size")->capture_default_str();
    flow->add_option("--stride", f1.stride, "Snapshot stride")->capture_default_str();
    flow->add_option("--drift", f1.drift, "ansatz | score+ansatz")->capture_default_str();
    flow->add_option("--grid-points", f1.grid)->capture_default_str();
    flow->add_option("--grid-lo", f1.grid_lo)->capture_default_str();
    flow->add_option("--grid-hi", f1.grid_hi)->capture_default_str();

    Approx2dArgs a2;
    auto *approx = app.add_subcommand("approx2d", "2D approximation with KSD and goodness-of-fit");
    approx->add_option("--target", a2.target, "mog | mor | tm")->capture_default_str();
    approx->add_option("--target-json", a2.target_json, "Target density JSON (overrides --target)");
    approx->add_option("--method", a2.method, "info | gauss | gmm")->capture_default_str();
    approx->add_option("-M,--particles", a2.particles)->capture_default_str();
    approx->add_option("-T,--steps", a2.steps)->capture_default_str();
    approx->add_option("--eps", a2.eps)->capture_default_str();
    approx->add_option("--drift", a2.drift, "ansatz | score+ansatz")->capture_default_str();
    approx->add_option("--alpha", a2.alpha)->capture_default_str();
    approx->add_option("-B,--bootstrap", a2.bootstrap)->capture_default_str();
    approx->add_option("-k,--components", a2.components, "GMM components")->capture_default_str();
    approx->add_option("--gmm-iters", a2.gmm_iters)->capture_default_str();

    GofArgs ga;
    auto *gof = app.add_subcommand("gof", "Goodness-of-fit test of a point cloud against a target");
    gof->add_option("--target", ga.target, "Preset name")->capture_default_str();
    gof->add_option("--target-json", ga.target_json, "Target density JSON (overrides --target)");
    gof->add_option("--points", ga.points, "Points CSV")->required();
    gof->add_option("--alpha", ga.alpha)->capture_default_str();
    gof->add_option("-B,--bootstrap", ga.bootstrap)->capture_default_str();

    EmArgs ea;
    auto *em = app.add_subcommand("em-train", "Train a latent variable model with particle EM");
    em->add_option("--data", ea.data, "Training CSV with a header row");
    em->add_option("--synthetic", ea.synthetic, "Generate data: linear | mlp");
    em->add_option("--n", ea.n, "Synthetic rows")->capture_default_str();
    em->add_option("--d-obs", ea.d_obs, "Synthetic observed dimension")->capture_default_str();
    em->add_option("--d-lv", ea.d_lv, "Latent dimension")->capture_default_str();
    em->add_option("--hidden", ea.hidden, "MLP hidden width")->capture_default_str();
    em->add_option("--noise", ea.noise, "Synthetic noise scale")->capture_default_str();
    em->add_option("--decoder", ea.decoder, "linear | mlp")->capture_default_str();
    em->add_option("--epochs", ea.epochs)->capture_default_str();
    em->add_option("--rate", ea.rate, "M-step learning rate")->capture_default_str();
    em->add_option("--m-iters", ea.m_iters, "M-step gradient iterations")->capture_default_str();
    em->add_option("--m-step", ea.m_step, "auto | gradient | closed-form")->capture_default_str();
    em->add_option("--sigma-floor", ea.sigma_floor)->capture_default_str();
    em->add_flag("--cold-start", ea.cold_start, "Restart particle clouds every epoch");
    em->add_option("-M,--particles", ea.particles, "Particles per datapoint")->capture_default_str();
    em->add_option("-T,--steps", ea.steps, "E-step horizon")->capture_default_str();
    em->add_option("--eps", ea.eps, "E-step step size")->capture_default_str();

    PredictArgs pa;
    auto *pred = app.add_subcommand("predict", "Predict held-out columns with a trained model");
    pred->add_option("--model", pa.model, "Model JSON")->required();
    pred->add_option("--data", pa.data, "Data CSV")->required();
    pred->add_option("--target-cols", pa.target_cols, "Comma-separated column indices to predict")->required();
    pred->add_option("-M,--particles", pa.particles)->capture_default_str();
    pred->add_option("-T,--steps", pa.steps)->capture_default_str();
    pred->add_option("--eps", pa.eps)->capture_default_str();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::Success &e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError &e)
    {
        app.exit(e);
        return kUsage;
    }

    try
    {
        parallel::set_thread_count(g.threads);
        if (flow->parsed())
        {
            return cmd_flow1d(g, f1);
        }
        if (approx->parsed())
        {
            return cmd_approx2d(g, a2);
        }
        if (gof->parsed())
        {
            return cmd_gof(g, ga);
        }
        if (em->parsed())
        {
            return cmd_em_train(g, ea);
        }
        return cmd_predict(g, pa);
    }
    catch (const DivergenceError &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kDiverged;
    }
    catch (const NumericError &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kDiverged;
    }
    catch (const IoError &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    }
    catch (const Error &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    catch (const nlohmann::json::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
}
