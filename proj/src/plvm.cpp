#include "infoflow/plvm.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "infoflow/inference.hpp"
#include "infoflow/parallel.hpp"

namespace infoflow {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

void require_finite(const Eigen::MatrixXd &m, const char *what)
{
    if (!m.allFinite())
    {
        throw ModelError(std::string("PlvmModel: ") + what + " has non-finite entries");
    }
}

void check_obs(const PlvmModel &m, std::span<const double> x, std::span<const double> z)
{
    if (x.size() != m.obs_dim() || z.size() != m.latent_dim())
    {
        throw InputError("plvm: expected x of size " + std::to_string(m.obs_dim()) + " and z of size " +
                         std::to_string(m.latent_dim()));
    }
}

void check_mask(const PlvmModel &m, const ObservationMask *mask)
{
    if (mask != nullptr && mask->size() != m.obs_dim())
    {
        throw InputError("plvm: mask has " + std::to_string(mask->size()) + " entries, model observes " +
                         std::to_string(m.obs_dim()));
    }
}

// Scratch for one forward pass; hidden holds tanh activations (MLP only).
struct Forward
{
    std::vector<double> hidden;
    std::vector<double> resid;
    double sq = 0.0;
    std::size_t observed = 0;
};

// resid = x - decode(z) on observed dimensions, 0 elsewhere.
void forward(const PlvmModel &m, std::span<const double> x, std::span<const double> z, const ObservationMask *mask,
             Forward &f)
{
    const std::size_t n_obs = m.obs_dim();
    const std::size_t n_lv = m.latent_dim();
    f.resid.assign(n_obs, 0.0);
    f.sq = 0.0;
    f.observed = 0;
    if (const auto *lin = std::get_if<LinearDecoder>(&m.decoder()))
    {
        for (std::size_t k = 0; k < n_obs; ++k)
        {
            if (mask != nullptr && !(*mask)[k])
            {
                continue;
            }
            double pred = lin->b[k];
            for (std::size_t d = 0; d < n_lv; ++d)
            {
                pred += lin->w(k, d) * z[d];
            }
            f.resid[k] = x[k] - pred;
        }
    }
    else
    {
        const auto &mlp = std::get<MlpDecoder>(m.decoder());
        const auto hid = static_cast<std::size_t>(mlp.b1.size());
        f.hidden.resize(hid);
        for (std::size_t j = 0; j < hid; ++j)
        {
            double a = mlp.b1[j];
            for (std::size_t d = 0; d < n_lv; ++d)
            {
                a += mlp.w1(j, d) * z[d];
            }
            f.hidden[j] = std::tanh(a);
        }
        for (std::size_t k = 0; k < n_obs; ++k)
        {
            if (mask != nullptr && !(*mask)[k])
            {
                continue;
            }
            double pred = mlp.b2[k];
            for (std::size_t j = 0; j < hid; ++j)
            {
                pred += mlp.w2(k, j) * f.hidden[j];
            }
            f.resid[k] = x[k] - pred;
        }
    }
    for (std::size_t k = 0; k < n_obs; ++k)
    {
        if (mask == nullptr || (*mask)[k])
        {
            f.sq += f.resid[k] * f.resid[k];
            ++f.observed;
        }
    }
}

double loglik_from(const Forward &f, double sigma)
{
    const auto n = static_cast<double>(f.observed);
    return -0.5 * n * kLog2Pi - n * std::log(sigma) - 0.5 * f.sq / (sigma * sigma);
}

// out = grad_z loglik given a completed forward pass.
void latent_gradient(const PlvmModel &m, std::span<const double> z, const Forward &f, std::span<double> out,
                     std::vector<double> &scratch)
{
    const double inv_var = 1.0 / (m.sigma() * m.sigma());
    const std::size_t n_obs = m.obs_dim();
    const std::size_t n_lv = m.latent_dim();
    (void)z;
    for (std::size_t d = 0; d < n_lv; ++d)
    {
        out[d] = 0.0;
    }
    if (const auto *lin = std::get_if<LinearDecoder>(&m.decoder()))
    {
        for (std::size_t d = 0; d < n_lv; ++d)
        {
            double acc = 0.0;
            for (std::size_t k = 0; k < n_obs; ++k)
            {
                acc += lin->w(k, d) * f.resid[k];
            }
            out[d] = acc * inv_var;
        }
        return;
    }
    const auto &mlp = std::get<MlpDecoder>(m.decoder());
    const std::size_t hid = f.hidden.size();
    scratch.resize(hid);
    for (std::size_t j = 0; j < hid; ++j)
    {
        double gh = 0.0;
        for (std::size_t k = 0; k < n_obs; ++k)
        {
            gh += mlp.w2(k, j) * f.resid[k];
        }
        scratch[j] = gh * inv_var * (1.0 - f.hidden[j] * f.hidden[j]);
    }
    for (std::size_t d = 0; d < n_lv; ++d)
    {
        double acc = 0.0;
        for (std::size_t j = 0; j < hid; ++j)
        {
            acc += mlp.w1(j, d) * scratch[j];
        }
        out[d] = acc;
    }
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json &rows, const char *what)
{
    if (!rows.is_array() || rows.empty() || !rows[0].is_array())
    {
        throw ModelError(std::string("model JSON: ") + what + " must be a non-empty array of rows");
    }
    const auto r = static_cast<Eigen::Index>(rows.size());
    const auto c = static_cast<Eigen::Index>(rows[0].size());
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
    {
        const auto &row = rows[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c)
        {
            throw ModelError(std::string("model JSON: ") + what + " rows differ in length");
        }
        for (Eigen::Index j = 0; j < c; ++j)
        {
            m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
        }
    }
    return m;
}

Eigen::VectorXd vector_from_json(const nlohmann::json &v, const char *what)
{
    if (!v.is_array())
    {
        throw ModelError(std::string("model JSON: ") + what + " must be an array");
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i)
    {
        out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd &m)
{
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
    {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
        {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

nlohmann::json vector_to_json(const Eigen::VectorXd &v)
{
    return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

// Appends a matrix row-major to theta starting at pos.
void flatten(const Eigen::MatrixXd &m, Eigen::VectorXd &theta, Eigen::Index &pos)
{
    for (Eigen::Index i = 0; i < m.rows(); ++i)
    {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
        {
            theta[pos++] = m(i, j);
        }
    }
}

void unflatten(const Eigen::VectorXd &theta, Eigen::Index &pos, Eigen::MatrixXd &m)
{
    for (Eigen::Index i = 0; i < m.rows(); ++i)
    {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
        {
            m(i, j) = theta[pos++];
        }
    }
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng &rng)
{
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
    {
        for (Eigen::Index j = 0; j < cols; ++j)
        {
            m(i, j) = scale * rng.normal();
        }
    }
    return m;
}

SyntheticData synthesize(PlvmModel generator, std::size_t n, double noise, Rng &rng)
{
    const std::size_t d_lv = generator.latent_dim();
    const std::size_t d_obs = generator.obs_dim();
    Eigen::MatrixXd latents(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d_lv));
    Dataset data;
    data.rows.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d_obs));
    Point z(d_lv);
    for (std::size_t i = 0; i < n; ++i)
    {
        for (std::size_t d = 0; d < d_lv; ++d)
        {
            z[d] = rng.normal();
            latents(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = z[d];
        }
        const Eigen::VectorXd x = generator.decode(z);
        for (std::size_t k = 0; k < d_obs; ++k)
        {
            data.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = x[static_cast<Eigen::Index>(k)] +
                                                                                    noise * rng.normal();
        }
    }
    for (std::size_t k = 0; k < d_obs; ++k)
    {
        data.columns.push_back("x" + std::to_string(k));
    }
    return SyntheticData{std::move(data), std::move(generator), noise, std::move(latents)};
}

void validate_prediction_mask(const PlvmModel &m, const ObservationMask &mask)
{
    check_mask(m, &mask);
    std::size_t seen = 0;
    for (bool b : mask)
    {
        seen += b ? 1 : 0;
    }
    if (seen == 0 || seen == mask.size())
    {
        throw InputError("predict: mask must observe at least one dimension and leave at least one unobserved");
    }
}

} // namespace

PlvmModel::PlvmModel(Decoder decoder, double sigma) : decoder_(std::move(decoder)), sigma_(sigma)
{
    if (!(sigma_ > 0.0) || !std::isfinite(sigma_))
    {
        throw ModelError("PlvmModel: sigma must be finite and > 0");
    }
    if (const auto *lin = std::get_if<LinearDecoder>(&decoder_))
    {
        if (lin->w.rows() < 1 || lin->w.cols() < 1 || lin->b.size() != lin->w.rows())
        {
            throw ModelError("PlvmModel: linear decoder needs W (D_obs x D_lv) and b (D_obs)");
        }
        require_finite(lin->w, "W");
        require_finite(lin->b, "b");
        obs_dim_ = static_cast<std::size_t>(lin->w.rows());
        latent_dim_ = static_cast<std::size_t>(lin->w.cols());
    }
    else
    {
        const auto &mlp = std::get<MlpDecoder>(decoder_);
        if (mlp.w1.rows() < 1 || mlp.w1.cols() < 1 || mlp.b1.size() != mlp.w1.rows() ||
            mlp.w2.cols() != mlp.w1.rows() || mlp.w2.rows() < 1 || mlp.b2.size() != mlp.w2.rows())
        {
            throw ModelError("PlvmModel: MLP decoder needs W1 (H x D_lv), b1 (H), W2 (D_obs x H), b2 (D_obs)");
        }
        require_finite(mlp.w1, "W1");
        require_finite(mlp.b1, "b1");
        require_finite(mlp.w2, "W2");
        require_finite(mlp.b2, "b2");
        obs_dim_ = static_cast<std::size_t>(mlp.w2.rows());
        latent_dim_ = static_cast<std::size_t>(mlp.w1.cols());
    }
}

std::size_t PlvmModel::num_parameters() const
{
    if (const auto *lin = std::get_if<LinearDecoder>(&decoder_))
    {
        return static_cast<std::size_t>(lin->w.size() + lin->b.size()) + 1;
    }
    const auto &mlp = std::get<MlpDecoder>(decoder_);
    return static_cast<std::size_t>(mlp.w1.size() + mlp.b1.size() + mlp.w2.size() + mlp.b2.size()) + 1;
}

Eigen::VectorXd PlvmModel::decode(std::span<const double> z) const
{
    if (z.size() != latent_dim_)
    {
        throw InputError("decode: expected a latent of size " + std::to_string(latent_dim_));
    }
    const auto zv = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
    if (const auto *lin = std::get_if<LinearDecoder>(&decoder_))
    {
        return lin->w * zv + lin->b;
    }
    const auto &mlp = std::get<MlpDecoder>(decoder_);
    const Eigen::VectorXd h = (mlp.w1 * zv + mlp.b1).array().tanh().matrix();
    return mlp.w2 * h + mlp.b2;
}

Eigen::VectorXd PlvmModel::parameters() const
{
    Eigen::VectorXd theta(static_cast<Eigen::Index>(num_parameters()));
    Eigen::Index pos = 0;
    if (const auto *lin = std::get_if<LinearDecoder>(&decoder_))
    {
        flatten(lin->w, theta, pos);
        flatten(lin->b, theta, pos);
    }
    else
    {
        const auto &mlp = std::get<MlpDecoder>(decoder_);
        flatten(mlp.w1, theta, pos);
        flatten(mlp.b1, theta, pos);
        flatten(mlp.w2, theta, pos);
        flatten(mlp.b2, theta, pos);
    }
    theta[pos] = std::log(sigma_);
    return theta;
}

PlvmModel PlvmModel::with_parameters(const Eigen::VectorXd &theta) const
{
    if (static_cast<std::size_t>(theta.size()) != num_parameters())
    {
        throw ModelError("with_parameters: expected " + std::to_string(num_parameters()) + " values");
    }
    Eigen::Index pos = 0;
    Decoder next = decoder_;
    if (auto *lin = std::get_if<LinearDecoder>(&next))
    {
        unflatten(theta, pos, lin->w);
        Eigen::MatrixXd b = lin->b;
        unflatten(theta, pos, b);
        lin->b = b;
    }
    else
    {
        auto &mlp = std::get<MlpDecoder>(next);
        unflatten(theta, pos, mlp.w1);
        Eigen::MatrixXd b1 = mlp.b1;
        unflatten(theta, pos, b1);
        mlp.b1 = b1;
        unflatten(theta, pos, mlp.w2);
        Eigen::MatrixXd b2 = mlp.b2;
        unflatten(theta, pos, b2);
        mlp.b2 = b2;
    }
    return PlvmModel(std::move(next), std::exp(theta[pos]));
}

nlohmann::json to_json(const PlvmModel &m)
{
    nlohmann::json doc;
    doc["decoder"] = m.kind();
    doc["sigma"] = m.sigma();
    if (const auto *lin = std::get_if<LinearDecoder>(&m.decoder()))
    {
        doc["W"] = matrix_to_json(lin->w);
        doc["b"] = vector_to_json(lin->b);
    }
    else
    {
        const auto &mlp = std::get<MlpDecoder>(m.decoder());
        doc["W1"] = matrix_to_json(mlp.w1);
        doc["b1"] = vector_to_json(mlp.b1);
        doc["W2"] = matrix_to_json(mlp.w2);
        doc["b2"] = vector_to_json(mlp.b2);
    }
    return doc;
}

PlvmModel model_from_json(const nlohmann::json &doc)
{
    try
    {
        const std::string kind = doc.at("decoder").get<std::string>();
        const double sigma = doc.at("sigma").get<double>();
        if (kind == "linear")
        {
            return PlvmModel(LinearDecoder{matrix_from_json(doc.at("W"), "W"), vector_from_json(doc.at("b"), "b")},
                             sigma);
        }
        if (kind == "mlp")
        {
            return PlvmModel(MlpDecoder{matrix_from_json(doc.at("W1"), "W1"), vector_from_json(doc.at("b1"), "b1"),
                                        matrix_from_json(doc.at("W2"), "W2"), vector_from_json(doc.at("b2"), "b2")},
                             sigma);
        }
        throw ModelError("model JSON: unknown decoder '" + kind + "' (expected linear|mlp)");
    }
    catch (const nlohmann::json::exception &e)
    {
        throw ModelError(std::string("model JSON: ") + e.what());
    }
}

double loglik(const PlvmModel &m, std::span<const double> x, std::span<const double> z, const ObservationMask *mask)
{
    check_obs(m, x, z);
    check_mask(m, mask);
    Forward f;
    forward(m, x, z, mask, f);
    return loglik_from(f, m.sigma());
}

Point posterior_score(const PlvmModel &m, std::span<const double> x, std::span<const double> z,
                      const ObservationMask *mask)
{
    check_obs(m, x, z);
    check_mask(m, mask);
    Forward f;
    std::vector<double> scratch;
    forward(m, x, z, mask, f);
    Point out(m.latent_dim());
    latent_gradient(m, z, f, out, scratch);
    for (std::size_t d = 0; d < out.size(); ++d)
    {
        out[d] -= z[d];
    }
    return out;
}

Eigen::VectorXd grad_theta_loglik(const PlvmModel &m, std::span<const double> x, std::span<const double> z)
{
    check_obs(m, x, z);
    Forward f;
    forward(m, x, z, nullptr, f);
    const double inv_var = 1.0 / (m.sigma() * m.sigma());
    const auto n_obs = static_cast<Eigen::Index>(m.obs_dim());
    const auto n_lv = static_cast<Eigen::Index>(m.latent_dim());
    Eigen::VectorXd g(static_cast<Eigen::Index>(m.num_parameters()));
    Eigen::Index pos = 0;
    Eigen::VectorXd gout(n_obs);
    for (Eigen::Index k = 0; k < n_obs; ++k)
    {
        gout[k] = f.resid[static_cast<std::size_t>(k)] * inv_var;
    }
    if (m.is_linear())
    {
        for (Eigen::Index k = 0; k < n_obs; ++k)
        {
            for (Eigen::Index d = 0; d < n_lv; ++d)
            {
                g[pos++] = gout[k] * z[static_cast<std::size_t>(d)];
            }
        }
        for (Eigen::Index k = 0; k < n_obs; ++k)
        {
            g[pos++] = gout[k];
        }
    }
    else
    {
        const auto &mlp = std::get<MlpDecoder>(m.decoder());
        const Eigen::Index hid = mlp.b1.size();
        Eigen::VectorXd ga(hid);
        for (Eigen::Index j = 0; j < hid; ++j)
        {
            const double h = f.hidden[static_cast<std::size_t>(j)];
            ga[j] = mlp.w2.col(j).dot(gout) * (1.0 - h * h);
        }
        for (Eigen::Index j = 0; j < hid; ++j)
        {
            for (Eigen::Index d = 0; d < n_lv; ++d)
            {
                g[pos++] = ga[j] * z[static_cast<std::size_t>(d)];
            }
        }
        for (Eigen::Index j = 0; j < hid; ++j)
        {
            g[pos++] = ga[j];
        }
        for (Eigen::Index k = 0; k < n_obs; ++k)
        {
            for (Eigen::Index j = 0; j < hid; ++j)
            {
                g[pos++] = gout[k] * f.hidden[static_cast<std::size_t>(j)];
            }
        }
        for (Eigen::Index k = 0; k < n_obs; ++k)
        {
            g[pos++] = gout[k];
        }
    }
    g[pos] = -static_cast<double>(f.observed) + f.sq * inv_var;
    return g;
}

PlvmPosterior::PlvmPosterior(const PlvmModel &model, Point x, std::optional<ObservationMask> mask)
    : model_(model), x_(std::move(x)), mask_(std::move(mask))
{
    if (x_.size() != model_.obs_dim())
    {
        throw InputError("PlvmPosterior: observation has size " + std::to_string(x_.size()) + ", model expects " +
                         std::to_string(model_.obs_dim()));
    }
    check_mask(model_, mask_ ? &*mask_ : nullptr);
}

double PlvmPosterior::log_density(std::span<const double> z) const
{
    double prior = 0.0;
    for (double v : z)
    {
        prior -= 0.5 * v * v;
    }
    return prior + loglik(model_, x_, z, mask_ ? &*mask_ : nullptr);
}

void PlvmPosterior::score(std::span<const double> z, std::span<double> out) const
{
    thread_local Forward f;
    thread_local std::vector<double> scratch;
    forward(model_, x_, z, mask_ ? &*mask_ : nullptr, f);
    latent_gradient(model_, z, f, out, scratch);
    for (std::size_t d = 0; d < z.size(); ++d)
    {
        out[d] -= z[d];
    }
}

Point Dataset::row(std::size_t n) const
{
    Point p(dim());
    for (std::size_t k = 0; k < p.size(); ++k)
    {
        p[k] = rows(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    }
    return p;
}

Dataset read_dataset_csv(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw IoError("cannot open data file '" + path + "'");
    }
    auto split = [](const std::string &line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
        {
            if (!cell.empty() && cell.back() == '\r')
            {
                cell.pop_back();
            }
            cells.push_back(cell);
        }
        return cells;
    };
    std::string line;
    if (!std::getline(in, line))
    {
        throw IoError("data file '" + path + "' is empty");
    }
    Dataset data;
    data.columns = split(line);
    std::vector<double> values;
    std::size_t n = 0;
    while (std::getline(in, line))
    {
        if (line.empty() || line == "\r")
        {
            continue;
        }
        const auto cells = split(line);
        if (cells.size() != data.columns.size())
        {
            throw IoError("data file '" + path + "': row " + std::to_string(n + 1) + " has " +
                          std::to_string(cells.size()) + " cells, header has " + std::to_string(data.columns.size()));
        }
        for (const auto &c : cells)
        {
            double v = 0.0;
            const char *first = c.data();
            while (first != c.data() + c.size() && *first == ' ')
            {
                ++first;
            }
            const auto res = std::from_chars(first, c.data() + c.size(), v);
            if (res.ec != std::errc() || !std::isfinite(v))
            {
                throw IoError("data file '" + path + "': bad value '" + c + "' in row " + std::to_string(n + 1));
            }
            values.push_back(v);
        }
        ++n;
    }
    if (n == 0)
    {
        throw IoError("data file '" + path + "' has no data rows");
    }
    const auto d = static_cast<Eigen::Index>(data.columns.size());
    data.rows.resize(static_cast<Eigen::Index>(n), d);
    for (std::size_t i = 0; i < n; ++i)
    {
        for (Eigen::Index k = 0; k < d; ++k)
        {
            data.rows(static_cast<Eigen::Index>(i), k) = values[i * static_cast<std::size_t>(d) +
                                                                static_cast<std::size_t>(k)];
        }
    }
    return data;
}

void write_dataset_csv(const Dataset &data, std::ostream &out)
{
    for (std::size_t k = 0; k < data.columns.size(); ++k)
    {
        out << (k ? "," : "") << data.columns[k];
    }
    out << '\n';
    for (Eigen::Index i = 0; i < data.rows.rows(); ++i)
    {
        for (Eigen::Index k = 0; k < data.rows.cols(); ++k)
        {
            out << (k ? "," : "") << format_double(data.rows(i, k));
        }
        out << '\n';
    }
}

std::string to_string(MStepMode mode)
{
    switch (mode)
    {
    case MStepMode::kGradient:
        return "gradient";
    case MStepMode::kClosedForm:
        return "closed-form";
    default:
        return "auto";
    }
}

MStepMode parse_m_step_mode(const std::string &text)
{
    if (text == "auto")
    {
        return MStepMode::kAuto;
    }
    if (text == "gradient")
    {
        return MStepMode::kGradient;
    }
    if (text == "closed-form")
    {
        return MStepMode::kClosedForm;
    }
    throw ConfigError("m-step mode: expected auto|gradient|closed-form, got '" + text + "'");
}

RunConfig EmConfig::default_inner()
{
    RunConfig c;
    c.num_particles = 32;
    c.horizon = 300;
    c.step_size = 0.05;
    c.snapshot_stride = 0;
    c.record_ksd = false;
    c.record_particles = false;
    return c;
}

void EmConfig::validate() const
{
    if (epochs < 1)
    {
        throw ConfigError("EmConfig: need at least one epoch");
    }
    if (!(m_step_rate >= 0.0) || !std::isfinite(m_step_rate))
    {
        throw ConfigError("EmConfig: M-step rate must be finite and >= 0");
    }
    if (!(sigma_floor > 0.0) || !std::isfinite(sigma_floor))
    {
        throw ConfigError("EmConfig: sigma floor must be finite and > 0");
    }
    inner.validate();
}

double stable_step_size(const PlvmModel &m)
{
    auto spectral = [](const Eigen::MatrixXd &a) { return Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()[0]; };
    double jac = 0.0;
    if (const auto *lin = std::get_if<LinearDecoder>(&m.decoder()))
    {
        jac = spectral(lin->w);
    }
    else
    {
        const auto &mlp = std::get<MlpDecoder>(m.decoder());
        jac = spectral(mlp.w2) * spectral(mlp.w1);
    }
    return 1.0 / (1.0 + jac * jac / (m.sigma() * m.sigma()));
}

ParticleSet e_step(const PlvmModel &m, std::span<const double> x, const RunConfig &inner,
                   const std::optional<ParticleSet> &init, const ObservationMask *mask)
{
    RunConfig cfg = inner;
    cfg.snapshot_stride = 0;
    cfg.validate();
    cfg.step_size = std::min(cfg.step_size, stable_step_size(m));
    const PlvmPosterior posterior(m, Point(x.begin(), x.end()),
                                  mask ? std::optional<ObservationMask>(*mask) : std::nullopt);
    Rng rng(cfg.seed);
    const ParticleSet start = init ? *init : init_particles(cfg.num_particles, m.latent_dim(), rng);
    RunRecord rec = run_info(cfg, posterior, start);
    return *rec.final_particles();
}

double expected_loglik(const PlvmModel &m, const std::vector<ObservationCloud> &pairs)
{
    if (pairs.empty())
    {
        throw InputError("expected_loglik: no observations");
    }
    double total = 0.0;
    for (const auto &[x, cloud] : pairs)
    {
        double sum = 0.0;
        for (std::size_t i = 0; i < cloud.size(); ++i)
        {
            sum += loglik(m, x, cloud[i]);
        }
        total += sum / static_cast<double>(cloud.size());
    }
    return total / static_cast<double>(pairs.size());
}

PlvmModel m_step(const PlvmModel &m, const std::vector<ObservationCloud> &pairs, const MStepOptions &options)
{
    if (pairs.empty())
    {
        throw InputError("m_step: no observations");
    }
    if (!(options.rate >= 0.0) || !std::isfinite(options.rate))
    {
        throw ConfigError("m_step: rate must be finite and >= 0");
    }
    for (const auto &[x, cloud] : pairs)
    {
        if (x.size() != m.obs_dim() || cloud.dim() != m.latent_dim())
        {
            throw InputError("m_step: observation or cloud shape does not match the model");
        }
    }
    const double log_floor = std::log(options.sigma_floor);
    const bool closed_form = options.mode == MStepMode::kClosedForm ||
                             (options.mode == MStepMode::kAuto && m.is_linear());

    if (closed_form)
    {
        if (!m.is_linear())
        {
            throw ConfigError("m_step: the closed-form update needs a linear decoder");
        }
        const auto n_obs = static_cast<Eigen::Index>(m.obs_dim());
        const auto n_lv = static_cast<Eigen::Index>(m.latent_dim());
        // Normal equations for [W b] with every particle weighted 1/M within its observation.
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_obs, n_lv + 1);
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n_lv + 1, n_lv + 1);
        Eigen::VectorXd za(n_lv + 1);
        for (const auto &[x, cloud] : pairs)
        {
            const auto xv = Eigen::Map<const Eigen::VectorXd>(x.data(), n_obs);
            const double wgt = 1.0 / static_cast<double>(cloud.size());
            for (std::size_t i = 0; i < cloud.size(); ++i)
            {
                for (Eigen::Index d = 0; d < n_lv; ++d)
                {
                    za[d] = cloud[i][static_cast<std::size_t>(d)];
                }
                za[n_lv] = 1.0;
                a.noalias() += wgt * xv * za.transpose();
                b.noalias() += wgt * za * za.transpose();
            }
        }
        const Eigen::MatrixXd wb = b.colPivHouseholderQr().solve(a.transpose()).transpose();
        if (!wb.allFinite())
        {
            throw NumericError("m_step: closed-form solve produced non-finite parameters");
        }
        LinearDecoder dec{wb.leftCols(n_lv), wb.col(n_lv)};
        double sq = 0.0;
        for (const auto &[x, cloud] : pairs)
        {
            const auto xv = Eigen::Map<const Eigen::VectorXd>(x.data(), n_obs);
            double s = 0.0;
            for (std::size_t i = 0; i < cloud.size(); ++i)
            {
                const auto zv = Eigen::Map<const Eigen::VectorXd>(cloud[i].data(), n_lv);
                s += (xv - dec.w * zv - dec.b).squaredNorm();
            }
            sq += s / static_cast<double>(cloud.size());
        }
        const double var = sq / (static_cast<double>(pairs.size()) * static_cast<double>(n_obs));
        const double sigma = std::max(std::sqrt(var), options.sigma_floor);
        return PlvmModel(std::move(dec), sigma);
    }

    if (options.rate == 0.0 || options.iters == 0)
    {
        return m;
    }
    Eigen::VectorXd theta = m.parameters();
    PlvmModel cur = m;
    for (std::size_t it = 0; it < options.iters; ++it)
    {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
        for (const auto &[x, cloud] : pairs)
        {
            Eigen::VectorXd gx = Eigen::VectorXd::Zero(theta.size());
            for (std::size_t i = 0; i < cloud.size(); ++i)
            {
                gx += grad_theta_loglik(cur, x, cloud[i]);
            }
            g += gx / static_cast<double>(cloud.size());
        }
        g /= static_cast<double>(pairs.size());
        theta += options.rate * g;
        theta[theta.size() - 1] = std::max(theta[theta.size() - 1], log_floor);
        if (!theta.allFinite())
        {
            throw NumericError("m_step: gradient ascent produced non-finite parameters at iteration " +
                               std::to_string(it));
        }
        cur = cur.with_parameters(theta);
    }
    return cur;
}

EmResult run_info_em(const PlvmModel &m0, const Dataset &data, const EmConfig &cfg)
{
    cfg.validate();
    if (data.size() == 0 || data.dim() != m0.obs_dim())
    {
        throw InputError("run_info_em: data has " + std::to_string(data.dim()) + " columns, model observes " +
                         std::to_string(m0.obs_dim()));
    }
    const std::size_t n = data.size();
    std::vector<Point> xs(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        xs[i] = data.row(i);
    }

    PlvmModel model = m0;
    std::vector<std::optional<ParticleSet>> clouds(n);
    RunRecord record;
    std::vector<double> monitor;
    const MStepOptions opts{cfg.m_step_mode, cfg.m_step_rate, cfg.m_step_iters, cfg.sigma_floor};

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch)
    {
        std::vector<std::optional<ParticleSet>> next(n);
        parallel::parallel_for(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i)
            {
                RunConfig inner = cfg.inner;
                inner.seed = cfg.inner.seed ^ static_cast<std::uint64_t>(i);
                const std::optional<ParticleSet> init =
                    cfg.warm_start && clouds[i] ? clouds[i] : std::optional<ParticleSet>();
                try
                {
                    next[i] = e_step(model, xs[i], inner, init);
                }
                catch (const DivergenceError &e)
                {
                    throw DivergenceError(e.step(), "epoch " + std::to_string(epoch) + ", datapoint " +
                                                        std::to_string(i) + ": " + e.what());
                }
            }
        });
        clouds = std::move(next);

        std::vector<ObservationCloud> pairs;
        pairs.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            pairs.emplace_back(xs[i], *clouds[i]);
        }
        model = m_step(model, pairs, opts);
        const double value = expected_loglik(model, pairs);
        if (!std::isfinite(value))
        {
            throw NumericError("run_info_em: non-finite expected log-likelihood at epoch " + std::to_string(epoch));
        }
        monitor.push_back(value);
        Snapshot snap;
        snap.t = epoch;
        snap.scalars.emplace_back(ScalarName::kLoglik, value);
        record.append(std::move(snap));
    }

    std::vector<ParticleSet> final_clouds;
    final_clouds.reserve(n);
    for (auto &c : clouds)
    {
        final_clouds.push_back(std::move(*c));
    }
    return EmResult{std::move(model), std::move(record), std::move(monitor), std::move(final_clouds)};
}

Eigen::VectorXd predict(const PlvmModel &m, std::span<const double> x_partial, const ObservationMask &mask,
                        const RunConfig &inner)
{
    validate_prediction_mask(m, mask);
    if (x_partial.size() != m.obs_dim())
    {
        throw InputError("predict: observation has size " + std::to_string(x_partial.size()) + ", model expects " +
                         std::to_string(m.obs_dim()));
    }
    // Unobserved entries may hold anything, including NaN placeholders.
    Point x(x_partial.begin(), x_partial.end());
    for (std::size_t k = 0; k < x.size(); ++k)
    {
        if (!mask[k])
        {
            x[k] = 0.0;
        }
    }
    const ParticleSet cloud = e_step(m, x, inner, std::nullopt, &mask);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.obs_dim()));
    for (std::size_t i = 0; i < cloud.size(); ++i)
    {
        mean += m.decode(cloud[i]);
    }
    mean /= static_cast<double>(cloud.size());
    Eigen::VectorXd out(static_cast<Eigen::Index>(std::count(mask.begin(), mask.end(), false)));
    Eigen::Index pos = 0;
    for (std::size_t k = 0; k < mask.size(); ++k)
    {
        if (!mask[k])
        {
            out[pos++] = mean[static_cast<Eigen::Index>(k)];
        }
    }
    return out;
}

Eigen::MatrixXd predict_dataset(const PlvmModel &m, const Dataset &data, const ObservationMask &mask,
                                const RunConfig &inner)
{
    validate_prediction_mask(m, mask);
    if (data.dim() != m.obs_dim())
    {
        throw InputError("predict: data has " + std::to_string(data.dim()) + " columns, model observes " +
                         std::to_string(m.obs_dim()));
    }
    const auto targets = static_cast<Eigen::Index>(std::count(mask.begin(), mask.end(), false));
    Eigen::MatrixXd out(static_cast<Eigen::Index>(data.size()), targets);
    parallel::parallel_for(data.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
        {
            RunConfig cfg = inner;
            cfg.seed = inner.seed ^ static_cast<std::uint64_t>(i);
            out.row(static_cast<Eigen::Index>(i)) = predict(m, data.row(i), mask, cfg).transpose();
        }
    });
    return out;
}

ObservationMask mask_from_targets(std::size_t dim, const std::vector<std::size_t> &target_cols)
{
    ObservationMask mask(dim, true);
    for (std::size_t c : target_cols)
    {
        if (c >= dim)
        {
            throw InputError("target column " + std::to_string(c) + " is out of range for " + std::to_string(dim) +
                             " columns");
        }
        mask[c] = false;
    }
    return mask;
}

SyntheticData synthetic_linear(std::size_t n, std::size_t d_obs, std::size_t d_lv, double noise, Rng &rng)
{
    if (n < 1 || d_obs < 1 || d_lv < 1 || !(noise >= 0.0))
    {
        throw ConfigError("synthetic_linear: need n, D_obs, D_lv >= 1 and noise >= 0");
    }
    const auto ro = static_cast<Eigen::Index>(d_obs);
    const auto rl = static_cast<Eigen::Index>(d_lv);
    LinearDecoder dec{gaussian_matrix(ro, rl, 1.0 / std::sqrt(static_cast<double>(d_obs)), rng),
                      gaussian_matrix(ro, 1, 1.0, rng)};
    // The generator keeps a tiny positive sigma when the data are noiseless.
    PlvmModel gen(std::move(dec), noise > 0.0 ? noise : 1e-12);
    return synthesize(std::move(gen), n, noise, rng);
}

SyntheticData synthetic_mlp(std::size_t n, std::size_t d_obs, std::size_t d_lv, std::size_t hidden, double noise,
                            Rng &rng)
{
    if (n < 1 || d_obs < 1 || d_lv < 1 || hidden < 1 || !(noise >= 0.0))
    {
        throw ConfigError("synthetic_mlp: need n, D_obs, D_lv, H >= 1 and noise >= 0");
    }
    const auto ro = static_cast<Eigen::Index>(d_obs);
    const auto rl = static_cast<Eigen::Index>(d_lv);
    const auto rh = static_cast<Eigen::Index>(hidden);
    MlpDecoder dec{gaussian_matrix(rh, rl, 1.5 / std::sqrt(static_cast<double>(d_lv)), rng),
                   gaussian_matrix(rh, 1, 0.5, rng),
                   gaussian_matrix(ro, rh, 1.0 / std::sqrt(static_cast<double>(hidden)), rng),
                   gaussian_matrix(ro, 1, 1.0, rng)};
    PlvmModel gen(std::move(dec), noise > 0.0 ? noise : 1e-12);
    return synthesize(std::move(gen), n, noise, rng);
}

nlohmann::json to_json(const SyntheticData &s)
{
    nlohmann::json doc;
    doc["generator"] = to_json(s.generator);
    doc["noise"] = s.noise;
    doc["n"] = s.data.size();
    return doc;
}

PlvmModel random_model(const std::string &kind, std::size_t d_obs, std::size_t d_lv, std::size_t hidden, Rng &rng)
{
    if (d_obs < 1 || d_lv < 1)
    {
        throw ConfigError("random_model: dimensions must be >= 1");
    }
    const auto ro = static_cast<Eigen::Index>(d_obs);
    const auto rl = static_cast<Eigen::Index>(d_lv);
    if (kind == "linear")
    {
        return PlvmModel(LinearDecoder{gaussian_matrix(ro, rl, 1.0 / std::sqrt(static_cast<double>(d_lv)), rng),
                                       Eigen::VectorXd::Zero(ro)},
                         1.0);
    }
    if (kind == "mlp")
    {
        if (hidden < 1)
        {
            throw ConfigError("random_model: hidden width must be >= 1");
        }
        const auto rh = static_cast<Eigen::Index>(hidden);
        return PlvmModel(MlpDecoder{gaussian_matrix(rh, rl, 1.0 / std::sqrt(static_cast<double>(d_lv)), rng),
                                    Eigen::VectorXd::Zero(rh),
                                    gaussian_matrix(ro, rh, 1.0 / std::sqrt(static_cast<double>(hidden)), rng),
                                    Eigen::VectorXd::Zero(ro)},
                         1.0);
    }
    throw ConfigError("decoder: expected linear|mlp, got '" + kind + "'");
}

} // namespace infoflow
