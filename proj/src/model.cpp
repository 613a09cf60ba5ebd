#include "speedcp/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace speedcp {

MuPredictor fit_mu(const std::vector<LatentPoint>& points, const Eigen::VectorXd& y,
                   const KernelConfig& cfg, double ridge) {
    const int n = static_cast<int>(points.size());
    if (n < 1) throw InvalidInputError("fit_mu: no training points");
    if (y.size() != n) throw InvalidInputError("fit_mu: points and y length mismatch");
    if (!(ridge > 0.0)) throw InvalidInputError("fit_mu: ridge must be positive");

    MuPredictor mu;
    mu.points = points;
    mu.config = cfg;
    mu.ridge = ridge;
    mu.intercept = y.mean();
    Eigen::MatrixXd gram = kernel_matrix(points, cfg).entries;
    gram.diagonal().array() += ridge;
    Eigen::VectorXd centered = y.array() - mu.intercept;
    mu.weights = gram.ldlt().solve(centered);
    mu.fitted = true;
    return mu;
}

double predict_mu(const MuPredictor& mu, const LatentPoint& x) {
    if (!mu.fitted) throw InvalidInputError("predict_mu: predictor not fitted");
    return mu.intercept + kernel_row(mu.points, x, mu.config).dot(mu.weights);
}

CalibrationModel calibrate(const CalibrationInputs& calib, const std::vector<double>& gamma_grid,
                           int k_folds, std::uint64_t seed, int jobs) {
    CalibrationModel model;
    model.alpha = calib.alpha;
    model.seed = seed;
    model.hyper = select_hyperparams(calib, gamma_grid, k_folds, seed, 1e-4, jobs);
    model.kcfg = KernelConfig(model.hyper.gamma_hat, calib.metric, calib.clr_floor);
    model.lambda_hat = model.hyper.lambda_hat;
    model.points = calib.points;
    model.scores = calib.scores;
    model.phi = calib.phi;
    model.kernel = kernel_matrix(calib.points, model.kcfg).entries;

    ProblemData data(model.scores, model.phi, model.kernel, model.alpha);
    try {
        LambdaTrace trace = trace_lambda_path(data, model.lambda_hat, 0);
        model.fit = active_set_solve(data, model.lambda_hat, trace.at(model.lambda_hat).tag);
    } catch (const std::runtime_error&) {
        // Path failure at this lambda; solve cold from a quantile-split start.
        std::vector<int> order(data.n());
        for (int i = 0; i < data.n(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return data.scores(a) < data.scores(b); });
        int cut = std::min(data.n() - 1,
                           static_cast<int>(std::ceil((data.n() + 1) * (1.0 - data.alpha))) - 1);
        std::vector<SetTag> tag(data.n(), SetTag::Left);
        for (int r = cut; r < data.n(); ++r) tag[order[r]] = SetTag::Right;
        tag[order[cut]] = SetTag::Elbow;
        model.fit = active_set_solve(data, model.lambda_hat, tag);
    }
    return model;
}

namespace {

void put_bytes(std::ofstream& os, const void* p, std::size_t nbytes) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(nbytes));
}
void get_bytes(std::ifstream& is, void* p, std::size_t nbytes) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(nbytes));
    if (!is) throw InvalidInputError("load_model: truncated file");
}

void put_u64(std::ofstream& os, std::uint64_t v) { put_bytes(os, &v, 8); }
void put_f64(std::ofstream& os, double v) { put_bytes(os, &v, 8); }
std::uint64_t get_u64(std::ifstream& is) {
    std::uint64_t v;
    get_bytes(is, &v, 8);
    return v;
}
double get_f64(std::ifstream& is) {
    double v;
    get_bytes(is, &v, 8);
    return v;
}

void put_vec(std::ofstream& os, const Eigen::VectorXd& v) {
    put_u64(os, static_cast<std::uint64_t>(v.size()));
    put_bytes(os, v.data(), static_cast<std::size_t>(v.size()) * 8);
}
Eigen::VectorXd get_vec(std::ifstream& is) {
    auto n = static_cast<Eigen::Index>(get_u64(is));
    Eigen::VectorXd v(n);
    get_bytes(is, v.data(), static_cast<std::size_t>(n) * 8);
    return v;
}

void put_mat(std::ofstream& os, const Eigen::MatrixXd& m) {
    put_u64(os, static_cast<std::uint64_t>(m.rows()));
    put_u64(os, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(os, m(r, c));
}
Eigen::MatrixXd get_mat(std::ifstream& is) {
    auto r = static_cast<Eigen::Index>(get_u64(is));
    auto c = static_cast<Eigen::Index>(get_u64(is));
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = get_f64(is);
    return m;
}

void put_points(std::ofstream& os, const std::vector<LatentPoint>& pts) {
    put_u64(os, pts.size());
    if (pts.empty()) return;
    os.put(pts[0].space == Space::Simplex ? 1 : 0);
    put_u64(os, static_cast<std::uint64_t>(pts[0].dim()));
    for (const auto& p : pts)
        put_bytes(os, p.coords.data(), static_cast<std::size_t>(p.dim()) * 8);
}
std::vector<LatentPoint> get_points(std::ifstream& is) {
    auto n = get_u64(is);
    std::vector<LatentPoint> pts;
    if (n == 0) return pts;
    Space space = is.get() == 1 ? Space::Simplex : Space::Euclidean;
    auto dim = static_cast<Eigen::Index>(get_u64(is));
    pts.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        Eigen::VectorXd c(dim);
        get_bytes(is, c.data(), static_cast<std::size_t>(dim) * 8);
        pts.emplace_back(c, space);
    }
    return pts;
}

constexpr std::uint16_t kVersion = 1;

}  // namespace

void save_model(const CalibrationModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidInputError("save_model: cannot open " + path);
    os.write("SPCP", 4);
    put_bytes(os, &kVersion, 2);
    put_f64(os, model.alpha);
    put_f64(os, model.kcfg.gamma);
    os.put(model.kcfg.metric == KernelMetric::ClrSqEuclidean ? 0 : 1);
    put_f64(os, model.kcfg.clr_floor);
    put_f64(os, model.lambda_hat);
    put_u64(os, model.seed);
    put_points(os, model.points);
    put_vec(os, model.scores);
    put_mat(os, model.phi);
    put_mat(os, model.kernel);
    put_u64(os, static_cast<std::uint64_t>(model.fit.n()));
    for (int i = 0; i < model.fit.n(); ++i)
        os.put(static_cast<char>(model.fit.tag[i]));
    put_vec(os, model.fit.upsilon);
    put_vec(os, model.fit.eta);
    // Hyperparameter search record
    put_f64(os, model.hyper.gamma_hat);
    put_f64(os, model.hyper.lambda_hat);
    put_u64(os, model.hyper.seed);
    put_u64(os, model.hyper.gamma_grid.size());
    for (double g : model.hyper.gamma_grid) put_f64(os, g);
    put_u64(os, model.hyper.cv_table.size());
    for (const auto& row : model.hyper.cv_table) {
        put_u64(os, row.size());
        for (const auto& [lam, loss] : row) {
            put_f64(os, lam);
            put_f64(os, loss);
        }
    }
    // Mean predictor
    os.put(model.mu.fitted ? 1 : 0);
    if (model.mu.fitted) {
        put_points(os, model.mu.points);
        put_f64(os, model.mu.config.gamma);
        os.put(model.mu.config.metric == KernelMetric::ClrSqEuclidean ? 0 : 1);
        put_f64(os, model.mu.config.clr_floor);
        put_vec(os, model.mu.weights);
        put_f64(os, model.mu.intercept);
        put_f64(os, model.mu.ridge);
    }
    if (!os) throw InvalidInputError("save_model: write failure on " + path);
}

CalibrationModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidInputError("load_model: cannot open " + path);
    char magic[4];
    get_bytes(is, magic, 4);
    if (std::memcmp(magic, "SPCP", 4) != 0)
        throw InvalidInputError("load_model: bad magic bytes");
    std::uint16_t version;
    get_bytes(is, &version, 2);
    if (version != kVersion) throw InvalidInputError("load_model: unsupported version");

    CalibrationModel model;
    model.alpha = get_f64(is);
    double gamma = get_f64(is);
    KernelMetric metric = is.get() == 0 ? KernelMetric::ClrSqEuclidean : KernelMetric::SqEuclidean;
    double floor = get_f64(is);
    model.kcfg = KernelConfig(gamma, metric, floor);
    model.lambda_hat = get_f64(is);
    model.seed = get_u64(is);
    model.points = get_points(is);
    model.scores = get_vec(is);
    model.phi = get_mat(is);
    model.kernel = get_mat(is);
    auto nfit = static_cast<int>(get_u64(is));
    model.fit.tag.resize(nfit);
    for (int i = 0; i < nfit; ++i) {
        model.fit.tag[i] = static_cast<SetTag>(is.get());
        if (model.fit.tag[i] == SetTag::Elbow) model.fit.elbow.push_back(i);
    }
    model.fit.upsilon = get_vec(is);
    model.fit.eta = get_vec(is);
    model.hyper.gamma_hat = get_f64(is);
    model.hyper.lambda_hat = get_f64(is);
    model.hyper.seed = get_u64(is);
    auto ng = get_u64(is);
    model.hyper.gamma_grid.resize(ng);
    for (auto& g : model.hyper.gamma_grid) g = get_f64(is);
    auto nrows = get_u64(is);
    model.hyper.cv_table.resize(nrows);
    for (auto& row : model.hyper.cv_table) {
        row.resize(get_u64(is));
        for (auto& cell : row) {
            cell.first = get_f64(is);
            cell.second = get_f64(is);
        }
    }
    if (is.get() == 1) {
        model.mu.points = get_points(is);
        double mg = get_f64(is);
        KernelMetric mm = is.get() == 0 ? KernelMetric::ClrSqEuclidean : KernelMetric::SqEuclidean;
        double mf = get_f64(is);
        model.mu.config = KernelConfig(mg, mm, mf);
        model.mu.weights = get_vec(is);
        model.mu.intercept = get_f64(is);
        model.mu.ridge = get_f64(is);
        model.mu.fitted = true;
    }
    return model;
}

std::string hyperparams_json(const HyperParams& hyper) {
    nlohmann::json j;
    j["gamma_hat"] = hyper.gamma_hat;
    j["lambda_hat"] = hyper.lambda_hat;
    j["seed"] = hyper.seed;
    j["gamma_grid"] = hyper.gamma_grid;
    nlohmann::json table = nlohmann::json::array();
    for (std::size_t g = 0; g < hyper.cv_table.size(); ++g) {
        nlohmann::json row = nlohmann::json::array();
        for (const auto& [lam, loss] : hyper.cv_table[g])
            row.push_back({{"lambda", lam}, {"loss", loss}});
        table.push_back(row);
    }
    j["cv_table"] = table;
    return j.dump(2);
}

}  // namespace speedcp
