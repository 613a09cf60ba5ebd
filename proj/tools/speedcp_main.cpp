#include <CLI11.hpp>
#include <json.hpp>

#include "speedcp/conformal.hpp"
#include "speedcp/io.hpp"
#include "speedcp/latent.hpp"
#include "speedcp/model.hpp"
#include "speedcp/oracle.hpp"
#include "speedcp/s_path.hpp"
#include "speedcp/synth.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace speedcp;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitStall = 4;

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <typename T>
T require_field(const json& cfg, const std::string& key) {
    if (!cfg.contains(key))
        throw InvalidInputError("config: missing field '" + key + "'");
    return cfg.at(key).get<T>();
}

struct DataDir {
    Eigen::MatrixXd embeddings;
    Eigen::VectorXd y;
    std::vector<int> train, calib, test;
    Space space = Space::Euclidean;
};

std::vector<int> json_ints(const json& a) {
    std::vector<int> v;
    for (const auto& e : a) v.push_back(e.get<int>());
    return v;
}

DataDir load_data_dir(const std::string& dir) {
    DataDir d;
    d.embeddings = read_csv_matrix(dir + "/embeddings.csv");
    Eigen::MatrixXd ymat = read_csv_matrix(dir + "/y.csv");
    d.y = ymat.col(0);
    json splits = json::parse(read_text_file(dir + "/splits.json"));
    d.train = json_ints(splits.at("train"));
    d.calib = json_ints(splits.at("calib"));
    d.test = json_ints(splits.at("test"));
    std::string space = "euclidean";
    if (fs::exists(dir + "/embed_meta.json"))
        space = json::parse(read_text_file(dir + "/embed_meta.json"))
                    .value("space", "euclidean");
    d.space = space == "simplex" ? Space::Simplex : Space::Euclidean;
    return d;
}

std::vector<LatentPoint> rows_to_points(const Eigen::MatrixXd& m, const std::vector<int>& idx,
                                        Space space) {
    std::vector<LatentPoint> pts;
    pts.reserve(idx.size());
    for (int i : idx) pts.emplace_back(m.row(i).transpose(), space);
    return pts;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::int64_t seed_override) {
    json cfg = load_config(config_path);
    SynthConfig sc;
    sc.K = require_field<int>(cfg, "K");
    sc.p = require_field<int>(cfg, "p");
    sc.m = require_field<int>(cfg, "m");
    sc.n_train = require_field<int>(cfg, "n_train");
    sc.n_calib = require_field<int>(cfg, "n_calib");
    sc.n_test = require_field<int>(cfg, "n_test");
    sc.dirichlet = require_field<std::vector<double>>(cfg, "dirichlet");
    sc.noise_sd = require_field<double>(cfg, "noise_sd");
    sc.seed = require_field<std::uint64_t>(cfg, "seed");
    if (seed_override >= 0) sc.seed = static_cast<std::uint64_t>(seed_override);

    SynthDataset ds = generate(sc);
    fs::create_directories(out_dir);
    write_csv_matrix(out_dir + "/X.csv", ds.X);
    write_csv_matrix(out_dir + "/W.csv", ds.W_true);
    write_csv_matrix(out_dir + "/y.csv", ds.y);
    json splits;
    splits["train"] = ds.train_idx;
    splits["calib"] = ds.calib_idx;
    splits["test"] = ds.test_idx;
    write_text_file(out_dir + "/splits.json", splits.dump(2) + "\n");
    json meta;
    meta["seed"] = sc.seed;
    meta["eta"] = std::vector<double>(ds.eta.data(), ds.eta.data() + ds.eta.size());
    meta["eta_normalization"] = "l2";
    meta["noise_sd"] = sc.noise_sd;
    write_text_file(out_dir + "/meta.json", meta.dump(2) + "\n");
    std::cout << "wrote " << ds.X.rows() << " rows to " << out_dir << "\n";
    return 0;
}

int cmd_embed(const std::string& data_dir, const std::string& method, int rank,
              std::int64_t seed) {
    Eigen::MatrixXd X = read_csv_matrix(data_dir + "/X.csv");
    EmbeddingModel model;
    if (method == "plsi")
        model = fit_plsi(X, rank, static_cast<std::uint64_t>(seed < 0 ? 0 : seed));
    else if (method == "pca")
        model = fit_pca(X, rank);
    else if (method == "identity")
        model = identity_embedding(static_cast<int>(X.cols()));
    else
        throw InvalidInputError("embed: unknown method '" + method + "'");

    std::vector<LatentPoint> pts = embed(model, X);
    Eigen::MatrixXd emb(X.rows(), model.rank);
    for (Eigen::Index i = 0; i < X.rows(); ++i) emb.row(i) = pts[i].coords.transpose();
    write_csv_matrix(data_dir + "/embeddings.csv", emb);
    json meta;
    meta["method"] = method;
    meta["rank"] = model.rank;
    meta["space"] = model.out_space == Space::Simplex ? "simplex" : "euclidean";
    write_text_file(data_dir + "/embed_meta.json", meta.dump(2) + "\n");
    std::cout << "embedded " << X.rows() << " rows, rank " << model.rank << "\n";
    return 0;
}

CalibrationModel run_calibrate(const DataDir& d, double alpha, int folds,
                               const std::vector<double>& gamma_multipliers,
                               std::uint64_t seed, int jobs) {
    Space space = d.space;
    std::vector<LatentPoint> train_pts = rows_to_points(d.embeddings, d.train, space);
    std::vector<LatentPoint> calib_pts = rows_to_points(d.embeddings, d.calib, space);
    KernelMetric metric =
        space == Space::Simplex ? KernelMetric::ClrSqEuclidean : KernelMetric::SqEuclidean;

    double med = median_sq_distance(train_pts, KernelConfig(1.0, metric));
    if (med <= 0.0) med = 1.0;
    KernelConfig mu_cfg(1.0 / med, metric);
    Eigen::VectorXd y_train(d.train.size());
    for (std::size_t i = 0; i < d.train.size(); ++i) y_train(i) = d.y(d.train[i]);
    MuPredictor mu = fit_mu(train_pts, y_train, mu_cfg);

    CalibrationInputs in;
    in.points = calib_pts;
    in.alpha = alpha;
    in.metric = metric;
    in.scores.resize(d.calib.size());
    for (std::size_t i = 0; i < d.calib.size(); ++i)
        in.scores(i) = std::abs(d.y(d.calib[i]) - predict_mu(mu, calib_pts[i]));
    in.phi = Eigen::MatrixXd::Ones(static_cast<int>(d.calib.size()), 1);

    std::vector<double> grid;
    for (double mlt : gamma_multipliers) grid.push_back(mlt / med);
    CalibrationModel model = calibrate(in, grid, folds, seed, jobs);
    model.mu = mu;
    return model;
}

int cmd_calibrate(const std::string& data_dir, const std::string& out_path, double alpha,
                  int folds, std::vector<double> gamma_multipliers, std::uint64_t seed,
                  int jobs) {
    DataDir d = load_data_dir(data_dir);
    CalibrationModel model = run_calibrate(d, alpha, folds, gamma_multipliers, seed, jobs);
    save_model(model, out_path);
    write_text_file(out_path + ".json", hyperparams_json(model.hyper) + "\n");
    std::printf("gamma_hat %.6g lambda_hat %.6g -> %s\n", model.hyper.gamma_hat,
                model.hyper.lambda_hat, out_path.c_str());
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_dir,
                const std::string& out_path, std::uint64_t seed, int jobs) {
    CalibrationModel model = load_model(model_path);
    DataDir d = load_data_dir(data_dir);
    Space space = model.points.empty() ? d.space : model.points[0].space;
    std::vector<LatentPoint> tests = rows_to_points(d.embeddings, d.test, space);
    Eigen::MatrixXd phi_tests = Eigen::MatrixXd::Ones(static_cast<int>(tests.size()), model.d());

    std::vector<PredictionSet> sets = predict_batch(model, tests, phi_tests, seed, jobs);
    Eigen::MatrixXd out(static_cast<int>(sets.size()), 7);
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const PredictionSet& s = sets[i];
        out.row(static_cast<int>(i)) << static_cast<double>(i), s.s_star, s.s_rand, s.u_draw,
            static_cast<double>(s.n_events), s.lower, s.upper;
    }
    write_csv_matrix(out_path, out,
                     {"test_id", "s_star", "s_rand", "u_draw", "n_events", "lower", "upper"});
    std::cout << "wrote " << sets.size() << " cutoffs to " << out_path << "\n";
    return 0;
}

int cmd_evaluate(const std::string& cutoffs_path, const std::string& data_dir, int n_bins,
                 double alpha, const std::string& out_prefix, std::uint64_t seed) {
    Eigen::MatrixXd cuts = read_csv_matrix(cutoffs_path);
    DataDir d = load_data_dir(data_dir);
    if (cuts.rows() != static_cast<Eigen::Index>(d.test.size()))
        throw InvalidInputError("evaluate: cutoff rows do not match test split");

    std::vector<LatentPoint> tests = rows_to_points(d.embeddings, d.test, d.space);
    Eigen::VectorXd truths(d.test.size());
    for (std::size_t i = 0; i < d.test.size(); ++i) truths(i) = d.y(d.test[i]);

    std::vector<PredictionSet> sets(cuts.rows());
    for (Eigen::Index i = 0; i < cuts.rows(); ++i) {
        sets[i].s_star = cuts(i, 1);
        sets[i].s_rand = cuts(i, 2);
        sets[i].u_draw = cuts(i, 3);
        sets[i].lower = cuts(i, 5);
        sets[i].upper = cuts(i, 6);
    }
    BinAssignment bins = make_bins(tests, n_bins, seed);
    CoverageReport rep = evaluate_coverage(sets, truths, bins, tests, alpha);

    json j;
    j["marginal_coverage"] = rep.marginal_coverage;
    j["mean_size"] = rep.mean_size;
    j["n_infinite"] = rep.n_infinite;
    j["target"] = rep.target;
    json per = json::array();
    for (const BinStats& b : rep.per_bin)
        per.push_back({{"bin", b.bin},
                       {"coverage", b.coverage},
                       {"mean_size", b.mean_size},
                       {"n_test", b.n_test},
                       {"n_infinite", b.n_infinite}});
    j["per_bin"] = per;
    write_text_file(out_prefix + ".json", j.dump(2) + "\n");

    Eigen::MatrixXd plot(static_cast<int>(rep.per_bin.size()), 3);
    for (std::size_t i = 0; i < rep.per_bin.size(); ++i)
        plot.row(static_cast<int>(i)) << static_cast<double>(rep.per_bin[i].bin),
            rep.per_bin[i].coverage, rep.per_bin[i].mean_size;
    write_csv_matrix(out_prefix + "_bins.csv", plot, {"bin", "coverage", "mean_size"});
    std::printf("marginal coverage %.4f (target %.2f)\n", rep.marginal_coverage, rep.target);
    return 0;
}

int cmd_bench(const std::string& data_dir, std::vector<std::string> methods, double alpha,
              std::uint64_t seed, int jobs, int refit_cap) {
    DataDir d = load_data_dir(data_dir);
    for (const std::string& m : methods)
        if (m != "speedcp" && m != "refit" && m != "split" && m != "localized")
            throw InvalidInputError("bench: unknown method '" + m + "'");

    CalibrationModel model = run_calibrate(d, alpha, 2, {1.0}, seed, jobs);
    std::vector<LatentPoint> tests = rows_to_points(d.embeddings, d.test, d.space);
    Eigen::MatrixXd phi_tests = Eigen::MatrixXd::Ones(static_cast<int>(tests.size()), model.d());

    json timings = json::object();
    std::printf("%-12s %12s %10s\n", "method", "seconds", "n_test");
    auto report = [&](const std::string& name, double secs, std::size_t count) {
        timings[name] = {{"seconds", secs}, {"n_test", count}};
        std::printf("%-12s %12.4f %10zu\n", name.c_str(), secs, count);
    };

    for (const std::string& m : methods) {
        if (m == "speedcp") {
            double t0 = now_seconds();
            predict_batch(model, tests, phi_tests, seed, jobs);
            report(m, now_seconds() - t0, tests.size());
        } else if (m == "split") {
            double t0 = now_seconds();
            double sink = 0.0;
            for (std::size_t i = 0; i < tests.size(); ++i)
                sink += split_cp_cutoff(model.scores, alpha);
            if (!std::isfinite(sink)) std::cout << "";
            report(m, now_seconds() - t0, tests.size());
        } else if (m == "localized") {
            double t0 = now_seconds();
            for (const LatentPoint& t : tests)
                localized_cp_cutoff(model.scores, model.points, t, model.kcfg, alpha);
            report(m, now_seconds() - t0, tests.size());
        } else {
            std::size_t cap = std::min<std::size_t>(tests.size(),
                                                    refit_cap > 0 ? refit_cap : tests.size());
            double t0 = now_seconds();
            for (std::size_t i = 0; i < cap; ++i) {
                Eigen::VectorXd row = kernel_row(model.points, tests[i], model.kcfg);
                cutoff_by_refit(model.problem(), row, 1.0, phi_tests.row(i).transpose(),
                                model.lambda_hat);
            }
            report(m, now_seconds() - t0, cap);
        }
    }
    write_text_file(data_dir + "/bench.json", timings.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SpeedCP: conditional conformal prediction via solution paths"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "data", data_dir = "data";
    std::string model_path = "model.bin", out_path, method = "plsi";
    std::int64_t seed = -1;
    int rank = 3, folds = 5, n_bins = 10, jobs = 1, refit_cap = 0;
    double alpha = 0.1;
    std::vector<double> gamma_multipliers{0.25, 0.5, 1.0, 2.0, 4.0};
    std::vector<std::string> methods{"speedcp", "split", "localized"};

    auto* sim = app.add_subcommand("simulate", "Generate a synthetic admixture dataset");
    sim->add_option("--config", config_path, "SynthConfig TOML or JSON")->required();
    sim->add_option("--out", out_dir, "Output directory");
    sim->add_option("--seed", seed, "Override the config seed");

    auto* emb = app.add_subcommand("embed", "Fit and apply a latent embedding");
    emb->add_option("--data", data_dir, "Dataset directory")->required();
    emb->add_option("--method", method, "plsi | pca | identity");
    emb->add_option("--rank", rank, "Embedding rank");
    emb->add_option("--seed", seed, "Seed for vertex hunting retries");

    auto* cal = app.add_subcommand("calibrate", "Select (gamma, lambda) and freeze the model");
    cal->add_option("--data", data_dir, "Dataset directory")->required();
    cal->add_option("--out", model_path, "Model output path");
    cal->add_option("--alpha", alpha, "Miscoverage level");
    cal->add_option("--folds", folds, "CV folds");
    cal->add_option("--gamma-multipliers", gamma_multipliers,
                    "Grid multipliers of the inverse median squared distance");
    cal->add_option("--seed", seed, "Root seed");
    cal->add_option("--jobs", jobs, "Worker threads");

    auto* pre = app.add_subcommand("predict", "Per-test-point randomized cutoffs");
    pre->add_option("--model", model_path, "Model file")->required();
    pre->add_option("--data", data_dir, "Dataset directory")->required();
    pre->add_option("--out", out_path, "Cutoffs CSV path");
    pre->add_option("--seed", seed, "Root seed for the uniform draws");
    pre->add_option("--jobs", jobs, "Worker threads");

    auto* eva = app.add_subcommand("evaluate", "Coverage report over latent-space bins");
    eva->add_option("--cutoffs", out_path, "Cutoffs CSV from predict")->required();
    eva->add_option("--data", data_dir, "Dataset directory")->required();
    eva->add_option("--bins", n_bins, "Number of k-means bins");
    eva->add_option("--alpha", alpha, "Miscoverage level");
    eva->add_option("--seed", seed, "Seed for binning");
    eva->add_option("--out", config_path, "Output prefix (default: report)");

    auto* ben = app.add_subcommand("bench", "Wall-clock comparison of methods");
    ben->add_option("--data", data_dir, "Dataset directory")->required();
    ben->add_option("--methods", methods, "speedcp refit split localized");
    ben->add_option("--alpha", alpha, "Miscoverage level");
    ben->add_option("--seed", seed, "Root seed");
    ben->add_option("--jobs", jobs, "Worker threads");
    ben->add_option("--refit-cap", refit_cap, "Max refit-oracle test points");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    std::uint64_t useed = seed < 0 ? 0 : static_cast<std::uint64_t>(seed);
    try {
        if (sim->parsed()) return cmd_simulate(config_path, out_dir, seed);
        if (emb->parsed()) return cmd_embed(data_dir, method, rank, seed);
        if (cal->parsed())
            return cmd_calibrate(data_dir, model_path, alpha, folds, gamma_multipliers, useed,
                                 jobs);
        if (pre->parsed()) {
            if (out_path.empty()) out_path = "cutoffs.csv";
            return cmd_predict(model_path, data_dir, out_path, useed, jobs);
        }
        if (eva->parsed()) {
            std::string prefix = config_path.empty() ? "report" : config_path;
            return cmd_evaluate(out_path, data_dir, n_bins, alpha, prefix, useed);
        }
        if (ben->parsed()) return cmd_bench(data_dir, methods, alpha, useed, jobs, refit_cap);
    } catch (const PathStallError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStall;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const InvalidInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return 0;
}
