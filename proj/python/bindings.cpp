#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "speedcp/conformal.hpp"
#include "speedcp/latent.hpp"
#include "speedcp/model.hpp"
#include "speedcp/s_path.hpp"
#include "speedcp/synth.hpp"

namespace py = pybind11;
using namespace speedcp;

namespace {

Space space_of(const std::string& name) {
    if (name == "simplex") return Space::Simplex;
    if (name == "euclidean") return Space::Euclidean;
    throw InvalidInputError("space must be 'simplex' or 'euclidean'");
}

KernelMetric metric_of(const std::string& name) {
    if (name == "clr") return KernelMetric::ClrSqEuclidean;
    if (name == "euclidean") return KernelMetric::SqEuclidean;
    throw InvalidInputError("metric must be 'clr' or 'euclidean'");
}

std::vector<LatentPoint> points_of(const Eigen::MatrixXd& rows, const std::string& space) {
    Space sp = space_of(space);
    std::vector<LatentPoint> pts;
    pts.reserve(rows.rows());
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
        pts.emplace_back(rows.row(i).transpose(), sp);
    return pts;
}

py::dict set_to_dict(const PredictionSet& s) {
    py::dict d;
    d["lower"] = s.lower;
    d["upper"] = s.upper;
    d["s_star"] = s.s_star;
    d["s_rand"] = s.s_rand;
    d["mu_hat"] = s.mu_hat;
    d["n_events"] = s.n_events;
    d["infinite"] = s.infinite();
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Conformal prediction with piecewise-linear solution paths over "
              "low-rank latent embeddings";

    py::register_exception<InvalidInputError>(m, "InvalidInputError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
    py::register_exception<PathStallError>(m, "PathStallError", PyExc_RuntimeError);

    py::class_<EmbeddingModel>(m, "EmbeddingModel")
        .def_property_readonly("rank", [](const EmbeddingModel& e) { return e.rank; })
        .def_property_readonly("input_dim",
                               [](const EmbeddingModel& e) { return e.input_dim; })
        .def_property_readonly("kind",
                               [](const EmbeddingModel& e) {
                                   switch (e.kind) {
                                       case EmbeddingKind::Plsi: return "plsi";
                                       case EmbeddingKind::Pca: return "pca";
                                       default: return "identity";
                                   }
                               })
        .def(
            "transform",
            [](const EmbeddingModel& e, const Eigen::MatrixXd& X, int jobs) {
                std::vector<LatentPoint> pts = embed(e, X, jobs);
                Eigen::MatrixXd out(static_cast<Eigen::Index>(pts.size()),
                                    pts.empty() ? 0 : pts[0].dim());
                for (std::size_t i = 0; i < pts.size(); ++i)
                    out.row(static_cast<Eigen::Index>(i)) = pts[i].coords.transpose();
                return out;
            },
            py::arg("X"), py::arg("jobs") = 1);

    py::class_<CalibrationModel>(m, "Model")
        .def_property_readonly("alpha", [](const CalibrationModel& s) { return s.alpha; })
        .def_property_readonly("gamma",
                               [](const CalibrationModel& s) { return s.kcfg.gamma; })
        .def_property_readonly("lambda_",
                               [](const CalibrationModel& s) { return s.lambda_hat; })
        .def_property_readonly("n_calib", [](const CalibrationModel& s) { return s.n(); })
        .def_property_readonly("cv_table",
                               [](const CalibrationModel& s) { return s.hyper.cv_table; })
        .def(
            "predict",
            [](const CalibrationModel& s, const Eigen::MatrixXd& W,
               const Eigen::MatrixXd& phi, const std::string& space, std::uint64_t seed,
               int jobs) {
                std::vector<PredictionSet> sets =
                    predict_batch(s, points_of(W, space), phi, seed, jobs);
                py::list out;
                for (const PredictionSet& p : sets) out.append(set_to_dict(p));
                return out;
            },
            py::arg("W"), py::arg("phi"), py::arg("space") = "simplex",
            py::arg("seed") = 0, py::arg("jobs") = 1)
        .def("set_mean",
             [](CalibrationModel& s, const MuPredictor& mu) { s.mu = mu; }, py::arg("mu"))
        .def("save",
             [](const CalibrationModel& s, const std::string& path) { save_model(s, path); },
             py::arg("path"));

    m.def("load_model", &load_model, py::arg("path"));

    m.def(
        "fit_plsi",
        [](const Eigen::MatrixXd& X, int K, std::uint64_t seed) {
            return fit_plsi(X, K, seed);
        },
        py::arg("X"), py::arg("K"), py::arg("seed") = 0);
    m.def("fit_pca", &fit_pca, py::arg("X"), py::arg("K"));

    m.def(
        "calibrate",
        [](const Eigen::MatrixXd& W, const Eigen::VectorXd& scores,
           const Eigen::MatrixXd& phi, double alpha, const std::string& space,
           const std::string& metric, const std::vector<double>& gamma_grid, int folds,
           std::uint64_t seed, int jobs) {
            CalibrationInputs in;
            in.points = points_of(W, space);
            in.scores = scores;
            in.phi = phi;
            in.alpha = alpha;
            in.metric = metric_of(metric);
            return calibrate(in, gamma_grid, folds, seed, jobs);
        },
        py::arg("W"), py::arg("scores"), py::arg("phi"), py::arg("alpha") = 0.1,
        py::arg("space") = "simplex", py::arg("metric") = "clr",
        py::arg("gamma_grid") = std::vector<double>{0.5, 1.0, 2.0}, py::arg("folds") = 5,
        py::arg("seed") = 0, py::arg("jobs") = 1);

    m.def(
        "fit_mean",
        [](const Eigen::MatrixXd& W, const Eigen::VectorXd& y, double gamma,
           const std::string& space, const std::string& metric, double ridge) {
            KernelConfig cfg(gamma, metric_of(metric));
            return fit_mu(points_of(W, space), y, cfg, ridge);
        },
        py::arg("W"), py::arg("y"), py::arg("gamma") = 1.0, py::arg("space") = "simplex",
        py::arg("metric") = "clr", py::arg("ridge") = 1e-3);

    py::class_<MuPredictor>(m, "MeanPredictor")
        .def(
            "predict",
            [](const MuPredictor& mu, const Eigen::MatrixXd& W, const std::string& space) {
                std::vector<LatentPoint> pts = points_of(W, space);
                Eigen::VectorXd out(static_cast<Eigen::Index>(pts.size()));
                for (std::size_t i = 0; i < pts.size(); ++i)
                    out(static_cast<Eigen::Index>(i)) = predict_mu(mu, pts[i]);
                return out;
            },
            py::arg("W"), py::arg("space") = "simplex");

    m.def("split_cutoff", &split_cp_cutoff, py::arg("scores"), py::arg("alpha"));
    m.def(
        "localized_cutoff",
        [](const Eigen::VectorXd& scores, const Eigen::MatrixXd& W,
           const Eigen::VectorXd& w_test, double gamma, const std::string& space,
           const std::string& metric, double alpha) {
            KernelConfig cfg(gamma, metric_of(metric));
            Space sp = space_of(space);
            return localized_cp_cutoff(scores, points_of(W, space), LatentPoint(w_test, sp),
                                       cfg, alpha);
        },
        py::arg("scores"), py::arg("W"), py::arg("w_test"), py::arg("gamma") = 1.0,
        py::arg("space") = "simplex", py::arg("metric") = "clr", py::arg("alpha") = 0.1);

    m.def(
        "simulate",
        [](int K, int p, int m_docs, int n_train, int n_calib, int n_test,
           const std::vector<double>& dirichlet, double noise_sd, std::uint64_t seed) {
            SynthConfig cfg;
            cfg.K = K;
            cfg.p = p;
            cfg.m = m_docs;
            cfg.n_train = n_train;
            cfg.n_calib = n_calib;
            cfg.n_test = n_test;
            if (!dirichlet.empty()) cfg.dirichlet = dirichlet;
            cfg.noise_sd = noise_sd;
            cfg.seed = seed;
            SynthDataset data = generate(cfg);
            py::dict out;
            out["X"] = data.X;
            out["W_true"] = data.W_true;
            out["y"] = data.y;
            out["zeta"] = data.zeta;
            out["eta"] = data.eta;
            out["train_idx"] = data.train_idx;
            out["calib_idx"] = data.calib_idx;
            out["test_idx"] = data.test_idx;
            return out;
        },
        py::arg("K") = 3, py::arg("p") = 30, py::arg("m") = 1000, py::arg("n_train") = 400,
        py::arg("n_calib") = 400, py::arg("n_test") = 200,
        py::arg("dirichlet") = std::vector<double>{}, py::arg("noise_sd") = 0.1,
        py::arg("seed") = 0);
}
