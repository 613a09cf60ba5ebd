#include <doctest.h>

#include "speedcp/oracle.hpp"
#include "speedcp/s_path.hpp"

#include <random>

using namespace speedcp;

namespace {

CalibrationModel build_model(std::mt19937_64& rng, int n, int d, double alpha, double lambda,
                             double gamma = 1.0) {
    std::normal_distribution<double> g(0.0, 1.0);
    CalibrationModel model;
    model.alpha = alpha;
    model.lambda_hat = lambda;
    model.kcfg = KernelConfig(gamma, KernelMetric::SqEuclidean);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd c(2);
        c << g(rng), g(rng);
        model.points.emplace_back(c, Space::Euclidean);
    }
    model.kernel = kernel_matrix(model.points, model.kcfg).entries;
    model.phi = Eigen::MatrixXd::Ones(n, d);
    for (int j = 1; j < d; ++j)
        for (int i = 0; i < n; ++i) model.phi(i, j) = g(rng);
    model.scores.resize(n);
    for (int i = 0; i < n; ++i) model.scores(i) = std::abs(g(rng));
    model.fit = active_set_solve(model.problem(), lambda, std::vector<SetTag>(n, SetTag::Left));
    return model;
}

}  // namespace

TEST_CASE("duplicated elbow point: S1 equals its fitted value") {
    std::mt19937_64 rng(3);
    CalibrationModel model = build_model(rng, 20, 1, 0.1, 1.0);
    REQUIRE(!model.fit.elbow.empty());
    int i = model.fit.elbow.front();
    FitEvaluation fit = evaluate_fit(model.problem(), model.fit, model.lambda_hat);

    SPathState state =
        init_s_path(model, model.points[i], model.phi.row(i).transpose());
    // Duplicating a zero-residual point leaves the fit there unchanged.
    CHECK(state.s_value == doctest::Approx(fit.fitted(i)).epsilon(1e-6));
}

TEST_CASE("all-ones kernel with intercept phi starts at the quantile fit") {
    std::mt19937_64 rng(5);
    const int n = 14;
    const double alpha = 0.2, lambda = 2.0;
    CalibrationModel model;
    model.alpha = alpha;
    model.lambda_hat = lambda;
    model.kcfg = KernelConfig(0.0, KernelMetric::SqEuclidean);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd c(1);
        c << g(rng);
        model.points.emplace_back(c, Space::Euclidean);
    }
    model.kernel = Eigen::MatrixXd::Ones(n, n);
    model.phi = Eigen::MatrixXd::Ones(n, 1);
    model.scores.resize(n);
    for (int i = 0; i < n; ++i) model.scores(i) = g(rng);
    model.fit = active_set_solve(model.problem(), lambda, std::vector<SetTag>(n, SetTag::Left));

    // Orthogonality kills the kernel term, so the fit is the intercept-only
    // pinball regression: the elbow score itself.
    FitEvaluation fit = evaluate_fit(model.problem(), model.fit, lambda);
    double shared = fit.fitted(0);
    CHECK((fit.fitted.array() - shared).abs().maxCoeff() < 1e-8);
    double best = 1e300, best_c = 0.0;
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd f = Eigen::VectorXd::Constant(n, model.scores(i));
        double l = pinball_loss(model.scores, f, alpha);
        if (l < best) {
            best = l;
            best_c = model.scores(i);
        }
    }
    CHECK(shared == doctest::Approx(best_c).epsilon(1e-8));

    Eigen::VectorXd test_coord(1);
    test_coord << 0.3;
    SPathState state = init_s_path(model, LatentPoint(test_coord, Space::Euclidean),
                                   Eigen::VectorXd::Ones(1));
    CHECK(state.s_value == doctest::Approx(shared).epsilon(1e-7));
}

TEST_CASE("test point residual is zero at S1") {
    std::mt19937_64 rng(7);
    CalibrationModel model = build_model(rng, 30, 1, 0.1, 1.5);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXd c(2);
    c << g(rng), g(rng);
    SPathState state =
        init_s_path(model, LatentPoint(c, Space::Euclidean), Eigen::VectorXd::Ones(1));
    FitEvaluation fit = evaluate_fit(state.aug, state.partition, model.lambda_hat);
    CHECK(std::abs(fit.residuals(state.test_index())) < 1e-7);
    CHECK(state.test_upsilon() == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(check_kkt(state.aug, state.partition, model.lambda_hat, 1e-7).pass());
}

TEST_CASE("u just above -alpha gives s_rand at S1") {
    std::mt19937_64 rng(9);
    CalibrationModel model = build_model(rng, 25, 1, 0.1, 1.0);
    Eigen::VectorXd c(2);
    c << 0.4, -0.2;
    SPathState state =
        init_s_path(model, LatentPoint(c, Space::Euclidean), Eigen::VectorXd::Ones(1));
    double s1 = state.s_value;
    Cutoff cut = trace_s_path(state, -0.1 + 1e-9);
    CHECK(cut.s_rand == doctest::Approx(s1).epsilon(1e-5));
}

TEST_CASE("test dual is nondecreasing along the path") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 30; ++t) {
        int n = 15 + static_cast<int>(rng() % 20);
        CalibrationModel model = build_model(rng, n, 1, 0.1, 0.5 + (t % 4) * 0.5);
        std::normal_distribution<double> g(0.0, 1.0);
        Eigen::VectorXd c(2);
        c << g(rng), g(rng);
        SPathState state =
            init_s_path(model, LatentPoint(c, Space::Euclidean), Eigen::VectorXd::Ones(1));
        Cutoff cut = trace_s_path(state, 0.4);
        for (std::size_t e = 1; e < cut.events.size(); ++e) {
            CHECK(cut.events[e].test_upsilon >= cut.events[e - 1].test_upsilon - 1e-10);
            CHECK(cut.events[e].s >= cut.events[e - 1].s - 1e-12);
        }
        if (std::isfinite(cut.s_star) && std::isfinite(cut.s_rand))
            CHECK(cut.s_rand <= cut.s_star + 1e-12);
    }
}

TEST_CASE("s_star agrees with the refit bisection oracle") {
    std::mt19937_64 rng(13);
    CalibrationModel model = build_model(rng, 25, 1, 0.1, 1.0);
    Eigen::VectorXd c(2);
    c << 0.1, 0.5;
    LatentPoint test(c, Space::Euclidean);
    SPathState state = init_s_path(model, test, Eigen::VectorXd::Ones(1));
    Cutoff cut = trace_s_path(state, 0.0);
    REQUIRE(std::isfinite(cut.s_star));

    Eigen::VectorXd row = kernel_row(model.points, test, model.kcfg);
    double oracle =
        cutoff_by_refit(model.problem(), row, 1.0, Eigen::VectorXd::Ones(1), model.lambda_hat);
    double range = model.scores.maxCoeff() - model.scores.minCoeff();
    CHECK(std::abs(cut.s_star - oracle) <= 1e-4 * range);
}

TEST_CASE("monotone cutoff map in u") {
    std::mt19937_64 rng(15);
    CalibrationModel model = build_model(rng, 20, 1, 0.1, 1.2);
    Eigen::VectorXd c(2);
    c << -0.3, 0.8;
    LatentPoint test(c, Space::Euclidean);
    double prev = -1e300;
    for (double u : {-0.05, 0.2, 0.5, 0.85}) {
        SPathState state = init_s_path(model, test, Eigen::VectorXd::Ones(1));
        Cutoff cut = trace_s_path(state, u);
        double v = std::isfinite(cut.s_rand) ? cut.s_rand : 1e300;
        CHECK(v >= prev - 1e-10);
        prev = v;
    }
}

TEST_CASE("interior S re-solves match the affine segments") {
    std::mt19937_64 rng(17);
    CalibrationModel model = build_model(rng, 20, 1, 0.1, 1.0);
    Eigen::VectorXd c(2);
    c << 0.6, 0.1;
    LatentPoint test(c, Space::Euclidean);
    SPathState init = init_s_path(model, test, Eigen::VectorXd::Ones(1));
    Cutoff cut = trace_s_path(init, 0.3);

    int checked = 0;
    for (std::size_t e = 1; e + 1 < cut.events.size() && checked < 4; ++e) {
        double lo = cut.events[e - 1].s, hi = cut.events[e].s;
        if (hi - lo < 1e-8) continue;
        double mid = 0.5 * (lo + hi);
        SPathState state = init_s_path(model, test, Eigen::VectorXd::Ones(1));
        state.aug.scores(state.test_index()) = mid;
        std::vector<SetTag> tag = state.partition.tag;
        ElbowPartition part =
            active_set_solve(state.aug, model.lambda_hat, tag, state.test_index());
        double expect = 0.5 * (cut.events[e - 1].test_upsilon + cut.events[e].test_upsilon);
        CHECK(part.upsilon(state.test_index()) == doctest::Approx(expect).epsilon(1e-6));
        CHECK(check_kkt(state.aug, part, model.lambda_hat, 1e-7).pass());
        Eigen::VectorXd orth = state.aug.phi.transpose() * part.upsilon;
        CHECK(orth.cwiseAbs().maxCoeff() < 1e-8);
        ++checked;
    }
    CHECK(checked > 0);
}

TEST_CASE("prediction set inversion and determinism") {
    CHECK(absolute_residual_interval(2.0, 0.0) == std::pair<double, double>{2.0, 2.0});
    auto full = absolute_residual_interval(1.0, std::numeric_limits<double>::infinity());
    CHECK(std::isinf(full.first));
    CHECK(std::isinf(full.second));

    std::mt19937_64 rng(19);
    CalibrationModel model = build_model(rng, 25, 1, 0.1, 1.0);
    Eigen::VectorXd c(2);
    c << 0.2, -0.4;
    LatentPoint test(c, Space::Euclidean);
    PredictionSet a = predict_set(model, test, Eigen::VectorXd::Ones(1), 42);
    PredictionSet b = predict_set(model, test, Eigen::VectorXd::Ones(1), 42);
    CHECK(a.s_rand == b.s_rand);
    CHECK(a.s_star == b.s_star);
    CHECK(a.u_draw == b.u_draw);
    CHECK(a.u_draw > -0.1);
    CHECK(a.u_draw < 0.9);
    if (std::isfinite(a.s_rand)) {
        CHECK(a.upper - a.lower == doctest::Approx(2.0 * a.s_rand).epsilon(1e-12));
        CHECK(a.upper + a.lower == doctest::Approx(2.0 * a.mu_hat).epsilon(1e-9));
    }
}

TEST_CASE("trace rejects u outside the open interval") {
    std::mt19937_64 rng(21);
    CalibrationModel model = build_model(rng, 15, 1, 0.1, 1.0);
    Eigen::VectorXd c(2);
    c << 0.0, 0.0;
    SPathState state =
        init_s_path(model, LatentPoint(c, Space::Euclidean), Eigen::VectorXd::Ones(1));
    CHECK_THROWS_AS(trace_s_path(state, -0.1), InvalidInputError);
    CHECK_THROWS_AS(trace_s_path(state, 0.9), InvalidInputError);
}
