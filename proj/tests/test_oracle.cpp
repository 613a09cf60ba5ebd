#include <doctest.h>

#include "speedcp/lambda_path.hpp"
#include "speedcp/oracle.hpp"

#include <random>

using namespace speedcp;

namespace {

ProblemData random_instance(std::mt19937_64& rng, int n, int d, double alpha) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd z(n, 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 2; ++j) z(i, j) = g(rng);
    Eigen::MatrixXd kernel(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            kernel(i, j) = std::exp(-(z.row(i) - z.row(j)).squaredNorm());
    Eigen::MatrixXd phi = Eigen::MatrixXd::Ones(n, d);
    for (int j = 1; j < d; ++j)
        for (int i = 0; i < n; ++i) phi(i, j) = g(rng);
    Eigen::VectorXd scores(n);
    for (int i = 0; i < n; ++i) scores(i) = g(rng);
    return ProblemData(scores, phi, kernel, alpha);
}

}  // namespace

TEST_CASE("huge lambda with intercept phi recovers the pinball quantile fit") {
    std::mt19937_64 rng(7);
    const int n = 15;
    const double alpha = 0.3;
    ProblemData data = random_instance(rng, n, 1, alpha);
    // With lambda enormous the kernel part is priced out and the fit is the
    // constant minimizing the pinball loss: the (1-alpha) empirical quantile.
    PrimalSolution sol = solve_primal(data, 1e8, 1e-10, 60000);
    std::vector<double> s(data.scores.data(), data.scores.data() + n);
    std::sort(s.begin(), s.end());
    // any value between the order statistics around n(1-alpha) is optimal;
    // compare objectives instead of locations
    double best = 1e300;
    for (double c : s) {
        Eigen::VectorXd fitted = Eigen::VectorXd::Constant(n, c);
        best = std::min(best, pinball_loss(data.scores, fitted, alpha));
    }
    CHECK(sol.objective == doctest::Approx(best).epsilon(1e-5));
}

TEST_CASE("two point intercept-only objective at alpha 0.5") {
    Eigen::VectorXd s(2);
    s << 0.0, 1.0;
    Eigen::MatrixXd phi = Eigen::MatrixXd::Ones(2, 1);
    Eigen::MatrixXd k = Eigen::MatrixXd::Identity(2, 2);
    ProblemData data(s, phi, k, 0.5);
    PrimalSolution sol = solve_primal(data, 1e8, 1e-10, 60000);
    // any intercept in [0,1] attains 0.5*(1) pinball mass; grid check at 0.25
    Eigen::VectorXd fitted = Eigen::VectorXd::Constant(2, 0.25);
    double at_quarter = pinball_loss(s, fitted, 0.5);
    CHECK(at_quarter == doctest::Approx(0.5));
    CHECK(sol.objective == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("oracle matches path objectives at breakpoints") {
    std::mt19937_64 rng(19);
    ProblemData data = random_instance(rng, 30, 1, 0.1);
    LambdaTrace trace = trace_lambda_path(data, 0.0, 0);
    int checked = 0;
    for (const auto& bp : trace.breakpoints) {
        if (checked >= 5) break;
        double path_obj = path_objective(data, bp.partition, bp.lambda);
        PrimalSolution sol = solve_primal(data, bp.lambda, 1e-9, 60000);
        // the path is optimal; the oracle approximates from above
        CHECK(sol.objective >= path_obj - 1e-5 * std::max(1.0, std::abs(path_obj)));
        CHECK(sol.objective <= path_obj + 1e-5 * std::max(1.0, std::abs(path_obj)));
        ++checked;
    }
    CHECK(checked > 0);
}

TEST_CASE("oracle is self-consistent across iteration budgets") {
    std::mt19937_64 rng(21);
    ProblemData data = random_instance(rng, 20, 2, 0.2);
    PrimalSolution a = solve_primal(data, 0.8, 1e-9, 60000);
    PrimalSolution b = solve_primal(data, 0.8, 1e-11, 120000);
    CHECK(a.objective ==
          doctest::Approx(b.objective).epsilon(1e-6));
}

TEST_CASE("invalid arguments are rejected") {
    std::mt19937_64 rng(23);
    ProblemData data = random_instance(rng, 10, 1, 0.1);
    CHECK_THROWS_AS(solve_primal(data, 0.0, 1e-9, 1000), InvalidInputError);
    CHECK_THROWS_AS(solve_primal(data, 1.0, 0.0, 1000), InvalidInputError);
}

TEST_CASE("refit cutoff on all-equal scores lands at the common score") {
    const int n = 12;
    std::mt19937_64 rng(25);
    ProblemData data = random_instance(rng, n, 1, 0.1);
    data.scores.setConstant(2.0);
    Eigen::VectorXd row = Eigen::VectorXd::Constant(n, 0.5);
    Eigen::VectorXd phi_test = Eigen::VectorXd::Ones(1);
    // weak regularization: the ridge offset above the common score shrinks as 1/lambda
    double cut = cutoff_by_refit(data, row, 1.0, phi_test, 1000.0, 40);
    CHECK(cut == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("primal objective helper agrees with its definition") {
    std::mt19937_64 rng(27);
    ProblemData data = random_instance(rng, 8, 1, 0.25);
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(1, 0.3);
    Eigen::VectorXd c(8);
    std::normal_distribution<double> g(0.0, 0.2);
    for (int i = 0; i < 8; ++i) c(i) = g(rng);
    double lambda = 1.7;
    Eigen::VectorXd fitted = data.phi * eta + data.kernel * c;
    double expect = pinball_loss(data.scores, fitted, data.alpha) +
                    0.5 * lambda * c.dot(data.kernel * c);
    CHECK(primal_objective(data, lambda, eta, c) == doctest::Approx(expect).epsilon(1e-14));
}
