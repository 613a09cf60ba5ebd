#pragma once

#include <cstdint>
#include <vector>

#include "speedcp/path_core.hpp"

namespace speedcp {

enum class PathEvent : unsigned char {
    Init,
    EnterFromLeft,
    EnterFromRight,
    ExitToLeft,
    ExitToRight
};

struct LambdaBreakpoint {
    double lambda = 0.0;
    ElbowPartition partition;
    PathEvent event = PathEvent::Init;
    int event_index = -1;  // sample that moved, -1 for init
};

// Affine coefficients valid between breakpoints l and l+1:
//   upsilon_E(lambda) = a + lambda * b        (elbow entries, order = elbow)
//   eta(lambda)       = a1 + b1 / lambda
struct LambdaSegment {
    double lambda_hi = 0.0;
    double lambda_lo = 0.0;
    double alpha = 0.0;
    std::vector<int> elbow;
    std::vector<SetTag> tag;
    Eigen::VectorXd upsilon_a, upsilon_b;  // |E|
    Eigen::VectorXd eta_a, eta_b;          // d
};

struct LambdaTrace {
    std::vector<LambdaBreakpoint> breakpoints;
    std::vector<LambdaSegment> segments;
    bool reached_lambda_min = false;

    // Parameters at an arbitrary lambda within the traced range (clamped to
    // the endpoints outside it).
    ElbowPartition at(double lambda) const;
};

struct LambdaInit {
    double lambda1 = 0.0;
    ElbowPartition partition;  // elbow = {i0, i1}
    int i0 = -1, i1 = -1;
    int pivot_col = 0;
};

// Quantile-anchored initialization: i0 is the ceil((n+1)(1-alpha))-th order
// statistic of the scores (capped at n), lambda1 the largest lambda at which
// a second point reaches the elbow.
LambdaInit init_lambda_path(const ProblemData& data);

LambdaTrace trace_lambda_path(const ProblemData& data, double lambda_min, int max_events);

// Pinball loss sum_i (1-a)[S_i - g_i]_+ + a[S_i - g_i]_-
double pinball_loss(const Eigen::VectorXd& scores, const Eigen::VectorXd& fitted, double alpha);

struct HyperParams {
    double gamma_hat = 0.0;
    double lambda_hat = 0.0;
    // One row per gamma: (lambda, mean CV loss) pairs on that gamma's grid.
    std::vector<double> gamma_grid;
    std::vector<std::vector<std::pair<double, double>>> cv_table;
    std::uint64_t seed = 0;
};

struct CalibrationInputs {
    std::vector<LatentPoint> points;
    Eigen::VectorXd scores;
    Eigen::MatrixXd phi;
    double alpha = 0.1;
    KernelMetric metric = KernelMetric::ClrSqEuclidean;
    double clr_floor = 1e-6;
};

// k-fold cross-validated pinball loss over (gamma, lambda breakpoints);
// lambda grids are the union of fold breakpoints, per-fold losses evaluated
// by that fold's affine interpolation. Ties break toward larger lambda.
HyperParams select_hyperparams(const CalibrationInputs& calib,
                               const std::vector<double>& gamma_grid, int k_folds,
                               std::uint64_t seed, double lambda_min_factor = 1e-4,
                               int jobs = 1);

}  // namespace speedcp
