#pragma once

#include <cstdint>
#include <vector>

#include "speedcp/conformal.hpp"
#include "speedcp/model.hpp"

namespace speedcp {

// State of the imputed-score path on the augmented (n+1)-point problem; the
// test point is index n and sits in the elbow.
struct SPathState {
    ProblemData aug;  // scores(n) tracks the current S
    ElbowPartition partition;
    double s_value = 0.0;
    double lambda = 0.0;
    double ceiling = 0.0;  // max calibration score + 10 IQR
    bool rank_fallback = false;

    int test_index() const { return aug.n() - 1; }
    double test_upsilon() const { return partition.upsilon(test_index()); }
};

enum class SEventKind : unsigned char { Hit, LeaveLeft, LeaveRight, TestExit, Ceiling };

struct SEventRecord {
    double s = 0.0;
    SEventKind kind = SEventKind::Hit;
    int index = -1;
    double test_upsilon = 0.0;  // test dual right after the event
};

struct Cutoff {
    double s_star = 0.0;
    double s_rand = 0.0;
    double u_draw = 0.0;
    std::vector<SEventRecord> events;
};

// Small-S initialization: solve with the test point pinned in the left set,
// then enter it into the elbow at S1 = g(X_{n+1}) with dual -alpha. Falls
// back to the large-S system when the small-S solve is degenerate.
SPathState init_s_path(const CalibrationModel& model, const LatentPoint& test,
                       const Eigen::VectorXd& phi_test);

// Advances S through hit/leave events while the test point stays in the
// elbow. s_rand is located by affine inversion where the test dual crosses
// u; s_star where it reaches 1-alpha. Paths that exhaust max_events or the
// score ceiling report +infinity. max_events <= 0 means 4(n+1).
Cutoff trace_s_path(SPathState state, double u, int max_events = 0);

// Maps (mu_hat, cutoff) to an interval; default is the absolute-residual
// inversion [mu - c, mu + c].
using ScoreInverter = std::pair<double, double> (*)(double mu, double cutoff);

std::pair<double, double> absolute_residual_interval(double mu, double cutoff);

PredictionSet predict_set(const CalibrationModel& model, const LatentPoint& test,
                          const Eigen::VectorXd& phi_test, std::uint64_t u_seed,
                          ScoreInverter inverter = nullptr);

std::vector<PredictionSet> predict_batch(const CalibrationModel& model,
                                         const std::vector<LatentPoint>& tests,
                                         const Eigen::MatrixXd& phi_tests, std::uint64_t seed,
                                         int jobs = 1);

// Uniform draw on (-alpha, 1-alpha) from a splitmix64 stream; bitwise
// deterministic across platforms.
double draw_u(std::uint64_t seed, double alpha);

}  // namespace speedcp
