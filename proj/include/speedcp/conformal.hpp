#pragma once

#include <cstdint>
#include <vector>

#include "speedcp/kernel.hpp"

namespace speedcp {

// Interval prediction set. Infinite cutoffs give the full real line.
struct PredictionSet {
    double lower = 0.0;
    double upper = 0.0;
    double s_star = 0.0;
    double s_rand = 0.0;
    double u_draw = 0.0;
    double mu_hat = 0.0;
    int n_events = 0;
    bool rank_fallback = false;

    bool contains(double y) const { return y >= lower && y <= upper; }
    bool infinite() const;
    double size() const { return upper - lower; }
};

// (n+1)-point split conformal quantile with the +infinity atom.
double split_cp_cutoff(const Eigen::VectorXd& scores, double alpha);

// (1-alpha)-quantile of the weighted score atoms plus a +infinity atom.
double weighted_quantile_cutoff(const Eigen::VectorXd& scores, const Eigen::VectorXd& weights,
                                double weight_inf, double alpha);

// Kernel-reweighted quantile; weight on each calibration score proportional
// to k(X_i, test), weight on the +infinity atom proportional to k(test, test).
double localized_cp_cutoff(const Eigen::VectorXd& calib_scores,
                           const std::vector<LatentPoint>& calib_points,
                           const LatentPoint& test, const KernelConfig& cfg, double alpha);

struct BinAssignment {
    Eigen::MatrixXd centers;  // n_bins x dim, in working coordinates
    KernelMetric metric = KernelMetric::ClrSqEuclidean;
    double clr_floor = 1e-6;

    int n_bins() const { return static_cast<int>(centers.rows()); }
    int assign(const LatentPoint& p) const;
};

BinAssignment make_bins(const std::vector<LatentPoint>& points, int n_bins, std::uint64_t seed);

struct BinStats {
    int bin = 0;
    double coverage = 0.0;
    double mean_size = 0.0;  // finite sets only
    int n_test = 0;
    int n_infinite = 0;
};

struct CoverageReport {
    double marginal_coverage = 0.0;
    double mean_size = 0.0;
    int n_infinite = 0;
    double target = 0.9;
    std::vector<BinStats> per_bin;
};

CoverageReport evaluate_coverage(const std::vector<PredictionSet>& sets,
                                 const Eigen::VectorXd& truths, const BinAssignment& bins,
                                 const std::vector<LatentPoint>& test_points, double alpha);

}  // namespace speedcp
