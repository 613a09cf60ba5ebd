#pragma once

#include <Eigen/Dense>
#include <vector>

#include "speedcp/common.hpp"

namespace speedcp {

enum class Space { Simplex, Euclidean };

// A K-dimensional embedding of a covariate vector, either a point on the
// probability simplex (pLSI mixture proportions) or a plain Euclidean
// embedding (PCA scores).
struct LatentPoint {
    Eigen::VectorXd coords;
    Space space = Space::Euclidean;

    LatentPoint() = default;
    LatentPoint(Eigen::VectorXd c, Space s);

    int dim() const { return static_cast<int>(coords.size()); }
};

// Centered log-ratio coordinates; entries sum to zero.
struct ClrVector {
    Eigen::VectorXd coords;
};

enum class KernelMetric { ClrSqEuclidean, SqEuclidean };

struct KernelConfig {
    double gamma = 1.0;
    KernelMetric metric = KernelMetric::ClrSqEuclidean;
    double clr_floor = 1e-6;

    KernelConfig() = default;
    KernelConfig(double g, KernelMetric m, double floor = 1e-6);
};

struct KernelMatrix {
    Eigen::MatrixXd entries;
    KernelConfig config;

    int size() const { return static_cast<int>(entries.rows()); }
};

// clr(p)_k = log p_k - mean_j log p_j. Entries below `floor` are clipped
// and the composition renormalized before taking logs.
ClrVector clr_transform(const LatentPoint& p, double floor = 1e-6);

double kernel_value(const LatentPoint& a, const LatentPoint& b, const KernelConfig& cfg);

KernelMatrix kernel_matrix(const std::vector<LatentPoint>& points, const KernelConfig& cfg);

// One row of the kernel against a fixed point set (used to augment a
// calibration kernel with a test point).
Eigen::VectorXd kernel_row(const std::vector<LatentPoint>& points, const LatentPoint& test,
                           const KernelConfig& cfg);

// Median of pairwise squared distances in the configured metric; used to
// scale the default bandwidth grid.
double median_sq_distance(const std::vector<LatentPoint>& points, const KernelConfig& cfg);

}  // namespace speedcp
