#include "speedcp/kernel.hpp"

#include <algorithm>
#include <cmath>

namespace speedcp {

LatentPoint::LatentPoint(Eigen::VectorXd c, Space s) : coords(std::move(c)), space(s) {
    if (coords.size() < 1) throw InvalidInputError("LatentPoint: empty coordinate vector");
    if (!coords.allFinite()) throw InvalidInputError("LatentPoint: non-finite coordinates");
    if (space == Space::Simplex) {
        if (coords.minCoeff() < -1e-12)
            throw InvalidInputError("LatentPoint: simplex point with negative entry");
        if (std::abs(coords.sum() - 1.0) > 1e-9)
            throw InvalidInputError("LatentPoint: simplex point does not sum to 1");
    }
}

KernelConfig::KernelConfig(double g, KernelMetric m, double floor)
    : gamma(g), metric(m), clr_floor(floor) {
    if (!(gamma >= 0.0)) throw InvalidInputError("KernelConfig: gamma must be nonnegative");
    if (!(clr_floor > 0.0)) throw InvalidInputError("KernelConfig: clr floor must be positive");
}

ClrVector clr_transform(const LatentPoint& p, double floor) {
    if (p.space != Space::Simplex)
        throw InvalidInputError("clr_transform: input must be a simplex point");
    if (!(floor > 0.0)) throw InvalidInputError("clr_transform: floor must be positive");
    if (!p.coords.allFinite()) throw InvalidInputError("clr_transform: non-finite input");

    Eigen::VectorXd q = p.coords.cwiseMax(floor);
    q /= q.sum();
    Eigen::VectorXd logs = q.array().log();
    ClrVector out;
    out.coords = logs.array() - logs.mean();
    return out;
}

namespace {

Eigen::VectorXd metric_coords(const LatentPoint& p, const KernelConfig& cfg) {
    if (cfg.metric == KernelMetric::ClrSqEuclidean) return clr_transform(p, cfg.clr_floor).coords;
    return p.coords;
}

}  // namespace

double kernel_value(const LatentPoint& a, const LatentPoint& b, const KernelConfig& cfg) {
    if (a.dim() != b.dim())
        throw InvalidInputError("kernel_value: dimension mismatch");
    if (a.space != b.space)
        throw InvalidInputError("kernel_value: mixed latent spaces");
    if (cfg.metric == KernelMetric::ClrSqEuclidean && a.space != Space::Simplex)
        throw InvalidInputError("kernel_value: clr metric requires simplex points");
    Eigen::VectorXd da = metric_coords(a, cfg);
    Eigen::VectorXd db = metric_coords(b, cfg);
    return std::exp(-cfg.gamma * (da - db).squaredNorm());
}

KernelMatrix kernel_matrix(const std::vector<LatentPoint>& points, const KernelConfig& cfg) {
    if (points.empty()) throw InvalidInputError("kernel_matrix: empty point list");
    const int n = static_cast<int>(points.size());

    // Transform once, then fill the Gram matrix symmetrically.
    std::vector<Eigen::VectorXd> coords(n);
    for (int i = 0; i < n; ++i) {
        if (points[i].space != points[0].space)
            throw InvalidInputError("kernel_matrix: mixed latent spaces");
        coords[i] = metric_coords(points[i], cfg);
    }

    KernelMatrix km;
    km.config = cfg;
    km.entries.resize(n, n);
    for (int i = 0; i < n; ++i) {
        km.entries(i, i) = 1.0;
        for (int j = i + 1; j < n; ++j) {
            double v = std::exp(-cfg.gamma * (coords[i] - coords[j]).squaredNorm());
            km.entries(i, j) = v;
            km.entries(j, i) = v;
        }
    }
    return km;
}

Eigen::VectorXd kernel_row(const std::vector<LatentPoint>& points, const LatentPoint& test,
                           const KernelConfig& cfg) {
    Eigen::VectorXd row(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        row(static_cast<int>(i)) = kernel_value(points[i], test, cfg);
    return row;
}

double median_sq_distance(const std::vector<LatentPoint>& points, const KernelConfig& cfg) {
    const int n = static_cast<int>(points.size());
    if (n < 2) throw InvalidInputError("median_sq_distance: need at least two points");
    std::vector<Eigen::VectorXd> coords(n);
    for (int i = 0; i < n; ++i) coords[i] = metric_coords(points[i], cfg);
    std::vector<double> d2;
    d2.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) d2.push_back((coords[i] - coords[j]).squaredNorm());
    std::size_t mid = d2.size() / 2;
    std::nth_element(d2.begin(), d2.begin() + mid, d2.end());
    return d2[mid];
}

}  // namespace speedcp
