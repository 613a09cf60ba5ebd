#include "speedcp/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace speedcp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd working_coords(const LatentPoint& p, KernelMetric metric, double floor) {
    if (metric == KernelMetric::ClrSqEuclidean && p.space == Space::Simplex)
        return clr_transform(p, floor).coords;
    return p.coords;
}
}  // namespace

bool PredictionSet::infinite() const { return std::isinf(lower) || std::isinf(upper); }

double split_cp_cutoff(const Eigen::VectorXd& scores, double alpha) {
    const int n = static_cast<int>(scores.size());
    if (n < 1) throw InvalidInputError("split_cp_cutoff: empty scores");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw InvalidInputError("split_cp_cutoff: alpha not in (0,1)");
    int r = static_cast<int>(std::ceil((n + 1) * (1.0 - alpha)));
    if (r > n) return kInf;
    std::vector<double> s(scores.data(), scores.data() + n);
    std::nth_element(s.begin(), s.begin() + (r - 1), s.end());
    return s[r - 1];
}

double weighted_quantile_cutoff(const Eigen::VectorXd& scores, const Eigen::VectorXd& weights,
                                double weight_inf, double alpha) {
    const int n = static_cast<int>(scores.size());
    if (n < 1) throw InvalidInputError("weighted_quantile_cutoff: empty scores");
    if (weights.size() != n)
        throw InvalidInputError("weighted_quantile_cutoff: weight length mismatch");
    const double total = weights.sum() + weight_inf;
    if (!(total > 0.0)) throw InvalidInputError("weighted_quantile_cutoff: zero total weight");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return scores(a) < scores(b); });
    double cum = 0.0;
    const double need = (1.0 - alpha) * total;
    for (int idx : order) {
        cum += weights(idx);
        if (cum >= need - 1e-12 * total) return scores(idx);
    }
    return kInf;
}

double localized_cp_cutoff(const Eigen::VectorXd& calib_scores,
                           const std::vector<LatentPoint>& calib_points,
                           const LatentPoint& test, const KernelConfig& cfg, double alpha) {
    const int n = static_cast<int>(calib_scores.size());
    if (n < 1) throw InvalidInputError("localized_cp_cutoff: empty scores");
    if (static_cast<int>(calib_points.size()) != n)
        throw InvalidInputError("localized_cp_cutoff: scores/points length mismatch");
    Eigen::VectorXd w = kernel_row(calib_points, test, cfg);
    return weighted_quantile_cutoff(calib_scores, w, 1.0, alpha);  // k(test, test) = 1
}

int BinAssignment::assign(const LatentPoint& p) const {
    Eigen::VectorXd x = working_coords(p, metric, clr_floor);
    if (x.size() != centers.cols())
        throw InvalidInputError("BinAssignment: dimension mismatch");
    int best = 0;
    double best_d = kInf;
    for (int b = 0; b < centers.rows(); ++b) {
        double d = (centers.row(b).transpose() - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = b;
        }
    }
    return best;
}

BinAssignment make_bins(const std::vector<LatentPoint>& points, int n_bins, std::uint64_t seed) {
    const int n = static_cast<int>(points.size());
    if (n < 1) throw InvalidInputError("make_bins: no points");
    if (n_bins < 1) throw InvalidInputError("make_bins: n_bins must be positive");

    BinAssignment bins;
    bins.metric = points[0].space == Space::Simplex ? KernelMetric::ClrSqEuclidean
                                                    : KernelMetric::SqEuclidean;
    const int dim = points[0].dim();
    Eigen::MatrixXd X(n, dim);
    for (int i = 0; i < n; ++i)
        X.row(i) = working_coords(points[i], bins.metric, bins.clr_floor).transpose();

    // Count distinct rows (exact comparison is fine for generated data).
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        for (int j = 0; j < dim; ++j) {
            if (X(a, j) != X(b, j)) return X(a, j) < X(b, j);
        }
        return false;
    });
    int distinct = 1;
    for (int i = 1; i < n; ++i)
        if (X.row(order[i]) != X.row(order[i - 1])) ++distinct;
    if (n_bins > distinct)
        throw InvalidInputError("make_bins: n_bins exceeds number of distinct points");

    // Seeded Lloyd iterations from distinct initial centers.
    std::mt19937_64 rng(mix_seed(seed));
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    bins.centers.resize(n_bins, dim);
    int filled = 0;
    for (int i = 0; i < n && filled < n_bins; ++i) {
        bool dup = false;
        for (int b = 0; b < filled && !dup; ++b)
            dup = (bins.centers.row(b) - X.row(perm[i])).squaredNorm() == 0.0;
        if (!dup) bins.centers.row(filled++) = X.row(perm[i]);
    }

    std::vector<int> label(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = kInf;
            for (int b = 0; b < n_bins; ++b) {
                double d = (bins.centers.row(b) - X.row(i)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = b;
                }
            }
            if (best != label[i]) {
                label[i] = best;
                changed = true;
            }
        }
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_bins, dim);
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_bins);
        for (int i = 0; i < n; ++i) {
            sums.row(label[i]) += X.row(i);
            counts(label[i]) += 1.0;
        }
        for (int b = 0; b < n_bins; ++b)
            if (counts(b) > 0.0) bins.centers.row(b) = sums.row(b) / counts(b);
        if (!changed && iter > 0) break;
    }
    return bins;
}

CoverageReport evaluate_coverage(const std::vector<PredictionSet>& sets,
                                 const Eigen::VectorXd& truths, const BinAssignment& bins,
                                 const std::vector<LatentPoint>& test_points, double alpha) {
    const int n = static_cast<int>(sets.size());
    if (truths.size() != n || static_cast<int>(test_points.size()) != n)
        throw InvalidInputError("evaluate_coverage: length mismatch");
    if (n < 1) throw InvalidInputError("evaluate_coverage: no sets");

    CoverageReport rep;
    rep.target = 1.0 - alpha;
    const int nb = bins.n_bins();
    std::vector<int> covered(nb, 0), count(nb, 0), infinite(nb, 0);
    std::vector<double> size_sum(nb, 0.0);
    std::vector<int> finite_count(nb, 0);

    for (int i = 0; i < n; ++i) {
        int b = bins.assign(test_points[i]);
        ++count[b];
        if (sets[i].contains(truths(i))) ++covered[b];
        if (sets[i].infinite()) {
            ++infinite[b];
        } else {
            size_sum[b] += sets[i].size();
            ++finite_count[b];
        }
    }

    int covered_total = 0, finite_total = 0;
    double size_total = 0.0;
    for (int b = 0; b < nb; ++b) {
        if (count[b] == 0) continue;
        BinStats st;
        st.bin = b;
        st.n_test = count[b];
        st.coverage = static_cast<double>(covered[b]) / count[b];
        st.mean_size = finite_count[b] > 0 ? size_sum[b] / finite_count[b] : 0.0;
        st.n_infinite = infinite[b];
        rep.per_bin.push_back(st);
        covered_total += covered[b];
        finite_total += finite_count[b];
        size_total += size_sum[b];
        rep.n_infinite += infinite[b];
    }
    rep.marginal_coverage = static_cast<double>(covered_total) / n;
    rep.mean_size = finite_total > 0 ? size_total / finite_total : 0.0;
    return rep;
}

}  // namespace speedcp
