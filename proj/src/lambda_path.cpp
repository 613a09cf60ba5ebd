#include "speedcp/lambda_path.hpp"

#include "speedcp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

namespace speedcp {

namespace {

constexpr double kTieTol = 1e-12;

std::vector<int> argsort(const Eigen::VectorXd& v) {
    std::vector<int> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v(a) < v(b); });
    return idx;
}

}  // namespace

LambdaInit init_lambda_path(const ProblemData& data) {
    const int n = data.n();
    const int d = data.d();
    const double a = data.alpha;
    if (n < 2) throw InvalidInputError("init_lambda_path: need n >= 2");

    // Anchor point: the order statistic whose single free dual can absorb the
    // orthogonality constraint. With an intercept the count of right points
    // must be the integer inside (alpha n - 1, alpha n); scanning positions
    // and keeping the most interior dual covers general pivot columns too.
    std::vector<int> order = argsort(data.scores);
    int i0 = -1, pivot = -1;
    double u0 = 0.0, best_margin = -std::numeric_limits<double>::infinity();
    std::vector<SetTag> tag(n, SetTag::Left);
    for (int pos = n - 1; pos >= 0; --pos) {
        const int cand = order[pos];
        int pcol = -1;
        for (int j = 0; j < d; ++j)
            if (std::abs(data.phi(cand, j)) > 1e-12) {
                pcol = j;
                break;
            }
        if (pcol < 0) continue;
        double num = 0.0;
        for (int p = 0; p < n; ++p) {
            if (p == pos) continue;
            num += a * data.phi(order[p], pcol);
            if (p > pos) num -= data.phi(order[p], pcol);
        }
        const double u = num / data.phi(cand, pcol);
        const double margin = std::min(u + a, 1.0 - a - u);
        if (margin >= -1e-12 && margin > best_margin) {
            best_margin = margin;
            i0 = cand;
            u0 = u;
            pivot = pcol;
            for (int p = 0; p < n; ++p)
                tag[order[p]] = p > pos ? SetTag::Right : SetTag::Left;
            tag[cand] = SetTag::Elbow;
        }
    }
    if (i0 < 0)
        throw NumericalError(
            "init_lambda_path: degenerate initialization, upsilon_i0 outside [-alpha, 1-alpha]; "
            "perturb alpha or the scores");
    const double s0 = data.scores(i0);
    const double phi0 = data.phi(i0, pivot);

    // f(X_i): kernel part of the fit at the lambda -> infinity state.
    Eigen::VectorXd f(n);
    for (int i = 0; i < n; ++i) {
        double v = data.kernel(i, i0) * u0;
        for (int j = 0; j < n; ++j) {
            if (j == i0) continue;
            if (tag[j] == SetTag::Left)
                v -= a * data.kernel(i, j);
            else
                v += (1.0 - a) * data.kernel(i, j);
        }
        f(i) = v;
    }

    double lambda1 = -std::numeric_limits<double>::infinity();
    int i1 = -1;
    for (int i = 0; i < n; ++i) {
        if (i == i0) continue;
        const double ratio = data.phi(i, pivot) / phi0;
        const double den = data.scores(i) - ratio * s0;
        if (std::abs(den) < 1e-14) continue;
        const double cand = (f(i) - ratio * f(i0)) / den;
        if (cand > 0.0 && cand > lambda1) {
            lambda1 = cand;
            i1 = i;
        }
    }
    if (i1 < 0)
        throw NumericalError("init_lambda_path: no valid entry event (degenerate scores)");

    LambdaInit init;
    init.lambda1 = lambda1;
    init.i0 = i0;
    init.i1 = i1;
    init.pivot_col = pivot;
    init.partition.tag = tag;
    init.partition.tag[i1] = SetTag::Elbow;
    init.partition.elbow = {std::min(i0, i1), std::max(i0, i1)};
    init.partition.upsilon.resize(n);
    for (int i = 0; i < n; ++i)
        init.partition.upsilon(i) = tag[i] == SetTag::Right ? 1.0 - a : -a;
    init.partition.upsilon(i0) = u0;
    // i1 keeps the bound value it carried just before entering the elbow.
    // eta at lambda1 keeps the anchor residual at zero: s0 = phi0 eta + f(i0)/lambda1.
    init.partition.eta = Eigen::VectorXd::Zero(d);
    init.partition.eta(pivot) = (s0 - f(i0) / lambda1) / phi0;
    return init;
}

namespace {

struct EventCandidate {
    double lambda;
    int index;
    PathEvent event;
};

// Starting state for the trace. The closed-form initialization is exact for
// d = 1 when the anchor dual lands strictly inside (-a, 1-a); for d > 1 the
// lambda -> infinity limit is a d-dimensional linear quantile fit, refined
// with the active-set solver at lambda1.
//
// When alpha n is an integer the large-lambda solution is a vertex of the
// dual box with an empty elbow, which no anchor can represent; the partition
// is then recovered from a direct solve, lowering lambda geometrically until
// the elbow supports the slope system.
std::pair<double, ElbowPartition> trace_start(const ProblemData& data) {
    double lambda1 = 1e6 * (1.0 + data.scores.cwiseAbs().maxCoeff());
    bool closed_form = false;
    LambdaInit init;
    try {
        init = init_lambda_path(data);
        lambda1 = init.lambda1;
        const double u0 = init.partition.upsilon(init.i0);
        const double margin = std::min(u0 + data.alpha, 1.0 - data.alpha - u0);
        closed_form = margin > 1e-8;
    } catch (const NumericalError&) {
    }

    if (closed_form) {
        if (data.d() == 1) return {lambda1, init.partition};
        try {
            return {lambda1, active_set_solve(data, lambda1, init.partition.tag)};
        } catch (const NumericalError&) {
        }
    }

    double lam = lambda1;
    for (int attempt = 0; attempt < 160; ++attempt, lam *= 0.8) {
        try {
            ElbowPartition part = partition_by_refit(data, lam);
            if (part.elbow.empty()) continue;
            Eigen::VectorXd s_elbow(part.elbow.size());
            for (std::size_t r = 0; r < part.elbow.size(); ++r)
                s_elbow(static_cast<int>(r)) = data.scores(part.elbow[r]);
            solve_elbow_rhs(data, part.elbow, 1.0, s_elbow,
                            Eigen::VectorXd::Zero(data.d()));
            return {lam, part};
        } catch (const NumericalError&) {
        }
    }
    throw NumericalError("trace_lambda_path: no workable starting lambda");
}

}  // namespace

LambdaTrace trace_lambda_path(const ProblemData& data, double lambda_min, int max_events) {
    const int n = data.n();
    const int d = data.d();
    const double a = data.alpha;
    if (max_events <= 0) max_events = 4 * n;

    auto [lambda, part] = trace_start(data);
    // lambda_min <= 0 selects a relative cutoff: factor 1e-4 when zero,
    // -lambda_min otherwise.
    if (lambda_min <= 0.0) lambda_min = (lambda_min == 0.0 ? 1e-4 : -lambda_min) * lambda;
    if (lambda <= lambda_min)
        throw InvalidInputError("trace_lambda_path: lambda_min is above the initial lambda");

    LambdaTrace trace;
    trace.breakpoints.push_back({lambda, part, PathEvent::Init, -1});

    std::vector<std::pair<std::size_t, double>> visited;  // (tag hash, lambda)
    auto tag_hash = [&](const std::vector<SetTag>& t) {
        std::size_t h = 1469598103934665603ULL;
        for (SetTag s : t) h = (h ^ static_cast<std::size_t>(s)) * 1099511628211ULL;
        return h;
    };

    const double scale = 1.0 + data.scores.cwiseAbs().maxCoeff();

    for (int ev = 0; ev < max_events; ++ev) {
        // Slope system: A [b_v; b_u] = [S_E; 0].
        // (K_EE, Phi; Phi^T, 0)(b_v; b_u) = (S_E; 0); lambda argument 1 makes
        // the kernel block unscaled, matching the finite-difference system in
        // the eta^lambda = lambda * eta parameterization.
        //
        // Degenerate breakpoints can hand over a partition that is consistent
        // at lambda itself but not just below it: an entering point whose dual
        // immediately leaves [-a, 1-a], or a pinned point at zero residual
        // whose residual moves against its tag. Neither produces a candidate
        // (the crossing sits exactly at lambda), so probe with the active-set
        // solver slightly below and restate.
        ElbowSolution slope;
        FitEvaluation fit;
        Eigen::VectorXd h(n);
        bool degenerate = false;
        for (int rep = 0;; ++rep) {
            const std::vector<int>& elbow = part.elbow;
            const int e = static_cast<int>(elbow.size());
            if (e == 0) {
                degenerate = true;
                break;
            }
            Eigen::VectorXd s_elbow(e);
            for (int r = 0; r < e; ++r) s_elbow(r) = data.scores(elbow[r]);
            try {
                slope = solve_elbow_rhs(data, elbow, 1.0, s_elbow, Eigen::VectorXd::Zero(d));
            } catch (const NumericalError&) {
                degenerate = true;  // stop the trace at the last breakpoint
                break;
            }
            fit = evaluate_fit(data, part, lambda);
            for (int i = 0; i < n; ++i) {
                double v = data.phi.row(i).dot(slope.eta);
                for (int r = 0; r < e; ++r) v += data.kernel(i, elbow[r]) * slope.upsilon_elbow(r);
                h(i) = v;
            }
            if (rep >= 3) break;

            bool bad = false;
            for (int r = 0; r < e && !bad; ++r) {
                const double u = part.upsilon(elbow[r]);
                const double bv = slope.upsilon_elbow(r);
                if (u <= -a + 1e-9 && bv > 1e-9) bad = true;
                if (u >= 1.0 - a - 1e-9 && bv < -1e-9) bad = true;
            }
            for (int i = 0; i < n && !bad; ++i) {
                if (part.tag[i] == SetTag::Elbow) continue;
                if (std::abs(data.scores(i) - fit.fitted(i)) > 1e-9 * scale) continue;
                const double dir = data.scores(i) - h(i);
                if (part.tag[i] == SetTag::Left && dir < -1e-9 * scale) bad = true;
                if (part.tag[i] == SetTag::Right && dir > 1e-9 * scale) bad = true;
            }
            if (!bad) break;
            try {
                ElbowPartition probe = active_set_solve(data, lambda * (1.0 - 1e-6), part.tag);
                if (probe.tag == part.tag) break;
                part = assemble_partition(data, probe.tag, lambda);
            } catch (const NumericalError&) {
                break;
            }
        }
        if (degenerate) break;
        const std::vector<int>& elbow = part.elbow;
        const int e = static_cast<int>(elbow.size());
        const Eigen::VectorXd& b_v = slope.upsilon_elbow;
        const Eigen::VectorXd& b_u = slope.eta;

        std::vector<EventCandidate> cands;
        for (int i = 0; i < n; ++i) {
            if (part.tag[i] == SetTag::Elbow) continue;
            const double den = data.scores(i) - h(i);
            if (std::abs(den) < 1e-14) continue;
            const double ratio = (fit.fitted(i) - h(i)) / den;
            if (ratio <= 0.0 || ratio >= 1.0 - kTieTol) continue;
            cands.push_back({lambda * ratio, i,
                             part.tag[i] == SetTag::Left ? PathEvent::EnterFromLeft
                                                         : PathEvent::EnterFromRight});
        }
        for (int r = 0; r < e; ++r) {
            const int i = elbow[r];
            if (std::abs(b_v(r)) < 1e-16) continue;
            const double to_left = (-a - part.upsilon(i)) / b_v(r);
            const double to_right = (1.0 - a - part.upsilon(i)) / b_v(r);
            if (to_left < -kTieTol * lambda && lambda + to_left > 0.0)
                cands.push_back({lambda + to_left, i, PathEvent::ExitToLeft});
            if (to_right < -kTieTol * lambda && lambda + to_right > 0.0)
                cands.push_back({lambda + to_right, i, PathEvent::ExitToRight});
        }

        double next_lambda = -std::numeric_limits<double>::infinity();
        for (const auto& c : cands) next_lambda = std::max(next_lambda, c.lambda);

        // Segment coefficients on [next breakpoint, lambda^l] for the current
        // partition: upsilon_E(t) = a + t b, eta(t) = a1 + b1 / t.
        LambdaSegment seg;
        seg.lambda_hi = lambda;
        seg.alpha = a;
        seg.elbow = elbow;
        seg.tag = part.tag;
        seg.upsilon_b = b_v;
        seg.upsilon_a.resize(e);
        for (int r = 0; r < e; ++r) seg.upsilon_a(r) = part.upsilon(elbow[r]) - lambda * b_v(r);
        seg.eta_a = b_u;
        seg.eta_b = lambda * (part.eta - b_u);

        if (cands.empty() || next_lambda <= lambda_min) {
            seg.lambda_lo = std::min(lambda, std::max(lambda_min, 0.0));
            trace.segments.push_back(seg);
            trace.reached_lambda_min = !cands.empty() || lambda_min < lambda;
            break;
        }

        // Smallest sample index wins among ties.
        EventCandidate chosen{next_lambda, n, PathEvent::Init};
        for (const auto& c : cands)
            if (c.lambda >= next_lambda - kTieTol * std::max(1.0, next_lambda) &&
                c.index < chosen.index)
                chosen = c;

        seg.lambda_lo = chosen.lambda;
        trace.segments.push_back(seg);

        std::vector<SetTag> tag = part.tag;
        switch (chosen.event) {
            case PathEvent::EnterFromLeft:
            case PathEvent::EnterFromRight:
                tag[chosen.index] = SetTag::Elbow;
                break;
            case PathEvent::ExitToLeft:
                tag[chosen.index] = SetTag::Left;
                break;
            case PathEvent::ExitToRight:
                tag[chosen.index] = SetTag::Right;
                break;
            case PathEvent::Init:
                break;
        }

        std::size_t h_tag = tag_hash(tag);
        for (const auto& [vh, vl] : visited)
            if (vh == h_tag && std::abs(vl - chosen.lambda) <= kTieTol * std::max(1.0, vl))
                throw PathStallError("trace_lambda_path: partition revisited at the same lambda");
        visited.emplace_back(h_tag, chosen.lambda);

        lambda = chosen.lambda;
        part = assemble_partition(data, tag, lambda);
        trace.breakpoints.push_back({lambda, part, chosen.event, chosen.index});
    }
    return trace;
}

ElbowPartition LambdaTrace::at(double lambda) const {
    if (breakpoints.empty()) throw InvalidInputError("LambdaTrace::at: empty trace");
    if (lambda >= breakpoints.front().lambda) return breakpoints.front().partition;
    const LambdaSegment* seg = nullptr;
    for (const auto& s : segments)
        if (lambda <= s.lambda_hi && lambda >= s.lambda_lo) {
            seg = &s;
            break;
        }
    if (!seg) {
        if (!segments.empty() && lambda < segments.back().lambda_lo)
            seg = &segments.back();
        else
            return breakpoints.back().partition;
    }
    lambda = std::clamp(lambda, seg->lambda_lo, seg->lambda_hi);
    ElbowPartition part;
    part.tag = seg->tag;
    part.elbow = seg->elbow;
    const int n = static_cast<int>(seg->tag.size());
    part.upsilon.resize(n);
    part.eta = seg->eta_a + seg->eta_b / lambda;
    for (int i = 0; i < n; ++i)
        part.upsilon(i) = seg->tag[i] == SetTag::Right ? 1.0 - seg->alpha : -seg->alpha;
    for (std::size_t r = 0; r < seg->elbow.size(); ++r)
        part.upsilon(seg->elbow[r]) =
            seg->upsilon_a(static_cast<int>(r)) + lambda * seg->upsilon_b(static_cast<int>(r));
    return part;
}

double pinball_loss(const Eigen::VectorXd& scores, const Eigen::VectorXd& fitted, double alpha) {
    double loss = 0.0;
    for (int i = 0; i < scores.size(); ++i) {
        const double z = scores(i) - fitted(i);
        loss += z > 0 ? (1.0 - alpha) * z : -alpha * z;
    }
    return loss;
}

namespace {

// One cross-validation fold for a fixed gamma: the trace on the training
// part plus everything needed to score held-out points at any lambda.
struct FoldFit {
    bool ok = false;
    LambdaTrace trace;
    Eigen::MatrixXd cross_kernel;  // n_holdout x n_train
    Eigen::MatrixXd phi_holdout;
    Eigen::VectorXd scores_holdout;
    Eigen::MatrixXd phi_train;
    double fallback_quantile = 0.0;  // split quantile used when the trace fails

    double loss_at(double lambda, double alpha) const {
        if (!ok) {
            Eigen::VectorXd fitted =
                Eigen::VectorXd::Constant(scores_holdout.size(), fallback_quantile);
            return pinball_loss(scores_holdout, fitted, alpha);
        }
        const double lam = std::clamp(lambda,
                                      trace.segments.empty()
                                          ? trace.breakpoints.back().lambda
                                          : trace.segments.back().lambda_lo,
                                      trace.breakpoints.front().lambda);
        ElbowPartition part = trace.at(lam);
        Eigen::VectorXd fitted =
            phi_holdout * part.eta + (1.0 / lam) * (cross_kernel * part.upsilon);
        return pinball_loss(scores_holdout, fitted, alpha);
    }
};

double split_quantile_of(const Eigen::VectorXd& s, double alpha) {
    const int n = static_cast<int>(s.size());
    int rank = std::min(static_cast<int>(std::ceil((n + 1) * (1.0 - alpha))), n);
    std::vector<double> v(s.data(), s.data() + n);
    std::nth_element(v.begin(), v.begin() + (rank - 1), v.end());
    return v[rank - 1];
}

}  // namespace

HyperParams select_hyperparams(const CalibrationInputs& calib,
                               const std::vector<double>& gamma_grid, int k_folds,
                               std::uint64_t seed, double lambda_min_factor, int jobs) {
    const int n = static_cast<int>(calib.points.size());
    const int d = static_cast<int>(calib.phi.cols());
    if (gamma_grid.empty()) throw InvalidInputError("select_hyperparams: empty gamma grid");
    if (k_folds < 2) throw InvalidInputError("select_hyperparams: need at least 2 folds");
    if (n - (n / k_folds + 1) < d + 1)
        throw InvalidInputError("select_hyperparams: folds leave too few training points");

    // Seeded shuffle, contiguous blocks.
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, 0x666f6c64));  // "fold"
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<int>> folds(k_folds);
    for (int i = 0; i < n; ++i) folds[i * k_folds / n].push_back(perm[i]);

    const int n_gamma = static_cast<int>(gamma_grid.size());
    std::vector<std::vector<FoldFit>> fits(n_gamma, std::vector<FoldFit>(k_folds));

    parallel_for(n_gamma * k_folds, jobs, [&](int slot) {
        const int gi = slot / k_folds;
        const int fj = slot % k_folds;
        KernelConfig cfg(gamma_grid[gi], calib.metric, calib.clr_floor);

        std::vector<char> held(n, 0);
        for (int i : folds[fj]) held[i] = 1;
        std::vector<LatentPoint> train_pts;
        std::vector<int> train_idx, ho_idx;
        for (int i = 0; i < n; ++i)
            (held[i] ? ho_idx : train_idx).push_back(i);
        for (int i : train_idx) train_pts.push_back(calib.points[i]);

        FoldFit& fit = fits[gi][fj];
        const int nt = static_cast<int>(train_idx.size());
        const int nh = static_cast<int>(ho_idx.size());
        Eigen::VectorXd s_train(nt);
        Eigen::MatrixXd phi_train(nt, d);
        for (int r = 0; r < nt; ++r) {
            s_train(r) = calib.scores(train_idx[r]);
            phi_train.row(r) = calib.phi.row(train_idx[r]);
        }
        fit.scores_holdout.resize(nh);
        fit.phi_holdout.resize(nh, d);
        fit.cross_kernel.resize(nh, nt);
        for (int r = 0; r < nh; ++r) {
            fit.scores_holdout(r) = calib.scores(ho_idx[r]);
            fit.phi_holdout.row(r) = calib.phi.row(ho_idx[r]);
            fit.cross_kernel.row(r) =
                kernel_row(train_pts, calib.points[ho_idx[r]], cfg).transpose();
        }
        fit.fallback_quantile = split_quantile_of(s_train, calib.alpha);
        try {
            ProblemData data(s_train, phi_train, kernel_matrix(train_pts, cfg).entries,
                             calib.alpha);
            fit.trace = trace_lambda_path(data, -lambda_min_factor, 4 * nt);
            fit.ok = !fit.trace.breakpoints.empty();
        } catch (const std::runtime_error&) {
            fit.ok = false;
        }
    });

    HyperParams hp;
    hp.seed = seed;
    hp.gamma_grid = gamma_grid;
    double best_loss = std::numeric_limits<double>::infinity();

    for (int gi = 0; gi < n_gamma; ++gi) {
        // Union of fold breakpoints, descending; fallback grid if all failed.
        std::vector<double> grid;
        for (int fj = 0; fj < k_folds; ++fj)
            if (fits[gi][fj].ok)
                for (const auto& bp : fits[gi][fj].trace.breakpoints) grid.push_back(bp.lambda);
        if (grid.empty()) grid.push_back(1.0);
        std::sort(grid.begin(), grid.end(), std::greater<>());
        grid.erase(std::unique(grid.begin(), grid.end(),
                               [](double x, double y) {
                                   return std::abs(x - y) <= 1e-12 * std::max(1.0, x);
                               }),
                   grid.end());

        std::vector<std::pair<double, double>> row;
        row.reserve(grid.size());
        for (double lam : grid) {
            double mean = 0.0;
            for (int fj = 0; fj < k_folds; ++fj) mean += fits[gi][fj].loss_at(lam, calib.alpha);
            mean /= k_folds;
            row.emplace_back(lam, mean);
            // Grid is descending, so strict improvement keeps the largest
            // lambda among ties.
            if (!std::isfinite(best_loss) ||
                mean < best_loss - 1e-15 * std::max(1.0, std::abs(best_loss))) {
                best_loss = mean;
                hp.gamma_hat = gamma_grid[gi];
                hp.lambda_hat = lam;
            }
        }
        hp.cv_table.push_back(std::move(row));
    }
    return hp;
}

}  // namespace speedcp
