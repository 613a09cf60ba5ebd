#include "speedcp/s_path.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace speedcp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieTol = 1e-12;

double score_ceiling(const Eigen::VectorXd& scores) {
    std::vector<double> s(scores.data(), scores.data() + scores.size());
    std::sort(s.begin(), s.end());
    auto quantile = [&](double q) {
        double pos = q * (static_cast<double>(s.size()) - 1.0);
        int lo = static_cast<int>(std::floor(pos));
        int hi = std::min<int>(lo + 1, static_cast<int>(s.size()) - 1);
        return s[lo] + (pos - lo) * (s[hi] - s[lo]);
    };
    double iqr = quantile(0.75) - quantile(0.25);
    double top = s.back();
    return top + 10.0 * iqr + 1e-9 * (1.0 + std::abs(top));
}

ProblemData augment(const CalibrationModel& model, const LatentPoint& test,
                    const Eigen::VectorXd& phi_test, double s_test) {
    const int n = model.n();
    if (phi_test.size() != model.d())
        throw InvalidInputError("init_s_path: phi_test dimension mismatch");
    Eigen::VectorXd scores(n + 1);
    scores.head(n) = model.scores;
    scores(n) = s_test;
    Eigen::MatrixXd phi(n + 1, model.d());
    phi.topRows(n) = model.phi;
    phi.row(n) = phi_test.transpose();
    Eigen::MatrixXd kernel(n + 1, n + 1);
    kernel.topLeftCorner(n, n) = model.kernel;
    Eigen::VectorXd row = kernel_row(model.points, test, model.kcfg);
    kernel.block(0, n, n, 1) = row;
    kernel.block(n, 0, 1, n) = row.transpose();
    kernel(n, n) = 1.0;
    return ProblemData(std::move(scores), std::move(phi), std::move(kernel), model.alpha);
}

std::size_t tag_hash(const std::vector<SetTag>& tag) {
    std::size_t h = 1469598103934665603ULL;
    for (SetTag t : tag) {
        h ^= static_cast<std::size_t>(t) + 0x9e37ULL;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

std::pair<double, double> absolute_residual_interval(double mu, double cutoff) {
    if (std::isinf(cutoff)) return {-kInf, kInf};
    return {mu - cutoff, mu + cutoff};
}

SPathState init_s_path(const CalibrationModel& model, const LatentPoint& test,
                       const Eigen::VectorXd& phi_test) {
    const int n = model.n();
    if (model.fit.n() != n) throw InvalidInputError("init_s_path: model has no fitted state");
    const double lambda = model.lambda_hat;
    const double smin = model.scores.minCoeff();
    const double smax = model.scores.maxCoeff();
    const double range = std::max(smax - smin, 1e-9);

    SPathState state;
    state.lambda = lambda;
    state.ceiling = score_ceiling(model.scores);
    state.aug = augment(model, test, phi_test, smin - range - 1.0);

    // Small-S solve with the test point pinned left; its score only needs to
    // be far enough below the fit that the pin is genuine.
    std::vector<SetTag> tag = model.fit.tag;
    tag.push_back(SetTag::Left);
    ElbowPartition part;
    bool small_ok = true;
    try {
        part = active_set_solve(state.aug, lambda, tag, n);
    } catch (const NumericalError&) {
        small_ok = false;
    }
    if (!small_ok) {
        // Large-S system: test pinned right, solution again independent of S.
        state.rank_fallback = true;
        state.aug.scores(state.test_index()) = state.ceiling + range + 1.0;
        tag = model.fit.tag;
        tag.push_back(SetTag::Right);
        part = active_set_solve(state.aug, lambda, tag, n);
    }
    double s1 = evaluate_fit(state.aug, part, lambda).fitted(n);

    // Enter the test point into the elbow at its fitted value; by continuity
    // its dual is -alpha (small S) or 1-alpha (large-S fallback) there.
    state.aug.scores(n) = s1;
    state.s_value = s1;
    tag = part.tag;
    tag[n] = SetTag::Elbow;
    state.partition = active_set_solve(state.aug, lambda, tag, n);
    return state;
}

Cutoff trace_s_path(SPathState state, double u, int max_events) {
    const int n1 = state.aug.n();
    const int test = state.test_index();
    const double alpha = state.aug.alpha;
    const double lambda = state.lambda;
    if (!(u > -alpha && u < 1.0 - alpha))
        throw InvalidInputError("trace_s_path: u outside (-alpha, 1-alpha)");
    if (max_events <= 0) max_events = 4 * n1;
    const double scale = 1.0 + state.aug.scores.cwiseAbs().maxCoeff();

    Cutoff out;
    out.u_draw = u;
    out.s_star = kInf;
    out.s_rand = kInf;
    out.events.push_back({state.s_value, SEventKind::Hit, test, state.test_upsilon()});

    double stall_s = state.s_value;
    std::set<std::size_t> seen{tag_hash(state.partition.tag)};

    for (int ev = 0; ev < max_events; ++ev) {
        if (state.partition.tag[test] != SetTag::Elbow)
            throw PathStallError("trace_s_path: test point left the elbow unexpectedly");
        const std::vector<int>& elbow = state.partition.elbow;
        const int tpos = state.partition.elbow_pos(test);

        Eigen::VectorXd e_test = Eigen::VectorXd::Zero(static_cast<int>(elbow.size()));
        e_test(tpos) = 1.0;
        ElbowSolution slope = solve_elbow_rhs(state.aug, elbow, lambda, e_test,
                                              Eigen::VectorXd::Zero(state.aug.d()));

        // dg/dS for every point; residual slope of a pinned point is -dg.
        Eigen::MatrixXd k_cols(n1, elbow.size());
        for (std::size_t c = 0; c < elbow.size(); ++c)
            k_cols.col(static_cast<int>(c)) = state.aug.kernel.col(elbow[c]);
        Eigen::VectorXd dg =
            state.aug.phi * slope.eta + (1.0 / lambda) * (k_cols * slope.upsilon_elbow);
        FitEvaluation fit = evaluate_fit(state.aug, state.partition, lambda);

        const double du_test = slope.upsilon_elbow(tpos);
        const double u_test = state.partition.upsilon(test);
        if (std::isinf(out.s_rand) && u_test >= u) out.s_rand = state.s_value;

        // Candidate steps: pinned points hitting the elbow, elbow duals
        // hitting a bound. The test point only counts moving upward.
        double best = kInf;
        int best_idx = -1;
        SEventKind best_kind = SEventKind::Hit;
        auto consider = [&](double delta, int idx, SEventKind kind) {
            if (!(delta > kTieTol * scale)) return;
            if (delta < best - kTieTol * scale ||
                (delta < best + kTieTol * scale && (best_idx < 0 || idx < best_idx))) {
                best = delta;
                best_idx = idx;
                best_kind = kind;
            }
        };
        for (int i = 0; i < n1; ++i) {
            if (state.partition.tag[i] == SetTag::Elbow) {
                int pos = state.partition.elbow_pos(i);
                double d = slope.upsilon_elbow(pos);
                if (std::abs(d) < 1e-14) continue;
                if (i == test) {
                    if (d > 0.0)
                        consider((1.0 - alpha - state.partition.upsilon(i)) / d, i,
                                 SEventKind::TestExit);
                    continue;
                }
                double bound = d > 0.0 ? 1.0 - alpha : -alpha;
                consider((bound - state.partition.upsilon(i)) / d, i,
                         d > 0.0 ? SEventKind::LeaveRight : SEventKind::LeaveLeft);
            } else {
                if (std::abs(dg(i)) < 1e-14) continue;
                consider(fit.residuals(i) / dg(i), i, SEventKind::Hit);
            }
        }

        double s_next = state.s_value + best;

        // Affine inversion for the randomized cutoff inside this segment.
        if (std::isinf(out.s_rand) && du_test > 0.0) {
            double s_cross = state.s_value + (u - u_test) / du_test;
            if (s_cross <= s_next + kTieTol * scale) out.s_rand = s_cross;
        }

        if (best_idx < 0 || s_next > state.ceiling) {
            double s_stop = std::min(s_next, state.ceiling);
            double u_stop = u_test + (std::isinf(s_stop - state.s_value)
                                          ? 0.0
                                          : du_test * (s_stop - state.s_value));
            out.events.push_back({s_stop, SEventKind::Ceiling, -1, u_stop});
            if (out.s_rand > s_stop) out.s_rand = kInf;
            return out;
        }

        if (best_kind == SEventKind::TestExit) {
            out.s_star = s_next;
            if (std::isinf(out.s_rand)) out.s_rand = s_next;  // u at the top boundary
            out.events.push_back({s_next, SEventKind::TestExit, test, 1.0 - alpha});
            return out;
        }

        // Apply the event and re-solve at the new S.
        state.s_value = s_next;
        state.aug.scores(test) = s_next;
        std::vector<SetTag> tag = state.partition.tag;
        switch (best_kind) {
            case SEventKind::Hit:
                tag[best_idx] = SetTag::Elbow;
                break;
            case SEventKind::LeaveLeft:
                tag[best_idx] = SetTag::Left;
                break;
            case SEventKind::LeaveRight:
                tag[best_idx] = SetTag::Right;
                break;
            default:
                break;
        }
        state.partition = assemble_partition(state.aug, tag, lambda);
        out.events.push_back({s_next, best_kind, best_idx, state.partition.upsilon(test)});

        if (s_next > stall_s + kTieTol * scale) {
            stall_s = s_next;
            seen.clear();
        }
        if (!seen.insert(tag_hash(tag)).second)
            throw PathStallError("trace_s_path: cycling partitions without advancing S");
    }
    // Budget exhausted without the test point exiting; treat as unbounded.
    if (out.s_rand > state.s_value) out.s_rand = kInf;
    return out;
}

double draw_u(std::uint64_t seed, double alpha) {
    std::uint64_t bits = mix_seed(seed ^ 0xd1b54a32d192ed03ULL);
    double unit = static_cast<double>(bits >> 11) * 0x1.0p-53;
    // Keep strictly interior.
    unit = std::min(std::max(unit, 1e-12), 1.0 - 1e-12);
    return -alpha + unit;
}

PredictionSet predict_set(const CalibrationModel& model, const LatentPoint& test,
                          const Eigen::VectorXd& phi_test, std::uint64_t u_seed,
                          ScoreInverter inverter) {
    double u = draw_u(u_seed, model.alpha);
    SPathState state = init_s_path(model, test, phi_test);
    Cutoff cut = trace_s_path(state, u);

    PredictionSet set;
    set.s_star = cut.s_star;
    set.s_rand = cut.s_rand;
    set.u_draw = u;
    set.n_events = static_cast<int>(cut.events.size());
    set.rank_fallback = state.rank_fallback;
    set.mu_hat = model.mu.fitted ? predict_mu(model.mu, test) : 0.0;
    auto iv = inverter ? inverter(set.mu_hat, cut.s_rand)
                       : absolute_residual_interval(set.mu_hat, cut.s_rand);
    set.lower = iv.first;
    set.upper = iv.second;
    return set;
}

std::vector<PredictionSet> predict_batch(const CalibrationModel& model,
                                         const std::vector<LatentPoint>& tests,
                                         const Eigen::MatrixXd& phi_tests, std::uint64_t seed,
                                         int jobs) {
    if (static_cast<int>(tests.size()) != phi_tests.rows())
        throw InvalidInputError("predict_batch: tests and phi_tests length mismatch");
    std::vector<PredictionSet> out(tests.size());
    parallel_for(static_cast<int>(tests.size()), jobs, [&](int i) {
        out[i] = predict_set(model, tests[i], phi_tests.row(i).transpose(),
                             derive_seed(seed, static_cast<std::uint64_t>(i)));
    });
    return out;
}

}  // namespace speedcp
