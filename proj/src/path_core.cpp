#include "speedcp/path_core.hpp"

#include "speedcp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace speedcp {

ProblemData::ProblemData(Eigen::VectorXd s, Eigen::MatrixXd ph, Eigen::MatrixXd k, double a)
    : scores(std::move(s)), phi(std::move(ph)), kernel(std::move(k)), alpha(a) {
    const int nn = n();
    if (nn < 1) throw InvalidInputError("ProblemData: empty scores");
    if (phi.rows() != nn || kernel.rows() != nn || kernel.cols() != nn)
        throw InvalidInputError("ProblemData: dimension mismatch");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInputError("ProblemData: alpha not in (0,1)");
    if (nn < d() + 1) throw InvalidInputError("ProblemData: need n >= d + 1");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(phi);
    qr.setThreshold(1e-10);
    if (qr.rank() < d())
        throw NumericalError("ProblemData: columns of phi are not linearly independent");
}

int ElbowPartition::elbow_pos(int i) const {
    for (std::size_t k = 0; k < elbow.size(); ++k)
        if (elbow[k] == i) return static_cast<int>(k);
    return -1;
}

FitEvaluation evaluate_fit(const ProblemData& data, const ElbowPartition& part, double lambda) {
    if (!(lambda > 0.0)) throw InvalidInputError("evaluate_fit: lambda must be positive");
    FitEvaluation out;
    out.fitted = data.phi * part.eta + (1.0 / lambda) * (data.kernel * part.upsilon);
    out.residuals = data.scores - out.fitted;
    return out;
}

namespace {

// Assembles the (|E|+d) block matrix shared by the breakpoint solve and the
// slope systems.
Eigen::MatrixXd block_matrix(const ProblemData& data, const std::vector<int>& elbow,
                             double lambda, double ridge) {
    const int e = static_cast<int>(elbow.size());
    const int d = data.d();
    Eigen::MatrixXd A(e + d, e + d);
    A.setZero();
    for (int r = 0; r < e; ++r) {
        for (int c = 0; c < e; ++c) A(r, c) = data.kernel(elbow[r], elbow[c]) / lambda;
        A(r, r) += ridge;
        A.block(r, e, 1, d) = data.phi.row(elbow[r]);
        A.block(e, r, d, 1) = data.phi.row(elbow[r]).transpose();
    }
    return A;
}

ElbowSolution solve_block(const ProblemData& data, const std::vector<int>& elbow, double lambda,
                          const Eigen::VectorXd& rhs) {
    const int e = static_cast<int>(elbow.size());
    const int d = data.d();
    if (e < 1) throw NumericalError("solve_elbow_system: empty elbow set");

    for (int attempt = 0; attempt < 2; ++attempt) {
        const double ridge = attempt == 0 ? 0.0 : 1e-10;
        Eigen::MatrixXd A = block_matrix(data, elbow, lambda, ridge);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        lu.setThreshold(1e-12);
        if (!lu.isInvertible()) continue;
        Eigen::VectorXd sol = lu.solve(rhs);
        if (!sol.allFinite()) continue;
        // Accept only if the solve is actually consistent.
        double resid = (A * sol - rhs).cwiseAbs().maxCoeff();
        double scale = 1.0 + rhs.cwiseAbs().maxCoeff();
        if (resid > 1e-6 * scale) continue;
        ElbowSolution out;
        out.upsilon_elbow = sol.head(e);
        out.eta = sol.tail(d);
        out.used_ridge = attempt > 0;
        return out;
    }
    // Rank-deficient but consistent (duplicate kernel rows, singular gram):
    // the minimum-norm solution is still a valid representative and tends to
    // keep the duals inside their box.
    {
        Eigen::MatrixXd A = block_matrix(data, elbow, lambda, 0.0);
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
        Eigen::VectorXd sol = cod.solve(rhs);
        double resid = (A * sol - rhs).cwiseAbs().maxCoeff();
        double scale = 1.0 + rhs.cwiseAbs().maxCoeff();
        if (sol.allFinite() && resid <= 1e-6 * scale) {
            ElbowSolution out;
            out.upsilon_elbow = sol.head(e);
            out.eta = sol.tail(d);
            out.used_ridge = true;
            return out;
        }
    }
    throw NumericalError("solve_elbow_system: singular block system (degenerate elbow)");
}

}  // namespace

ElbowSolution solve_elbow_rhs(const ProblemData& data, const std::vector<int>& elbow,
                              double lambda, const Eigen::VectorXd& rhs_top,
                              const Eigen::VectorXd& rhs_bottom) {
    Eigen::VectorXd rhs(rhs_top.size() + rhs_bottom.size());
    rhs << rhs_top, rhs_bottom;
    return solve_block(data, elbow, lambda, rhs);
}

ElbowSolution solve_elbow_system(const ProblemData& data, const std::vector<int>& elbow,
                                 const std::vector<SetTag>& tag, double lambda) {
    if (!(lambda > 0.0)) throw InvalidInputError("solve_elbow_system: lambda must be positive");
    const int e = static_cast<int>(elbow.size());
    const int d = data.d();
    const double a = data.alpha;

    Eigen::VectorXd rhs_top(e);
    Eigen::VectorXd rhs_bottom = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < data.n(); ++i) {
        if (tag[i] == SetTag::Left)
            rhs_bottom += a * data.phi.row(i).transpose();
        else if (tag[i] == SetTag::Right)
            rhs_bottom -= (1.0 - a) * data.phi.row(i).transpose();
    }
    for (int r = 0; r < e; ++r) {
        double boundary = 0.0;  // (1/l)(-a K_EL 1 + (1-a) K_ER 1)
        for (int i = 0; i < data.n(); ++i) {
            if (tag[i] == SetTag::Left)
                boundary -= a * data.kernel(elbow[r], i);
            else if (tag[i] == SetTag::Right)
                boundary += (1.0 - a) * data.kernel(elbow[r], i);
        }
        rhs_top(r) = data.scores(elbow[r]) - boundary / lambda;
    }
    return solve_elbow_rhs(data, elbow, lambda, rhs_top, rhs_bottom);
}

ElbowPartition assemble_partition(const ProblemData& data, const std::vector<SetTag>& tag,
                                  double lambda) {
    ElbowPartition part;
    part.tag = tag;
    for (int i = 0; i < data.n(); ++i)
        if (tag[i] == SetTag::Elbow) part.elbow.push_back(i);
    ElbowSolution sol = solve_elbow_system(data, part.elbow, tag, lambda);
    part.upsilon.resize(data.n());
    for (int i = 0; i < data.n(); ++i) {
        if (tag[i] == SetTag::Left)
            part.upsilon(i) = -data.alpha;
        else if (tag[i] == SetTag::Right)
            part.upsilon(i) = 1.0 - data.alpha;
    }
    for (std::size_t k = 0; k < part.elbow.size(); ++k)
        part.upsilon(part.elbow[k]) = sol.upsilon_elbow(static_cast<int>(k));
    part.eta = sol.eta;
    return part;
}

ElbowPartition active_set_solve(const ProblemData& data, double lambda, std::vector<SetTag> tag,
                                int frozen, int max_moves) {
    const int n = data.n();
    const int d = data.d();
    const double a = data.alpha;
    const double score_scale = 1.0 + data.scores.cwiseAbs().maxCoeff();
    const double tol_bound = 1e-9;
    const double tol_resid = 1e-9 * score_scale;
    if (max_moves <= 0) max_moves = 20 * (n + d) + 50;

    auto elbow_of = [&](const std::vector<SetTag>& t) {
        std::vector<int> e;
        for (int i = 0; i < n; ++i)
            if (t[i] == SetTag::Elbow) e.push_back(i);
        return e;
    };

    // Provisional fit used only to rank candidates while growing the elbow.
    Eigen::VectorXd last_resid = data.scores.array() - data.scores.mean();
    std::unordered_set<std::size_t> seen;
    bool bland = false;
    int last_pinned = -1;

    for (int move = 0; move < max_moves; ++move) {
        std::vector<int> elbow = elbow_of(tag);

        // The saddle system needs Phi_E with full column rank, hence |E| >= d.
        bool grow_retry = false;
        while (static_cast<int>(elbow.size()) < d || elbow.empty()) {
            int best = -1;
            double best_score = std::numeric_limits<double>::infinity();
            for (int i = 0; i < n; ++i) {
                if (tag[i] == SetTag::Elbow || i == frozen) continue;
                if (i == last_pinned && !grow_retry) continue;
                Eigen::MatrixXd sub(elbow.size() + 1, d);
                for (std::size_t r = 0; r < elbow.size(); ++r) sub.row(r) = data.phi.row(elbow[r]);
                sub.row(elbow.size()) = data.phi.row(i);
                Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
                qr.setThreshold(1e-10);
                if (qr.rank() <= static_cast<int>(std::min<std::size_t>(elbow.size(), d)) &&
                    static_cast<int>(elbow.size()) < d)
                    continue;  // would not raise the rank
                double c = std::abs(last_resid(i));
                if (c < best_score) {
                    best_score = c;
                    best = i;
                }
            }
            if (best < 0) {
                if (!grow_retry) {
                    grow_retry = true;  // fall back to the excluded candidate
                    continue;
                }
                throw NumericalError("active_set_solve: cannot grow elbow to rank d");
            }
            tag[best] = SetTag::Elbow;
            elbow.push_back(best);
            std::sort(elbow.begin(), elbow.end());
        }

        ElbowPartition part;
        try {
            part = assemble_partition(data, tag, lambda);
        } catch (const NumericalError&) {
            // Moves can strip the elbow of the rank the saddle system needs
            // (one-hot columns losing their last member); recover directly.
            if (frozen < 0) return partition_by_refit(data, lambda);
            throw;
        }
        FitEvaluation fit = evaluate_fit(data, part, lambda);
        last_resid = fit.residuals;

        // Entry moves (wrong residual sign on a pinned point) take priority
        // over exit moves (elbow dual out of bounds); pinning first can empty
        // the elbow and re-admit the same point forever. In bland mode the
        // smallest violating index moves instead of the worst one.
        int worst = -1;
        double worst_mag = 0.0;
        SetTag worst_dest = SetTag::Elbow;
        for (int i = 0; i < n; ++i) {
            if (i == frozen || tag[i] == SetTag::Elbow) continue;
            double v = tag[i] == SetTag::Left ? fit.residuals(i) : -fit.residuals(i);
            if (v > tol_resid && v > worst_mag) {
                worst = i;
                worst_mag = v;
                worst_dest = SetTag::Elbow;
                if (bland) break;
            }
        }
        if (worst < 0) {
            for (int i = 0; i < n; ++i) {
                if (i == frozen || tag[i] != SetTag::Elbow) continue;
                double lo = -a - part.upsilon(i), hi = part.upsilon(i) - (1.0 - a);
                if (lo > tol_bound && lo > worst_mag) {
                    worst = i;
                    worst_mag = lo;
                    worst_dest = SetTag::Left;
                }
                if (hi > tol_bound && hi > worst_mag) {
                    worst = i;
                    worst_mag = hi;
                    worst_dest = SetTag::Right;
                }
                if (worst == i && bland) break;
            }
        }
        if (worst < 0) return part;
        tag[worst] = worst_dest;
        last_pinned = worst_dest == SetTag::Elbow ? -1 : worst;

        std::size_t h = 1469598103934665603ULL;
        for (int i = 0; i < n; ++i)
            h = (h ^ static_cast<std::size_t>(tag[i])) * 1099511628211ULL;
        if (!seen.insert(h).second) {
            if (bland) {
                // Degenerate ties can defeat both pivot rules; recover the
                // partition from a direct solve instead. The refit cannot
                // honor a frozen index, so that case stays fatal.
                if (frozen < 0) return partition_by_refit(data, lambda);
                throw NumericalError("active_set_solve: cycling between partitions");
            }
            bland = true;
            seen.clear();
        }
    }
    if (frozen < 0) return partition_by_refit(data, lambda);
    throw NumericalError("active_set_solve: did not reach a KKT-consistent state");
}

bool KktReport::pass() const {
    return max_bound_violation <= tol && max_pin_violation <= tol && max_sign_violation <= tol &&
           max_elbow_residual <= tol && max_orthogonality <= tol;
}

KktReport check_kkt(const ProblemData& data, const ElbowPartition& part, double lambda,
                    double tol) {
    KktReport rep;
    rep.tol = tol;
    const double a = data.alpha;
    FitEvaluation fit = evaluate_fit(data, part, lambda);
    for (int i = 0; i < data.n(); ++i) {
        const double r = fit.residuals(i);
        const double u = part.upsilon(i);
        switch (part.tag[i]) {
            case SetTag::Elbow:
                rep.max_elbow_residual = std::max(rep.max_elbow_residual, std::abs(r));
                rep.max_bound_violation =
                    std::max({rep.max_bound_violation, -a - u, u - (1.0 - a)});
                break;
            case SetTag::Left:
                rep.max_pin_violation = std::max(rep.max_pin_violation, std::abs(u + a));
                rep.max_sign_violation = std::max(rep.max_sign_violation, r);  // want r < 0
                break;
            case SetTag::Right:
                rep.max_pin_violation = std::max(rep.max_pin_violation, std::abs(u - (1.0 - a)));
                rep.max_sign_violation = std::max(rep.max_sign_violation, -r);  // want r > 0
                break;
        }
    }
    Eigen::VectorXd orth = data.phi.transpose() * part.upsilon;
    rep.max_orthogonality = orth.cwiseAbs().maxCoeff();
    return rep;
}

}  // namespace speedcp
