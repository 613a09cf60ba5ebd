#pragma once

#include <Eigen/Dense>
#include <vector>

#include "speedcp/common.hpp"
#include "speedcp/kernel.hpp"

namespace speedcp {

// One regularized kernel quantile regression instance: conformity scores,
// linear feature map values Phi (n x d, full column rank), and the kernel
// Gram matrix over the same points.
struct ProblemData {
    Eigen::VectorXd scores;  // n
    Eigen::MatrixXd phi;     // n x d
    Eigen::MatrixXd kernel;  // n x n
    double alpha = 0.1;

    ProblemData() = default;
    ProblemData(Eigen::VectorXd s, Eigen::MatrixXd ph, Eigen::MatrixXd k, double a);

    int n() const { return static_cast<int>(scores.size()); }
    int d() const { return static_cast<int>(phi.cols()); }
};

enum class SetTag : unsigned char { Elbow, Left, Right };

// KKT-consistent state: which points sit at the elbow (zero residual, free
// dual) and which are pinned at -alpha (left) or 1-alpha (right).
struct ElbowPartition {
    std::vector<SetTag> tag;  // n
    std::vector<int> elbow;   // ordered indices with tag == Elbow
    Eigen::VectorXd upsilon;  // n, dual coefficients
    Eigen::VectorXd eta;      // d, linear coefficients

    int n() const { return static_cast<int>(tag.size()); }
    bool in_elbow(int i) const { return tag[i] == SetTag::Elbow; }
    // Position of sample i within the ordered elbow list, -1 if absent.
    int elbow_pos(int i) const;
};

struct FitEvaluation {
    Eigen::VectorXd fitted;     // g(X_i)
    Eigen::VectorXd residuals;  // S_i - g(X_i)
};

// g(X_i) = phi_i . eta + (1/lambda) sum_j upsilon_j K_ij
FitEvaluation evaluate_fit(const ProblemData& data, const ElbowPartition& part, double lambda);

struct ElbowSolution {
    Eigen::VectorXd upsilon_elbow;  // |E|
    Eigen::VectorXd eta;            // d
    bool used_ridge = false;
};

// Solves the per-breakpoint block system
//   [ (1/l) K_EE  Phi_E ] [v_E ]   [ S_E - (1/l)(-a K_EL 1 + (1-a) K_ER 1) ]
//   [ Phi_E^T     0     ] [eta ] = [ a Phi_L^T 1 - (1-a) Phi_R^T 1         ]
// Retries once with a small ridge on K_EE when near-singular.
ElbowSolution solve_elbow_system(const ProblemData& data, const std::vector<int>& elbow,
                                 const std::vector<SetTag>& tag, double lambda);

// Same coefficient matrix, caller-supplied right-hand side. Used for the
// path slope systems; rhs is [|E| block; d block], unknowns [v_E; eta].
ElbowSolution solve_elbow_rhs(const ProblemData& data, const std::vector<int>& elbow,
                              double lambda, const Eigen::VectorXd& rhs_top,
                              const Eigen::VectorXd& rhs_bottom);

struct KktReport {
    double max_bound_violation = 0.0;     // upsilon outside [-a, 1-a] on E
    double max_pin_violation = 0.0;       // upsilon != bound on L/R
    double max_sign_violation = 0.0;      // residual sign wrong on L/R
    double max_elbow_residual = 0.0;      // |residual| on E
    double max_orthogonality = 0.0;       // |Phi^T upsilon| per coordinate
    double tol = 0.0;
    bool pass() const;
};

KktReport check_kkt(const ProblemData& data, const ElbowPartition& part, double lambda,
                    double tol);

// Rebuilds upsilon: bounds on L/R, solved values on E; eta from the solve.
ElbowPartition assemble_partition(const ProblemData& data, const std::vector<SetTag>& tag,
                                  double lambda);

// Fixed-lambda active-set refinement: starting from `tag`, repeatedly solves
// the elbow system and moves the worst KKT violator (dual out of bounds ->
// pinned set; wrong residual sign on L/R -> elbow) until consistent.
// `frozen` (if >= 0) is an index whose tag is never changed; its pinned dual
// still enters the system. Keeps Phi_E full column rank when growing E.
ElbowPartition active_set_solve(const ProblemData& data, double lambda,
                                std::vector<SetTag> tag, int frozen = -1,
                                int max_moves = 0);

}  // namespace speedcp
