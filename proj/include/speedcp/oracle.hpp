#pragma once

#include "speedcp/path_core.hpp"

namespace speedcp {

// Slow, independent solver for the penalized pinball objective, used to
// validate path results. Parameterized in the primal (eta, c) with
// c = upsilon / lambda, so the dual box constraints disappear:
//   min_{eta,c}  sum_i l_alpha(S_i - phi_i.eta - K_i.c) + (lambda/2) c'Kc
struct PrimalSolution {
    Eigen::VectorXd fitted;     // g(X_i)
    Eigen::VectorXd eta;        // d
    Eigen::VectorXd c;          // n
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Objective of (eta, c) evaluated exactly; any feasible point upper-bounds
// the optimum, so the best iterate is reported.
double primal_objective(const ProblemData& data, double lambda, const Eigen::VectorXd& eta,
                        const Eigen::VectorXd& c);

// Objective value implied by a path state (upsilon, eta) at lambda.
double path_objective(const ProblemData& data, const ElbowPartition& part, double lambda);

PrimalSolution solve_primal(const ProblemData& data, double lambda, double tol = 1e-9,
                            int max_iter = 20000);

// Partition recovered from a direct primal solve: the dual is thresholded at
// the box bounds to pick tags, then the elbow system restates exact values.
// Rescues the active set iteration when it stalls on a degenerate instance;
// the elbow may come back empty (all duals at a bound).
ElbowPartition partition_by_refit(const ProblemData& data, double lambda);

// Binary search over the imputed test score, each probe refitting the
// augmented (n+1)-point problem from scratch; the validation counterpart of
// the S-path. Returns +infinity when even the top of the bracket is covered.
double cutoff_by_refit(const ProblemData& calib, const Eigen::VectorXd& kernel_test_row,
                       double kernel_test_self, const Eigen::VectorXd& phi_test, double lambda,
                       int bisection_steps = 40);

}  // namespace speedcp
