#pragma once

#include "unilasso/data.hpp"

#include <limits>
#include <vector>

namespace unilasso {

/**
 * Penalized regression problem for the coordinate-descent solver.
 *
 * Gaussian objective:
 *     (1/(2W)) sum_i w_i (t_i - b0 - o_i - sum_j d_ij b_j)^2 + lambda sum_j pf_j |b_j|
 * Binomial objective:
 *     (1/W) sum_i w_i (log(1 + e^eta_i) - t_i eta_i) + lambda sum_j pf_j |b_j|
 * with W = sum_i w_i and b_j >= lower_bounds_j. Lower bounds are either 0
 * (non-negative mode, where |b_j| = b_j on the feasible set) or -infinity.
 * The intercept is never penalized and columns are never rescaled.
 */
struct SolverProblem {
    Matrix design;
    Vector target;
    Vector weights;
    Vector offset;
    Vector penalty_factors;
    Vector lower_bounds;
    Family family = Family::gaussian;

    Index n() const { return design.rows(); }
    Index q() const { return design.cols(); }
};

inline constexpr double kNoLowerBound = -std::numeric_limits<double>::infinity();

/// Unit weights, zero offset, unit penalty factors.
SolverProblem make_problem(Matrix design, Vector target, Family family, bool non_negative);

/// Throws ValidationError on inconsistent sizes, negative or all-zero
/// weights, non-finite penalty factors, or unsupported lower bounds.
void check_problem(const SolverProblem& problem);

struct Solution {
    double intercept = 0.0;
    Vector coefs;
    double objective = 0.0;
    long sweeps = 0;
};

struct PathSolution {
    Vector lambdas;  // strictly decreasing
    Vector intercepts;
    Matrix coefs;  // q x n_lambda
    std::vector<Index> n_active;
    Vector objective;
    std::vector<long> sweeps;

    Index size() const { return lambdas.size(); }
    Solution at(Index k) const;
};

/// Smallest lambda at which every penalized coefficient is zero. Zero when
/// no column can enter (then the path degenerates to the single point 0).
double lambda_max(const SolverProblem& problem);

/// n_lambda geometric points from lambda_max down to lambda_max * min_ratio.
Vector lambda_grid(double lambda_max, int n_lambda, double min_ratio);

/// Path over the default grid; warm starts between consecutive lambdas.
PathSolution fit_path(const SolverProblem& problem, const FitConfig& config);
/// Path over caller-supplied lambdas (must be non-increasing).
PathSolution fit_path(const SolverProblem& problem, const Vector& lambdas, const FitConfig& config);

/// Single minimizer at `lambda` (>= 0), optionally warm-started.
Solution solve_at(const SolverProblem& problem, double lambda, const FitConfig& config,
                  const Solution* warm = nullptr);

double objective_value(const SolverProblem& problem, double lambda, double intercept, const Vector& coefs);

/// eta_i = o_i + b0 + d_i . b
Vector linear_predictor(const SolverProblem& problem, double intercept, const Vector& coefs);

/// Largest KKT violation: intercept score, |G_j - lambda pf_j sign(b_j)|
/// for nonzero b_j, max(0, G_j - lambda pf_j) at the zero bound, and
/// max(0, |G_j| - lambda pf_j) at zero for free coordinates, where
/// G_j = (1/W) sum_i w_i d_ij (t_i - mu_i).
double max_kkt_violation(const SolverProblem& problem, double lambda, double intercept, const Vector& coefs);

}  // namespace unilasso
