#pragma once

// Slow reference implementations. None of them calls into the solver or
// the closed-form LOO code they are used to check.

#include "unilasso/data.hpp"
#include "unilasso/solver.hpp"

namespace unilasso::oracle {

inline constexpr Index kMaxLooRows = 500;
inline constexpr Index kMaxGradientColumns = 200;

/// Exact leave-one-out fits by n explicit refits per column: ordinary least
/// squares for gaussian, 50-iteration Newton for binomial (linear-predictor
/// scale). Throws ValidationError when n > kMaxLooRows.
Matrix loo_refit(const Matrix& z, const Vector& y, Family family);

/// Simple logistic regression of y on (1, x) by `iterations` full Newton
/// steps. Returns (intercept, slope).
std::pair<double, double> logistic_newton(const Vector& x, const Vector& y, int iterations = 50);

struct GradientResult {
    double intercept = 0.0;
    Vector coefs;
    double objective = 0.0;
    long iterations = 0;
};

/// Proximal/projected gradient on the solver objective with step 1/L
/// (L from the eigenvalues of the intercept-augmented Gram matrix). Stops
/// when the objective changes by less than 1e-10 relative and the iterate
/// by less than 1e-13; errors after 1e6 iterations.
GradientResult projected_gradient(const SolverProblem& problem, double lambda);

/// Lawson-Hanson active-set NNLS: minimize ||t - b0 - D b||^2 over b >= 0,
/// with a free intercept when `intercept` is set. Errors after 10q outer
/// iterations.
struct NnlsResult {
    double intercept = 0.0;
    Vector coefs;
};
NnlsResult nnls_active_set(const Matrix& design, const Vector& target, bool intercept = true);

/// Ordinary least squares with intercept via the normal equations.
NnlsResult least_squares(const Matrix& design, const Vector& target, bool intercept = true);

/// Orthonormal-design thresholding rules, elementwise:
///   two-stage: sign(b)(|b| - lambda/|b|)_+   (0 when b = 0)
///   lasso:     sign(b)(|b| - lambda)_+
struct OrthonormalCoefficients {
    Vector unilasso;
    Vector lasso;
};
OrthonormalCoefficients orthonormal_formula(const Vector& beta_hats, double lambda);

}  // namespace unilasso::oracle
