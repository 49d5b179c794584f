#pragma once

#include "unilasso/data.hpp"

#include <vector>

namespace unilasso {

/**
 * Stage 1: one intercept/slope pair per feature plus the n x p matrices of
 * in-sample and leave-one-out fitted values (linear-predictor scale).
 *
 * `std_intercepts`/`std_slopes` are the same fits on the standardized
 * feature scale; `intercepts`/`slopes` are mapped back to the raw scale.
 * Constant columns have slope 0 and are flagged in `stats.constant_mask`.
 */
struct UnivariateFits {
    Family family = Family::gaussian;
    Vector intercepts;
    Vector slopes;
    Vector std_intercepts;
    Vector std_slopes;
    Matrix insample_fits;
    Matrix loo_fits;
    StandardizationStats stats;
    std::vector<bool> separated;  // binomial only: slope hit the cap

    Index p() const { return slopes.size(); }
};

/// Largest allowed |slope| on the standardized scale for logistic fits.
inline constexpr double kSeparationCap = 10.0;
/// Fitted probabilities are clamped to [kProbClamp, 1 - kProbClamp].
inline constexpr double kProbClamp = 1e-5;
/// LOO formulas fail when 1 - leverage drops below this.
inline constexpr double kLeverageGuard = 1e-12;

UnivariateFits fit_univariate_gaussian(const Matrix& z, const Vector& y, const StandardizationStats& stats,
                                       int threads = 1);

/// Closed-form LOO fits from the hat diagonal H_ii = (1 + z_ij^2) / n.
Matrix loo_fits_gaussian(const UnivariateFits& fits, const Matrix& z, const Vector& y);

/// Per-column logistic regression by IRLS: four Newton steps, continuing
/// (up to 25) while the deviance still moves.
UnivariateFits fit_univariate_binomial(const Matrix& z, const Vector& y, const StandardizationStats& stats,
                                       int threads = 1);

/// Approximate LOO linear predictors from the final IRLS weighted
/// least-squares step. Capped (separated) columns return the in-sample fit.
Matrix loo_fits_binomial(const UnivariateFits& fits, const Matrix& z, const Vector& y);

/// LOO fits of a weighted simple regression of `u` on `z` with weights `w`:
/// u_i - (u_i - fit_i) / (1 - H_ii). Throws NumericalError when a leverage
/// is within kLeverageGuard of 1; `column` only labels the message.
Vector weighted_loo_column(const Vector& u, const Vector& w, const Eigen::Ref<const Vector>& z, Index column = 0);

/// sqrt(2/n): below this |corr(y, x_j)| the LOO fit tends to correlate
/// negatively with y.
double loo_correlation_threshold(Index n);

/// Standardize, fit every column, and fill both fit matrices.
UnivariateFits univariate_stage(const Dataset& data, int threads = 1);

}  // namespace unilasso
