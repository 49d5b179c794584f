#pragma once

#include "unilasso/data.hpp"

#include <string>
#include <vector>

namespace unilasso {

struct VerifyCheck {
    std::string name;
    double value = 0.0;      // max discrepancy found
    double tolerance = 0.0;  // pass when value <= tolerance
    std::string detail;

    bool passed() const { return value <= tolerance; }
};

struct VerifyReport {
    std::vector<VerifyCheck> checks;

    bool passed() const;
};

inline constexpr double kGaussianLooTolerance = 1e-8;
inline constexpr double kBinomialLooTolerance = 0.05;
inline constexpr double kObjectiveTolerance = 1e-6;  // relative
inline constexpr double kKktTolerance = 1e-6;
inline constexpr double kEquivalenceTolerance = 1e-6;

/**
 * Oracle checks on one dataset:
 *  - closed-form (gaussian) or approximate (binomial) LOO fits against
 *    explicit refits;
 *  - stage-2 path objective against projected gradient at 5 lambdas, and
 *    the largest KKT residual over the path;
 *  - non-LOO guided fits against the adaptive-lasso form on a shared grid,
 *    with and without the sign constraint.
 * `solver_config` drives the stage-2 path fits (tests inject a loose
 * tolerance through it). Throws ValidationError beyond the oracle limits.
 */
VerifyReport verify_dataset(const Dataset& data, const FitConfig& solver_config);

}  // namespace unilasso
