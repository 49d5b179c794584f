#pragma once

#include "unilasso/data.hpp"
#include "unilasso/solver.hpp"

#include <functional>
#include <span>
#include <vector>

namespace unilasso {

struct CvResult {
    Vector lambdas;
    Vector cv_mean;       // squared error (gaussian) or deviance (binomial)
    Vector cv_se;
    Vector cv_misclass;   // binomial only, empty otherwise
    Index idx_min = 0;
    Index idx_1se = 0;
    std::vector<int> fold_assignment;  // 0-based fold id per row
    int n_folds = 0;

    Index selected(SelectionRule rule) const { return rule == SelectionRule::lambda_1se ? idx_1se : idx_min; }
};

/// Seeded shuffle, then round-robin fold ids 0..k-1.
std::vector<int> assign_folds(Index n, int n_folds, std::uint64_t seed);

/// Returns held-out linear predictors (rows of `test`, one column per
/// lambda) from a model fit on `train`.
using FoldFitter =
    std::function<Matrix(std::span<const Index> train, std::span<const Index> test, const Vector& lambdas)>;

/**
 * Generic K-fold driver: each fold calls `fitter` with the shared grid,
 * scores held-out rows, and aggregates glmnet-style (fold-size-weighted mean,
 * se = sqrt(weighted variance / (K - 1))).
 */
CvResult cross_validate(const Vector& response, const Vector& weights, Family family, const Vector& lambdas,
                        std::vector<int> folds, int n_folds, const FoldFitter& fitter, int threads = 1);

/// K-fold CV of the solver path on `problem`. The lambda grid comes from
/// the full problem; `folds` overrides the seeded assignment.
CvResult kfold_cv(const SolverProblem& problem, const FitConfig& config, const std::vector<int>* folds = nullptr);
CvResult kfold_cv(const SolverProblem& problem, const Vector& lambdas, const FitConfig& config,
                  const std::vector<int>* folds = nullptr);

double cv_error_at_selected(const CvResult& cv);

/// Picks idx_min / idx_1se from the curves.
void select_indices(CvResult& cv);

}  // namespace unilasso
