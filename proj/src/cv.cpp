#include "unilasso/cv.hpp"

#include "unilasso/parallel.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace unilasso {

std::vector<int> assign_folds(Index n, int n_folds, std::uint64_t seed) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    // Hand-rolled Fisher-Yates: std::shuffle's draw sequence is not pinned
    // by the standard.
    std::mt19937_64 rng(seed);
    for (Index i = n - 1; i > 0; --i) {
        const auto k = static_cast<Index>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(k)]);
    }
    std::vector<int> folds(static_cast<std::size_t>(n));
    for (Index pos = 0; pos < n; ++pos) {
        folds[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] = static_cast<int>(pos % n_folds);
    }
    return folds;
}

void select_indices(CvResult& cv) {
    const Index nl = cv.cv_mean.size();
    Index best = 0;
    for (Index k = 1; k < nl; ++k) {
        if (cv.cv_mean(k) < cv.cv_mean(best)) best = k;
    }
    cv.idx_min = best;
    const double bound = cv.cv_mean(best) + cv.cv_se(best);
    cv.idx_1se = best;
    for (Index k = 0; k <= best; ++k) {
        if (cv.cv_mean(k) <= bound) {
            cv.idx_1se = k;
            break;
        }
    }
}

CvResult cross_validate(const Vector& response, const Vector& weights, Family family, const Vector& lambdas,
                        std::vector<int> folds, int n_folds, const FoldFitter& fitter, int threads) {
    const Index n = response.size();
    if (n < n_folds) {
        throw ValidationError("cross-validation needs n >= n_folds (n=" + std::to_string(n) +
                              ", folds=" + std::to_string(n_folds) + ")");
    }
    if (static_cast<Index>(folds.size()) != n) throw ValidationError("fold assignment length must equal n");
    const Index nl = lambdas.size();

    std::vector<std::vector<Index>> test_rows(static_cast<std::size_t>(n_folds));
    std::vector<std::vector<Index>> train_rows(static_cast<std::size_t>(n_folds));
    for (Index i = 0; i < n; ++i) {
        const int f = folds[static_cast<std::size_t>(i)];
        if (f < 0 || f >= n_folds) throw ValidationError("fold id out of range");
        for (int g = 0; g < n_folds; ++g) {
            (g == f ? test_rows : train_rows)[static_cast<std::size_t>(g)].push_back(i);
        }
    }

    Matrix fold_err(n_folds, nl);
    Matrix fold_mis(n_folds, nl);
    Vector fold_weight(n_folds);
    for (int f = 0; f < n_folds; ++f) {
        double tw = 0.0, trw = 0.0;
        for (Index i : test_rows[static_cast<std::size_t>(f)]) tw += weights(i);
        for (Index i : train_rows[static_cast<std::size_t>(f)]) trw += weights(i);
        if (!(tw > 0.0) || !(trw > 0.0)) {
            throw ValidationError("fold " + std::to_string(f + 1) + " has zero total weight");
        }
        fold_weight(f) = tw;
    }

    parallel_for(n_folds, threads, [&](long f) {
        const auto& test = test_rows[static_cast<std::size_t>(f)];
        const auto& train = train_rows[static_cast<std::size_t>(f)];
        const Matrix eta = fitter(train, test, lambdas);
        for (Index k = 0; k < nl; ++k) {
            double err = 0.0, mis = 0.0;
            for (std::size_t r = 0; r < test.size(); ++r) {
                const Index i = test[r];
                const double e = eta(static_cast<Index>(r), k);
                const double w = weights(i);
                const double y = response(i);
                if (family == Family::binomial) {
                    const double prob = std::clamp(1.0 / (1.0 + std::exp(-e)), 1e-5, 1.0 - 1e-5);
                    err -= 2.0 * w * (y * std::log(prob) + (1.0 - y) * std::log(1.0 - prob));
                    mis += w * (((prob > 0.5) ? 1.0 : 0.0) != y ? 1.0 : 0.0);
                } else {
                    err += w * (y - e) * (y - e);
                }
            }
            fold_err(f, k) = err / fold_weight(f);
            fold_mis(f, k) = mis / fold_weight(f);
        }
    });

    CvResult cv;
    cv.lambdas = lambdas;
    cv.n_folds = n_folds;
    cv.fold_assignment = std::move(folds);
    const double wsum = fold_weight.sum();
    auto aggregate = [&](const Matrix& raw, Vector& mean, Vector* se) {
        mean = (raw.transpose() * fold_weight) / wsum;
        if (!se) return;
        se->resize(nl);
        for (Index k = 0; k < nl; ++k) {
            const double var = (fold_weight.array() * (raw.col(k).array() - mean(k)).square()).sum() / wsum;
            (*se)(k) = std::sqrt(var / static_cast<double>(n_folds - 1));
        }
    };
    aggregate(fold_err, cv.cv_mean, &cv.cv_se);
    if (family == Family::binomial) aggregate(fold_mis, cv.cv_misclass, nullptr);
    select_indices(cv);
    return cv;
}

namespace {

SolverProblem subset_problem(const SolverProblem& problem, std::span<const Index> rows) {
    SolverProblem sub;
    const auto m = static_cast<Index>(rows.size());
    sub.design.resize(m, problem.q());
    sub.target.resize(m);
    sub.weights.resize(m);
    sub.offset.resize(m);
    for (Index r = 0; r < m; ++r) {
        const Index i = rows[static_cast<std::size_t>(r)];
        sub.design.row(r) = problem.design.row(i);
        sub.target(r) = problem.target(i);
        sub.weights(r) = problem.weights(i);
        sub.offset(r) = problem.offset(i);
    }
    sub.penalty_factors = problem.penalty_factors;
    sub.lower_bounds = problem.lower_bounds;
    sub.family = problem.family;
    return sub;
}

}  // namespace

CvResult kfold_cv(const SolverProblem& problem, const FitConfig& config, const std::vector<int>* folds) {
    check_config(config);
    const Vector lambdas =
        lambda_grid(lambda_max(problem), config.n_lambda, config.effective_min_ratio(problem.n(), problem.q()));
    return kfold_cv(problem, lambdas, config, folds);
}

CvResult kfold_cv(const SolverProblem& problem, const Vector& lambdas, const FitConfig& config,
                  const std::vector<int>* folds) {
    check_problem(problem);
    if (problem.n() < config.n_folds) {
        throw ValidationError("cross-validation needs n >= n_folds (n=" + std::to_string(problem.n()) +
                              ", folds=" + std::to_string(config.n_folds) + ")");
    }
    std::vector<int> assignment = folds ? *folds : assign_folds(problem.n(), config.n_folds, config.seed);
    FoldFitter fitter = [&](std::span<const Index> train, std::span<const Index> test, const Vector& grid) {
        const SolverProblem fold_problem = subset_problem(problem, train);
        const PathSolution path = fit_path(fold_problem, grid, config);
        const SolverProblem held_out = subset_problem(problem, test);
        Matrix eta(static_cast<Index>(test.size()), grid.size());
        for (Index k = 0; k < grid.size(); ++k) {
            eta.col(k) = linear_predictor(held_out, path.intercepts(k), path.coefs.col(k));
        }
        return eta;
    };
    return cross_validate(problem.target, problem.weights, problem.family, lambdas, std::move(assignment),
                          config.n_folds, fitter, config.threads);
}

double cv_error_at_selected(const CvResult& cv) { return cv.cv_mean(cv.idx_min); }

}  // namespace unilasso
