#include "unilasso/verify.hpp"

#include "unilasso/oracle.hpp"
#include "unilasso/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace unilasso {

bool VerifyReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.passed(); });
}

namespace {

VerifyCheck loo_check(const Dataset& data, const UnivariateFits& fits) {
    const Standardized s = standardize(data.features);
    const Matrix refit = oracle::loo_refit(s.z, data.response, data.family);
    double worst = 0.0;
    Index at_row = 0, at_col = 0;
    for (Index j = 0; j < data.p(); ++j) {
        if (s.stats.constant_mask[j] || (data.family == Family::binomial && fits.separated[j])) continue;
        for (Index i = 0; i < data.n(); ++i) {
            const double d = std::abs(refit(i, j) - fits.loo_fits(i, j));
            if (d > worst) {
                worst = d;
                at_row = i;
                at_col = j;
            }
        }
    }
    VerifyCheck c;
    c.name = data.family == Family::binomial ? "approximate LOO vs refit" : "closed-form LOO vs refit";
    c.value = worst;
    c.tolerance = data.family == Family::binomial ? kBinomialLooTolerance : kGaussianLooTolerance;
    c.detail = "row " + std::to_string(at_row + 1) + ", column " + std::to_string(at_col + 1);
    return c;
}

}  // namespace

VerifyReport verify_dataset(const Dataset& data, const FitConfig& solver_config) {
    validate(data);
    if (data.n() > oracle::kMaxLooRows) {
        throw ValidationError("verify handles at most " + std::to_string(oracle::kMaxLooRows) + " rows (got " +
                              std::to_string(data.n()) + "); subsample the data first");
    }
    if (data.p() > oracle::kMaxGradientColumns) {
        throw ValidationError("verify handles at most " + std::to_string(oracle::kMaxGradientColumns) +
                              " features (got " + std::to_string(data.p()) + "); select a subset first");
    }
    VerifyReport report;
    const UnivariateFits fits = univariate_stage(data);
    report.checks.push_back(loo_check(data, fits));

    // Stage-2 solver against projected gradient.
    const Stage2Design design = build_stage2(data, fits, Stage2Options::from_config(solver_config));
    const PathSolution path = fit_path(design.problem, solver_config);
    double kkt = 0.0;
    Index kkt_at = 0;
    for (Index k = 0; k < path.size(); ++k) {
        const double v = max_kkt_violation(design.problem, path.lambdas(k), path.intercepts(k), path.coefs.col(k));
        if (v > kkt) {
            kkt = v;
            kkt_at = k;
        }
    }
    double rel = 0.0;
    Index rel_at = 0;
    for (int s = 0; s < 5; ++s) {
        const Index k = (path.size() - 1) * s / 4;
        const auto pg = oracle::projected_gradient(design.problem, path.lambdas(k));
        const double d = std::abs(path.objective(k) - pg.objective) / std::max(std::abs(pg.objective), 1e-12);
        if (d > rel) {
            rel = d;
            rel_at = k;
        }
    }
    report.checks.push_back({"solver objective vs projected gradient (relative)", rel, kObjectiveTolerance,
                             "path index " + std::to_string(rel_at + 1)});
    report.checks.push_back(
        {"KKT residual over path", kkt, kKktTolerance, "path index " + std::to_string(kkt_at + 1)});

    // Non-LOO guided fit against the adaptive-lasso form.
    for (bool sign : {true, false}) {
        Stage2Options guided;
        guided.loo = false;
        guided.sign_constraint = sign;
        Stage2Options adaptive;
        adaptive.kind = Stage2Kind::adaptive;
        adaptive.sign_constraint = sign;
        const Stage2Design a = build_stage2(data, fits, guided);
        const Stage2Design b = build_stage2(data, fits, adaptive);
        const Vector grid = lambda_grid(lambda_max(a.problem), solver_config.n_lambda,
                                        solver_config.effective_min_ratio(data.n(), a.problem.q()));
        const CollapsedPath pa = collapse_path(a, fit_path(a.problem, grid, solver_config));
        const CollapsedPath pb = collapse_path(b, fit_path(b.problem, grid, solver_config));
        double worst = (pa.gamma0 - pb.gamma0).cwiseAbs().maxCoeff();
        worst = std::max(worst, (pa.gammas - pb.gammas).cwiseAbs().maxCoeff());
        report.checks.push_back({sign ? "non-LOO vs sign-constrained adaptive lasso" : "non-LOO vs adaptive lasso",
                                 worst, kEquivalenceTolerance,
                                 std::to_string(grid.size()) + " shared lambdas"});
    }
    return report;
}

}  // namespace unilasso
