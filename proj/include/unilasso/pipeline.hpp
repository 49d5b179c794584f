#pragma once

#include "unilasso/cv.hpp"
#include "unilasso/data.hpp"
#include "unilasso/solver.hpp"
#include "unilasso/univariate.hpp"

#include <optional>
#include <string>
#include <vector>

namespace unilasso {

enum class Variant { unilasso, unireg, polish, adaptive, no_sign, no_mag, lasso, no_loo, external, ols, matching };

std::string to_string(Variant variant);
Variant variant_from_string(const std::string& name);

/**
 * Final linear model eta(x) = gamma0 + sum_j gammas_j x_j on the raw
 * feature scale. For the univariate-guided variants gammas_j = slope_j *
 * thetas_j and gamma0 = theta0 + sum_l intercept_l * thetas_l.
 */
struct CollapsedModel {
    Family family = Family::gaussian;
    Variant variant = Variant::unilasso;
    double gamma0 = 0.0;
    Vector gammas;
    double theta0 = 0.0;
    Vector thetas;  // stage-2 coefficient per feature, 0 where excluded
    UnivariateFits univariate;
    double lambda_selected = 0.0;
    std::vector<std::string> feature_names;

    Index p() const { return gammas.size(); }
    Index support() const;
    std::vector<Index> support_set() const;
};

/// Collapsed coefficients at every point of a path. `stage` is 0 for all
/// points except the polish segment of a stitched path, which is 1.
struct CollapsedPath {
    Vector lambdas;
    Vector gamma0;
    Matrix gammas;  // p x n_points
    std::vector<int> stage;

    Index size() const { return lambdas.size(); }
};

/// How the stage-2 columns are built from the features.
enum class Stage2Kind {
    guided,    // univariate fits (LOO or in-sample), optionally sign-only
    lasso,     // standardized features, no bounds, unit penalty
    adaptive,  // raw features with penalty 1/|slope_j|
    external,  // external intercept + slope * x_j, non-negative
};

struct ExternalScores {
    Vector slopes;
    Vector intercepts;  // empty: ybar - slope_j * xbar_j on the training data
    Vector ses;         // optional
};

struct Stage2Options {
    Stage2Kind kind = Stage2Kind::guided;
    bool loo = true;
    bool sign_constraint = true;
    bool use_magnitude = true;
    const ExternalScores* external = nullptr;

    static Stage2Options from_config(const FitConfig& config);
};

/// Solver problem plus the affine map back to features: stage-2 column k
/// equals col_intercepts(k) + col_slopes(k) * x_{columns[k]}.
struct Stage2Design {
    SolverProblem problem;
    std::vector<Index> columns;
    Vector col_intercepts;
    Vector col_slopes;
    Index p = 0;
};

Stage2Design build_stage2(const Dataset& data, const UnivariateFits& fits, const Stage2Options& options);

/// gamma0 = b0 + sum_k a_k b_k and gamma_{columns[k]} = slope_k b_k.
std::pair<double, Vector> collapse(const Stage2Design& design, double intercept, const Vector& coefs);
CollapsedPath collapse_path(const Stage2Design& design, const PathSolution& path);

struct TwoStageFit {
    CollapsedModel model;
    CvResult cv;
    PathSolution path;
    CollapsedPath collapsed;
    Stage2Design design;
    Index selected = 0;
};

/// Full pipeline: stage 1, stage-2 path with K-fold CV over the shared
/// grid, collapse at the selected lambda. `offset` feeds the stage-2
/// solver (the polish step). With config.strict_cv the univariate fits
/// are recomputed inside every fold.
TwoStageFit fit_two_stage(const Dataset& data, const Stage2Options& options, const FitConfig& config,
                          Variant tag, const Vector* offset = nullptr);

/// The default estimator (LOO, sign constraint, magnitude).
TwoStageFit unilasso_cv(const Dataset& data, const FitConfig& config);

/// Honors config.loo / sign_constraint / use_magnitude; tags the variant.
TwoStageFit variant_fit(const Dataset& data, const FitConfig& config);

TwoStageFit lasso_cv(const Dataset& data, const FitConfig& config, const Vector* offset = nullptr);

/// Adaptive lasso with penalty factors 1/|slope_j| on the raw features,
/// optionally constrained to sign(gamma_j) in {0, sign(slope_j)}.
TwoStageFit adaptive_lasso_cv(const Dataset& data, const FitConfig& config, bool sign_constraint = false);

TwoStageFit unilasso_external(const Dataset& data, const ExternalScores& scores, const FitConfig& config);

/// Univariate intercepts, slopes and slope standard errors computed on a
/// separate sample.
ExternalScores external_scores_from(const Dataset& external);

/// lambda -> 0 limit of the stage-2 problem. Exact NNLS at lambda = 0 when
/// the stage-2 design has full column rank below n; otherwise the terminal
/// point of a path ending at 1e-8 * lambda_max.
CollapsedModel unireg(const Dataset& data, const FitConfig& config);

struct BootstrapIntervals {
    Vector estimate;
    Vector lower;
    Vector upper;
    Matrix draws;  // p x n_boot
    double level = 0.95;
};

/// Row-resampling percentile intervals for the uniReg coefficients.
BootstrapIntervals unireg_bootstrap_ci(const Dataset& data, const FitConfig& config, int n_boot, double level);

/// Least squares with intercept on the raw features.
CollapsedModel ols_fit(const Dataset& data);

struct PolishFit {
    CollapsedModel model;
    CollapsedPath stitched;
    Index stitch_index = 0;  // last point of the base segment
    TwoStageFit polish_stage;
};

/// Lasso CV on (X, y) with offset equal to the base fit's linear predictor;
/// final coefficients are base + polish.
PolishFit polish(const Dataset& data, const TwoStageFit& base, const FitConfig& config);

struct OvrModel {
    std::vector<double> classes;
    std::vector<CollapsedModel> models;

    /// n x K independent class probabilities (rows need not sum to 1).
    Matrix probabilities(const Matrix& x) const;
    /// Highest-probability class; ties go to the lowest class index.
    std::vector<double> classify(const Matrix& x) const;
};

/// One binomial fit per class (class k vs rest). Needs K >= 3 classes and
/// at least n_folds members in every class.
OvrModel ovr_multiclass(const Dataset& data, const FitConfig& config);

struct Prediction {
    Vector eta;
    Vector prob;  // binomial only
};

Prediction predict(const CollapsedModel& model, const Matrix& x);

/// Count of j with gamma_j * slope_j < 0.
Index sign_violations(const CollapsedModel& model);

}  // namespace unilasso
