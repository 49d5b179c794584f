#include "unilasso/pipeline.hpp"

#include "unilasso/csv.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace unilasso {

namespace {

constexpr const char* kVariantNames[] = {"unilasso", "unireg", "polish", "adaptive", "no_sign",  "no_mag",
                                         "lasso",    "no_loo", "external", "ols",    "matching"};

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double sigmoid(double eta) {
    return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

Vector subset(const Vector& v, std::span<const Index> rows) {
    Vector out(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Index>(r)) = v(rows[r]);
    return out;
}

std::vector<std::string> names_for(const Dataset& data) {
    return data.feature_names.empty() ? default_feature_names(data.p()) : data.feature_names;
}

CollapsedModel null_model(const Dataset& data, const UnivariateFits& fits, Variant tag) {
    CollapsedModel model;
    model.family = data.family;
    model.variant = tag;
    model.gammas = Vector::Zero(data.p());
    model.thetas = Vector::Zero(data.p());
    model.univariate = fits;
    model.feature_names = names_for(data);
    return model;
}

}  // namespace

std::string to_string(Variant variant) { return kVariantNames[static_cast<int>(variant)]; }

Variant variant_from_string(const std::string& name) {
    for (int k = 0; k < static_cast<int>(std::size(kVariantNames)); ++k) {
        if (name == kVariantNames[k]) return static_cast<Variant>(k);
    }
    throw ValidationError("unknown variant tag '" + name + "'");
}

Index CollapsedModel::support() const { return (gammas.array() != 0.0).count(); }

std::vector<Index> CollapsedModel::support_set() const {
    std::vector<Index> out;
    for (Index j = 0; j < gammas.size(); ++j) {
        if (gammas(j) != 0.0) out.push_back(j);
    }
    return out;
}

Stage2Options Stage2Options::from_config(const FitConfig& config) {
    Stage2Options options;
    options.loo = config.loo;
    options.sign_constraint = config.sign_constraint;
    options.use_magnitude = config.use_magnitude;
    return options;
}

Stage2Design build_stage2(const Dataset& data, const UnivariateFits& fits, const Stage2Options& options) {
    const Index n = data.n();
    const Index p = data.p();
    Stage2Design out;
    out.p = p;
    std::vector<Vector> cols;
    std::vector<double> a, b, pf;
    auto add = [&](Index j, Vector col, double intercept, double slope, double penalty) {
        out.columns.push_back(j);
        cols.push_back(std::move(col));
        a.push_back(intercept);
        b.push_back(slope);
        pf.push_back(penalty);
    };
    const auto& mask = fits.stats.constant_mask;
    bool non_negative = true;
    switch (options.kind) {
        case Stage2Kind::guided:
            non_negative = options.sign_constraint;
            for (Index j = 0; j < p; ++j) {
                if (mask[j]) continue;
                if (options.use_magnitude) {
                    add(j, options.loo ? fits.loo_fits.col(j) : fits.insample_fits.col(j), fits.intercepts(j),
                        fits.slopes(j), 1.0);
                } else {
                    const double s = sign_of(fits.std_slopes(j));
                    if (s == 0.0) continue;
                    const double sd = fits.stats.sds(j);
                    const double mean = fits.stats.means(j);
                    add(j, (s * (data.features.col(j).array() - mean) / sd).matrix(), -s * mean / sd, s / sd, 1.0);
                }
            }
            break;
        case Stage2Kind::lasso:
            non_negative = false;
            for (Index j = 0; j < p; ++j) {
                if (mask[j]) continue;
                const double sd = fits.stats.sds(j);
                const double mean = fits.stats.means(j);
                add(j, ((data.features.col(j).array() - mean) / sd).matrix(), -mean / sd, 1.0 / sd, 1.0);
            }
            break;
        case Stage2Kind::adaptive:
            non_negative = options.sign_constraint;
            for (Index j = 0; j < p; ++j) {
                const double slope = fits.slopes(j);
                if (mask[j] || slope == 0.0) continue;
                const double s = options.sign_constraint ? sign_of(slope) : 1.0;
                add(j, s * data.features.col(j), 0.0, s, 1.0 / std::abs(slope));
            }
            break;
        case Stage2Kind::external: {
            if (!options.external) throw ValidationError("external stage requires scores");
            const ExternalScores& ext = *options.external;
            if (ext.slopes.size() != p || (ext.intercepts.size() != 0 && ext.intercepts.size() != p)) {
                throw ValidationError("external scores length does not match the number of features (" +
                                      std::to_string(p) + ")");
            }
            const double ybar = data.response.mean();
            for (Index j = 0; j < p; ++j) {
                const double slope = ext.slopes(j);
                if (mask[j] || slope == 0.0) continue;
                const double intercept =
                    ext.intercepts.size() ? ext.intercepts(j) : ybar - slope * fits.stats.means(j);
                add(j, (intercept + slope * data.features.col(j).array()).matrix(), intercept, slope, 1.0);
            }
            break;
        }
    }
    const auto q = static_cast<Index>(cols.size());
    Matrix design(n, q);
    for (Index k = 0; k < q; ++k) design.col(k) = cols[static_cast<std::size_t>(k)];
    out.problem = make_problem(std::move(design), data.response, data.family, non_negative);
    out.problem.penalty_factors = Eigen::Map<const Vector>(pf.data(), q);
    out.col_intercepts = Eigen::Map<const Vector>(a.data(), q);
    out.col_slopes = Eigen::Map<const Vector>(b.data(), q);
    return out;
}

std::pair<double, Vector> collapse(const Stage2Design& design, double intercept, const Vector& coefs) {
    Vector gammas = Vector::Zero(design.p);
    double gamma0 = intercept;
    for (std::size_t k = 0; k < design.columns.size(); ++k) {
        const auto kk = static_cast<Index>(k);
        gammas(design.columns[k]) = design.col_slopes(kk) * coefs(kk);
        gamma0 += design.col_intercepts(kk) * coefs(kk);
    }
    return {gamma0, gammas};
}

CollapsedPath collapse_path(const Stage2Design& design, const PathSolution& path) {
    CollapsedPath out;
    out.lambdas = path.lambdas;
    out.gamma0.resize(path.size());
    out.gammas.resize(design.p, path.size());
    out.stage.assign(static_cast<std::size_t>(path.size()), 0);
    for (Index k = 0; k < path.size(); ++k) {
        auto [g0, g] = collapse(design, path.intercepts(k), path.coefs.col(k));
        out.gamma0(k) = g0;
        out.gammas.col(k) = g;
    }
    return out;
}

TwoStageFit fit_two_stage(const Dataset& data, const Stage2Options& options, const FitConfig& config, Variant tag,
                          const Vector* offset) {
    check_config(config);
    validate(data);
    if (data.n() < config.n_folds) {
        throw ValidationError("n_folds (" + std::to_string(config.n_folds) + ") exceeds number of observations (" +
                              std::to_string(data.n()) + ")");
    }
    TwoStageFit fit;
    const UnivariateFits fits = univariate_stage(data, config.threads);
    fit.design = build_stage2(data, fits, options);
    SolverProblem& problem = fit.design.problem;
    if (offset) {
        if (offset->size() != data.n()) throw ValidationError("offset length must equal n");
        problem.offset = *offset;
    }
    const Vector grid =
        lambda_grid(lambda_max(problem), config.n_lambda, config.effective_min_ratio(problem.n(), problem.q()));
    fit.path = fit_path(problem, grid, config);
    fit.collapsed = collapse_path(fit.design, fit.path);

    if (config.strict_cv) {
        const std::vector<int> folds = assign_folds(data.n(), config.n_folds, config.seed);
        FoldFitter fitter = [&](std::span<const Index> train, std::span<const Index> test, const Vector& lambdas) {
            const Dataset train_data = subset_rows(data, train);
            const UnivariateFits train_fits = univariate_stage(train_data, 1);
            Stage2Design d = build_stage2(train_data, train_fits, options);
            if (offset) d.problem.offset = subset(*offset, train);
            const CollapsedPath cp = collapse_path(d, fit_path(d.problem, lambdas, config));
            Matrix eta(static_cast<Index>(test.size()), lambdas.size());
            for (std::size_t r = 0; r < test.size(); ++r) {
                const Index i = test[r];
                const double base = offset ? (*offset)(i) : 0.0;
                eta.row(static_cast<Index>(r)) =
                    (cp.gamma0.transpose().array() + base + (data.features.row(i) * cp.gammas).array()).matrix();
            }
            return eta;
        };
        fit.cv = cross_validate(data.response, Vector::Ones(data.n()), data.family, grid, folds, config.n_folds,
                                fitter, config.threads);
    } else {
        fit.cv = kfold_cv(problem, grid, config);
    }

    fit.selected = fit.cv.selected(config.selection);
    CollapsedModel& model = fit.model;
    model = null_model(data, fits, tag);
    if (options.kind == Stage2Kind::external) {
        // Collapse and sign checks are against the external slopes.
        model.univariate.slopes = Vector::Zero(data.p());
        model.univariate.intercepts = Vector::Zero(data.p());
        for (std::size_t k = 0; k < fit.design.columns.size(); ++k) {
            model.univariate.slopes(fit.design.columns[k]) = fit.design.col_slopes(static_cast<Index>(k));
            model.univariate.intercepts(fit.design.columns[k]) = fit.design.col_intercepts(static_cast<Index>(k));
        }
    }
    model.gamma0 = fit.collapsed.gamma0(fit.selected);
    model.gammas = fit.collapsed.gammas.col(fit.selected);
    model.theta0 = fit.path.intercepts(fit.selected);
    for (std::size_t k = 0; k < fit.design.columns.size(); ++k) {
        model.thetas(fit.design.columns[k]) = fit.path.coefs(static_cast<Index>(k), fit.selected);
    }
    model.lambda_selected = grid(fit.selected);
    return fit;
}

TwoStageFit unilasso_cv(const Dataset& data, const FitConfig& config) {
    return fit_two_stage(data, Stage2Options{}, config, Variant::unilasso);
}

TwoStageFit variant_fit(const Dataset& data, const FitConfig& config) {
    Variant tag = Variant::unilasso;
    if (!config.use_magnitude) {
        tag = Variant::no_mag;
    } else if (!config.sign_constraint) {
        tag = Variant::no_sign;
    } else if (!config.loo) {
        tag = Variant::no_loo;
    }
    return fit_two_stage(data, Stage2Options::from_config(config), config, tag);
}

TwoStageFit lasso_cv(const Dataset& data, const FitConfig& config, const Vector* offset) {
    Stage2Options options;
    options.kind = Stage2Kind::lasso;
    return fit_two_stage(data, options, config, Variant::lasso, offset);
}

TwoStageFit adaptive_lasso_cv(const Dataset& data, const FitConfig& config, bool sign_constraint) {
    Stage2Options options;
    options.kind = Stage2Kind::adaptive;
    options.sign_constraint = sign_constraint;
    return fit_two_stage(data, options, config, Variant::adaptive);
}

TwoStageFit unilasso_external(const Dataset& data, const ExternalScores& scores, const FitConfig& config) {
    const Index p = data.p();
    if (scores.slopes.size() != p || (scores.intercepts.size() != 0 && scores.intercepts.size() != p) ||
        (scores.ses.size() != 0 && scores.ses.size() != p)) {
        throw ValidationError("external scores length does not match the number of features (" +
                              std::to_string(p) + ")");
    }
    if (!scores.slopes.allFinite() || !scores.intercepts.allFinite() || !scores.ses.allFinite()) {
        throw ValidationError("external scores must be finite");
    }
    Stage2Options options;
    options.kind = Stage2Kind::external;
    options.external = &scores;
    return fit_two_stage(data, options, config, Variant::external);
}

ExternalScores external_scores_from(const Dataset& external) {
    validate(external);
    const UnivariateFits fits = univariate_stage(external);
    ExternalScores scores;
    scores.slopes = fits.slopes;
    scores.intercepts = fits.intercepts;
    scores.ses.resize(external.p());
    const double n = static_cast<double>(external.n());
    for (Index j = 0; j < external.p(); ++j) {
        if (fits.stats.constant_mask[j]) {
            scores.ses(j) = 0.0;
            continue;
        }
        const double rss = (external.response - fits.insample_fits.col(j)).squaredNorm();
        const double sxx = n * fits.stats.sds(j) * fits.stats.sds(j);
        scores.ses(j) = std::sqrt(rss / (n - 2.0) / sxx);
    }
    return scores;
}

CollapsedModel unireg(const Dataset& data, const FitConfig& config) {
    check_config(config);
    validate(data);
    const UnivariateFits fits = univariate_stage(data, config.threads);
    Stage2Options options;
    options.loo = config.loo;
    const Stage2Design design = build_stage2(data, fits, options);
    const SolverProblem& problem = design.problem;
    const Index q = problem.q();

    bool full_rank = false;
    if (q > 0 && q < problem.n()) {
        const Matrix centered = problem.design.rowwise() - problem.design.colwise().mean();
        Eigen::ColPivHouseholderQR<Matrix> qr(centered);
        full_rank = qr.rank() == q;
    }
    Solution sol;
    double lambda = 0.0;
    if (full_rank || q == 0) {
        sol = solve_at(problem, 0.0, config);
    } else {
        const double lmax = lambda_max(problem);
        const PathSolution path = fit_path(problem, lambda_grid(lmax, config.n_lambda, 1e-8), config);
        const Index last = path.size() - 1;
        sol = path.at(last);
        lambda = path.lambdas(last);
    }
    CollapsedModel model = null_model(data, fits, Variant::unireg);
    auto [g0, g] = collapse(design, sol.intercept, sol.coefs);
    model.gamma0 = g0;
    model.gammas = g;
    model.theta0 = sol.intercept;
    for (std::size_t k = 0; k < design.columns.size(); ++k) {
        model.thetas(design.columns[k]) = sol.coefs(static_cast<Index>(k));
    }
    model.lambda_selected = lambda;
    return model;
}

BootstrapIntervals unireg_bootstrap_ci(const Dataset& data, const FitConfig& config, int n_boot, double level) {
    if (n_boot < 100) throw ValidationError("bootstrap needs at least 100 resamples");
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("interval level must lie in (0, 1)");
    const Index n = data.n();
    const Index p = data.p();
    BootstrapIntervals out;
    out.level = level;
    out.estimate = unireg(data, config).gammas;
    out.draws.resize(p, n_boot);
    std::mt19937_64 rng(config.seed);
    std::vector<Index> rows(static_cast<std::size_t>(n));
    FitConfig inner = config;
    inner.threads = 1;
    for (int b = 0; b < n_boot; ++b) {
        for (auto& r : rows) r = static_cast<Index>(rng() % static_cast<std::uint64_t>(n));
        out.draws.col(b) = unireg(subset_rows(data, rows), inner).gammas;
    }
    out.lower.resize(p);
    out.upper.resize(p);
    const double alpha = 0.5 * (1.0 - level);
    std::vector<double> sorted(static_cast<std::size_t>(n_boot));
    auto quantile = [&](double prob) {
        // Linear interpolation between order statistics (type 7).
        const double h = prob * (n_boot - 1);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    for (Index j = 0; j < p; ++j) {
        for (int b = 0; b < n_boot; ++b) sorted[static_cast<std::size_t>(b)] = out.draws(j, b);
        std::sort(sorted.begin(), sorted.end());
        out.lower(j) = quantile(alpha);
        out.upper(j) = quantile(1.0 - alpha);
    }
    return out;
}

CollapsedModel ols_fit(const Dataset& data) {
    validate(data);
    const UnivariateFits fits = univariate_stage(data);
    Matrix aug(data.n(), data.p() + 1);
    aug.col(0).setOnes();
    aug.rightCols(data.p()) = data.features;
    const Vector coef = aug.colPivHouseholderQr().solve(data.response);
    CollapsedModel model = null_model(data, fits, Variant::ols);
    model.gamma0 = coef(0);
    model.gammas = coef.tail(data.p());
    return model;
}

PolishFit polish(const Dataset& data, const TwoStageFit& base, const FitConfig& config) {
    PolishFit out;
    const Vector offset = predict(base.model, data.features).eta;
    out.polish_stage = lasso_cv(data, config, &offset);
    const TwoStageFit& stage = out.polish_stage;

    out.model = base.model;
    out.model.variant = Variant::polish;
    out.model.gamma0 = base.model.gamma0 + stage.model.gamma0;
    out.model.gammas = base.model.gammas + stage.model.gammas;
    out.model.lambda_selected = stage.model.lambda_selected;

    const Index nb = base.selected + 1;
    const Index np = stage.collapsed.size();
    CollapsedPath& path = out.stitched;
    path.lambdas.resize(nb + np);
    path.gamma0.resize(nb + np);
    path.gammas.resize(data.p(), nb + np);
    path.stage.assign(static_cast<std::size_t>(nb + np), 0);
    path.lambdas.head(nb) = base.collapsed.lambdas.head(nb);
    path.gamma0.head(nb) = base.collapsed.gamma0.head(nb);
    path.gammas.leftCols(nb) = base.collapsed.gammas.leftCols(nb);
    for (Index k = 0; k < np; ++k) {
        path.lambdas(nb + k) = stage.collapsed.lambdas(k);
        path.gamma0(nb + k) = base.model.gamma0 + stage.collapsed.gamma0(k);
        path.gammas.col(nb + k) = base.model.gammas + stage.collapsed.gammas.col(k);
        path.stage[static_cast<std::size_t>(nb + k)] = 1;
    }
    out.stitch_index = nb - 1;
    return out;
}

Matrix OvrModel::probabilities(const Matrix& x) const {
    Matrix probs(x.rows(), static_cast<Index>(models.size()));
    for (std::size_t k = 0; k < models.size(); ++k) probs.col(static_cast<Index>(k)) = predict(models[k], x).prob;
    return probs;
}

std::vector<double> OvrModel::classify(const Matrix& x) const {
    const Matrix probs = probabilities(x);
    std::vector<double> labels(static_cast<std::size_t>(x.rows()));
    for (Index i = 0; i < x.rows(); ++i) {
        Index best = 0;
        for (Index k = 1; k < probs.cols(); ++k) {
            if (probs(i, k) > probs(i, best)) best = k;
        }
        labels[static_cast<std::size_t>(i)] = classes[static_cast<std::size_t>(best)];
    }
    return labels;
}

OvrModel ovr_multiclass(const Dataset& data, const FitConfig& config) {
    std::map<double, Index> counts;
    for (Index i = 0; i < data.n(); ++i) {
        if (!std::isfinite(data.response(i))) throw ValidationError("non-finite class label");
        ++counts[data.response(i)];
    }
    if (counts.size() < 3) {
        throw ValidationError("one-versus-rest needs at least 3 classes, got " + std::to_string(counts.size()));
    }
    for (const auto& [label, count] : counts) {
        if (count < config.n_folds) {
            throw ValidationError("class " + format_double(label) + " has " + std::to_string(count) +
                                  " members, fewer than n_folds=" + std::to_string(config.n_folds) +
                                  "; use fewer folds");
        }
    }
    OvrModel model;
    for (const auto& [label, count] : counts) {
        Dataset binary = data;
        binary.family = Family::binomial;
        for (Index i = 0; i < data.n(); ++i) binary.response(i) = data.response(i) == label ? 1.0 : 0.0;
        model.classes.push_back(label);
        model.models.push_back(variant_fit(binary, config).model);
    }
    return model;
}

Prediction predict(const CollapsedModel& model, const Matrix& x) {
    if (x.cols() != model.p()) {
        throw ValidationError("prediction matrix has " + std::to_string(x.cols()) + " columns, model expects " +
                              std::to_string(model.p()));
    }
    Prediction out;
    out.eta = (x * model.gammas).array() + model.gamma0;
    if (model.family == Family::binomial) out.prob = out.eta.unaryExpr([](double e) { return sigmoid(e); });
    return out;
}

Index sign_violations(const CollapsedModel& model) {
    Index count = 0;
    for (Index j = 0; j < model.p(); ++j) {
        if (model.gammas(j) * model.univariate.slopes(j) < 0.0) ++count;
    }
    return count;
}

}  // namespace unilasso
