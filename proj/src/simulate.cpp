#include "unilasso/simulate.hpp"

#include "unilasso/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace unilasso {

namespace {

constexpr const char* kScenarioNames[] = {"low_snr",   "medium_snr",      "high_snr", "homecourt",
                                          "two_class", "counter_example", "external"};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Rng = std::mt19937_64;

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
    std::normal_distribution<double> normal;
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    }
    return m;
}

Vector gaussian_vector(Index n, Rng& rng) { return gaussian_matrix(n, 1, rng).col(0); }

// x_j = sqrt(rho) u + sqrt(1 - rho) e_j
Matrix equicorrelated(Index rows, Index cols, double rho, Rng& rng) {
    const Vector shared = gaussian_vector(rows, rng);
    Matrix m = gaussian_matrix(rows, cols, rng) * std::sqrt(1.0 - rho);
    m.colwise() += std::sqrt(rho) * shared;
    return m;
}

// x_1 = e_1, x_j = rho x_{j-1} + sqrt(1 - rho^2) e_j
Matrix ar1(Index rows, Index cols, double rho, Rng& rng) {
    Matrix m = gaussian_matrix(rows, cols, rng);
    const double scale = std::sqrt(1.0 - rho * rho);
    for (Index j = 1; j < cols; ++j) m.col(j) = rho * m.col(j - 1) + scale * m.col(j);
    return m;
}

double population_variance(const Vector& v) { return (v.array() - v.mean()).square().mean(); }

double calibrated_sigma(const Vector& signal, double snr) {
    const double var = population_variance(signal);
    return var > 0.0 ? std::sqrt(var / snr) : 1.0;
}

std::vector<Index> random_positions(Index p, Index k, Rng& rng) {
    std::vector<Index> idx(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) idx[static_cast<std::size_t>(j)] = j;
    for (Index i = 0; i < k; ++i) {
        const auto pick = i + static_cast<Index>(rng() % static_cast<std::uint64_t>(p - i));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

Dataset make_dataset(Matrix x, Vector y, Family family = Family::gaussian) {
    Dataset d;
    d.feature_names = default_feature_names(x.cols());
    d.features = std::move(x);
    d.response = std::move(y);
    d.family = family;
    d.response_name = "y";
    return d;
}

Index count_nonzero(const Vector& v) { return (v.array() != 0.0).count(); }

void check_positive(Index n, Index p) {
    if (n < 3 || p < 1) throw ValidationError("scenario needs n >= 3 and p >= 1");
}

}  // namespace

std::string to_string(ScenarioKind kind) { return kScenarioNames[static_cast<int>(kind)]; }

ScenarioKind scenario_from_string(const std::string& name) {
    for (int k = 0; k < static_cast<int>(std::size(kScenarioNames)); ++k) {
        if (name == kScenarioNames[k]) return static_cast<ScenarioKind>(k);
    }
    throw ValidationError("unknown scenario '" + name +
                          "' (expected low_snr, medium_snr, high_snr, homecourt, two_class, counter_example, external)");
}

double snr_for_level(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::low_snr: return 0.5;
        case ScenarioKind::medium_snr: return 1.0;
        case ScenarioKind::high_snr: return 3.0;
        default: throw ValidationError("scenario " + to_string(kind) + " has no SNR level");
    }
}

Scenario default_scenario(ScenarioKind kind) {
    Scenario s;
    s.kind = kind;
    switch (kind) {
        case ScenarioKind::low_snr:
        case ScenarioKind::medium_snr:
        case ScenarioKind::high_snr:
            s.n = 300;
            s.p = 1000;
            s.snr = snr_for_level(kind);
            s.rho = 0.5;
            s.sparsity = 0.1;
            break;
        case ScenarioKind::homecourt:
            s.n = 100;
            s.p = 30;
            s.snr = 1.0;
            s.rho = 0.8;
            s.sparsity = 0.2;
            break;
        case ScenarioKind::two_class:
            s.n = 200;
            s.p = 500;
            s.rho = 0.8;
            s.sparsity = 20.0 / 500.0;
            break;
        case ScenarioKind::counter_example:
            s.n = 100;
            s.p = 20;
            s.sparsity = 0.1;
            break;
        case ScenarioKind::external:
            s.n = 300;
            s.p = 1000;
            s.snr = 1.5;
            s.rho = 0.8;
            s.sparsity = 0.05;
            s.n_external = 300;
            break;
    }
    return s;
}

SimData gen_snr_scenario(Index n, Index p, ScenarioKind level, std::uint64_t seed, Index n_test) {
    check_positive(n, p);
    const double snr = snr_for_level(level);
    Rng rng(seed);
    SimData out;
    Matrix x = equicorrelated(n, p, 0.5, rng);
    out.true_beta = Vector::Zero(p);
    const auto k = static_cast<Index>(std::llround(0.1 * static_cast<double>(p)));
    std::normal_distribution<double> normal;
    for (Index j : random_positions(p, k, rng)) out.true_beta(j) = normal(rng);
    const Vector signal = x * out.true_beta;
    out.sigma = calibrated_sigma(signal, snr);
    Vector y = signal + out.sigma * gaussian_vector(n, rng);
    Matrix xt = equicorrelated(n_test, p, 0.5, rng);
    Vector yt = xt * out.true_beta + out.sigma * gaussian_vector(n_test, rng);
    out.train = make_dataset(std::move(x), std::move(y));
    out.test = make_dataset(std::move(xt), std::move(yt));
    return out;
}

SimData gen_homecourt(Index n, Index p, double rho, double sparsity, std::uint64_t seed, Index n_test) {
    check_positive(n, p);
    if (!(sparsity > 0.0 && sparsity <= 1.0)) throw ValidationError("sparsity must lie in (0, 1]");
    Rng rng(seed);
    SimData out;
    Matrix x = ar1(n, p, rho, rng);
    Vector beta = Vector::Zero(p);
    const auto k = std::max<Index>(1, static_cast<Index>(std::llround(sparsity * static_cast<double>(p))));
    std::normal_distribution<double> normal;
    for (Index j : random_positions(p, k, rng)) beta(j) = std::abs(normal(rng));

    // First stage: univariate slopes of a pilot response.
    const Vector pilot_signal = x * beta;
    const Vector pilot = pilot_signal + calibrated_sigma(pilot_signal, 1.0) * gaussian_vector(n, rng);
    Vector uni(p);
    const double ybar = pilot.mean();
    for (Index j = 0; j < p; ++j) {
        const Vector xc = x.col(j).array() - x.col(j).mean();
        const double sxx = xc.squaredNorm();
        uni(j) = sxx > 0.0 ? xc.dot((pilot.array() - ybar).matrix()) / sxx : 0.0;
    }
    out.true_beta = uni.cwiseProduct(beta);
    out.base_beta = beta;
    out.pilot_slopes = uni;

    const Vector signal = x * out.true_beta;
    out.sigma = calibrated_sigma(signal, 1.0);
    Vector y = signal + out.sigma * gaussian_vector(n, rng);
    Matrix xt = ar1(n_test, p, rho, rng);
    Vector yt = xt * out.true_beta + out.sigma * gaussian_vector(n_test, rng);
    out.train = make_dataset(std::move(x), std::move(y));
    out.test = make_dataset(std::move(xt), std::move(yt));
    return out;
}

SimData gen_two_class(Index n, Index p, std::uint64_t seed, Index n_test) {
    check_positive(n, p);
    Rng rng(seed);
    const Index shifted = std::min<Index>(20, p);
    auto draw = [&](Index rows) {
        Matrix x = ar1(rows, p, 0.8, rng);
        Vector y(rows);
        for (Index i = 0; i < rows; ++i) {
            y(i) = static_cast<double>(i % 2);
            x.row(i).head(shifted).array() += 0.5 * y(i);
        }
        return make_dataset(std::move(x), std::move(y), Family::binomial);
    };
    SimData out;
    out.train = draw(n);
    out.test = draw(n_test);
    out.true_beta = Vector::Zero(p);
    out.true_beta.head(shifted).setConstant(0.5);
    return out;
}

SimData gen_counter_example(Index n, std::uint64_t seed, Index n_test) {
    check_positive(n, 20);
    Rng rng(seed);
    SimData out;
    out.true_beta = Vector::Zero(20);
    out.true_beta(0) = 1.0;
    out.true_beta(1) = -0.5;
    out.sigma = 0.5;
    auto draw = [&](Index rows) {
        Matrix x = gaussian_matrix(rows, 20, rng);
        x.col(1) += x.col(0);
        Vector y = x * out.true_beta + out.sigma * gaussian_vector(rows, rng);
        return make_dataset(std::move(x), std::move(y));
    };
    out.train = draw(n);
    out.test = draw(n_test);
    return out;
}

SimData gen_external(Index n, Index p, Index n_external, std::uint64_t seed, Index n_test) {
    check_positive(n, p);
    if (n_external < 3) throw ValidationError("external sample needs at least 3 rows");
    Rng rng(seed);
    SimData out;
    out.true_beta = Vector::Zero(p);
    std::uniform_real_distribution<double> coef(0.5, 2.0);
    for (Index j = 0; j < std::min<Index>(p, 100); j += 2) out.true_beta(j) = coef(rng);
    Matrix x = ar1(n, p, 0.8, rng);
    const Vector signal = x * out.true_beta;
    out.sigma = calibrated_sigma(signal, 1.5);
    auto draw = [&](Index rows) {
        Matrix xx = ar1(rows, p, 0.8, rng);
        Vector yy = xx * out.true_beta + out.sigma * gaussian_vector(rows, rng);
        return make_dataset(std::move(xx), std::move(yy));
    };
    Vector y = signal + out.sigma * gaussian_vector(n, rng);
    out.train = make_dataset(std::move(x), std::move(y));
    out.external = draw(n_external);
    out.test = draw(n_test);
    return out;
}

SimData generate(const Scenario& s) {
    switch (s.kind) {
        case ScenarioKind::low_snr:
        case ScenarioKind::medium_snr:
        case ScenarioKind::high_snr: return gen_snr_scenario(s.n, s.p, s.kind, s.seed, s.n_test);
        case ScenarioKind::homecourt: return gen_homecourt(s.n, s.p, s.rho, s.sparsity, s.seed, s.n_test);
        case ScenarioKind::two_class: return gen_two_class(s.n, s.p, s.seed, s.n_test);
        case ScenarioKind::counter_example: return gen_counter_example(s.n, s.seed, s.n_test);
        case ScenarioKind::external: return gen_external(s.n, s.p, s.n_external, s.seed, s.n_test);
    }
    throw ValidationError("unknown scenario");
}

Metrics evaluate(const CollapsedModel& model, const Dataset& test, const Vector* true_beta) {
    const Prediction pred = predict(model, test.features);
    Metrics m;
    const Index n = test.n();
    double err = 0.0;
    for (Index i = 0; i < n; ++i) {
        if (model.family == Family::binomial) {
            err += ((pred.prob(i) > 0.5 ? 1.0 : 0.0) != test.response(i)) ? 1.0 : 0.0;
        } else {
            const double r = test.response(i) - pred.eta(i);
            err += r * r;
        }
    }
    m.test_error = err / static_cast<double>(n);
    m.support = model.support();
    m.tpr = kNaN;
    m.fpr = kNaN;
    if (true_beta) {
        if (true_beta->size() != model.p()) throw ValidationError("true coefficient length must equal p");
        Index tp = 0, fp = 0;
        const Index truth = count_nonzero(*true_beta);
        for (Index j = 0; j < model.p(); ++j) {
            if (model.gammas(j) == 0.0) continue;
            ((*true_beta)(j) != 0.0 ? tp : fp) += 1;
        }
        if (truth > 0) m.tpr = static_cast<double>(tp) / static_cast<double>(truth);
        if (truth < model.p()) m.fpr = static_cast<double>(fp) / static_cast<double>(model.p() - truth);
    }
    return m;
}

double stability(const std::vector<CollapsedModel>& models) {
    if (models.size() < 2) throw ValidationError("stability needs at least two models");
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < models.size(); ++a) {
        for (std::size_t b = a + 1; b < models.size(); ++b) {
            if (models[a].p() != models[b].p()) throw ValidationError("stability needs models with equal p");
            Index both = 0, either = 0;
            for (Index j = 0; j < models[a].p(); ++j) {
                const bool in_a = models[a].gammas(j) != 0.0;
                const bool in_b = models[b].gammas(j) != 0.0;
                both += (in_a && in_b) ? 1 : 0;
                either += (in_a || in_b) ? 1 : 0;
            }
            total += either == 0 ? 1.0 : static_cast<double>(both) / static_cast<double>(either);
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

CollapsedModel matching_lasso(const TwoStageFit& lasso, Index target_support) {
    if (target_support < 0) throw ValidationError("target support must be non-negative");
    Index k = lasso.selected;
    while (k > 0 && count_nonzero(lasso.collapsed.gammas.col(k)) > target_support) --k;
    CollapsedModel model = lasso.model;
    model.variant = Variant::matching;
    model.gamma0 = lasso.collapsed.gamma0(k);
    model.gammas = lasso.collapsed.gammas.col(k);
    model.theta0 = lasso.path.intercepts(k);
    model.thetas.setZero();
    for (std::size_t c = 0; c < lasso.design.columns.size(); ++c) {
        model.thetas(lasso.design.columns[c]) = lasso.path.coefs(static_cast<Index>(c), k);
    }
    model.lambda_selected = lasso.collapsed.lambdas(k);
    return model;
}

CollapsedModel matching_lasso(const Dataset& data, Index target_support, const FitConfig& config) {
    return matching_lasso(lasso_cv(data, config), target_support);
}

std::vector<ReplicateRow> run_simulation(const SimulationOptions& options) {
    if (options.replicates < 1) throw ValidationError("replicates must be at least 1");
    if (options.methods.empty()) throw ValidationError("no methods selected");
    const bool binomial = options.scenario.kind == ScenarioKind::two_class;
    for (Variant m : options.methods) {
        if (m == Variant::ols && binomial) throw ValidationError("ols is gaussian only");
        if (m == Variant::external && options.scenario.kind != ScenarioKind::external) {
            throw ValidationError("method 'external' needs the external scenario");
        }
    }
    check_config(options.config);
    std::vector<std::vector<ReplicateRow>> per(static_cast<std::size_t>(options.replicates));
    parallel_for(options.replicates, options.config.threads, [&](long r) {
        Scenario scenario = options.scenario;
        scenario.seed = options.scenario.seed + static_cast<std::uint64_t>(r);
        const SimData data = generate(scenario);
        FitConfig config = options.config;
        config.threads = 1;
        config.seed = scenario.seed;

        std::optional<TwoStageFit> lasso, uni;
        auto get_lasso = [&]() -> const TwoStageFit& {
            if (!lasso) lasso = lasso_cv(data.train, config);
            return *lasso;
        };
        auto get_uni = [&]() -> const TwoStageFit& {
            if (!uni) uni = unilasso_cv(data.train, config);
            return *uni;
        };
        auto fit = [&](Variant method) -> CollapsedModel {
            FitConfig c = config;
            switch (method) {
                case Variant::lasso: return get_lasso().model;
                case Variant::unilasso: return get_uni().model;
                case Variant::polish: return polish(data.train, get_uni(), config).model;
                case Variant::adaptive: return adaptive_lasso_cv(data.train, config).model;
                case Variant::matching: return matching_lasso(get_lasso(), get_uni().model.support());
                case Variant::no_loo: c.loo = false; return variant_fit(data.train, c).model;
                case Variant::no_sign: c.sign_constraint = false; return variant_fit(data.train, c).model;
                case Variant::no_mag: c.use_magnitude = false; return variant_fit(data.train, c).model;
                case Variant::unireg: return unireg(data.train, config);
                case Variant::ols: return ols_fit(data.train);
                case Variant::external:
                    return unilasso_external(data.train, external_scores_from(*data.external), config).model;
            }
            throw ValidationError("unsupported method");
        };

        auto& rows = per[static_cast<std::size_t>(r)];
        for (Variant method : options.methods) {
            const CollapsedModel model = fit(method);
            ReplicateRow row;
            row.seed = scenario.seed;
            row.method = method;
            row.metrics = evaluate(model, data.test, &data.true_beta);
            row.sign_violations = (method == Variant::ols || method == Variant::lasso || method == Variant::matching ||
                                   method == Variant::no_sign || method == Variant::adaptive ||
                                   method == Variant::polish)
                                      ? 0
                                      : sign_violations(model);
            rows.push_back(row);
        }
        double lasso_error = kNaN;
        for (const auto& row : rows) {
            if (row.method == Variant::lasso) lasso_error = row.metrics.test_error;
        }
        for (auto& row : rows) row.mse_ratio = row.metrics.test_error / lasso_error;
    });
    std::vector<ReplicateRow> out;
    for (auto& rows : per) out.insert(out.end(), rows.begin(), rows.end());
    return out;
}

std::vector<SummaryRow> summarize(const std::vector<ReplicateRow>& rows, const std::vector<Variant>& methods) {
    auto mean_se = [](const std::vector<double>& v, double& mean, double& se) {
        const auto r = static_cast<double>(v.size());
        mean = 0.0;
        for (double x : v) mean += x;
        mean /= r;
        if (v.size() < 2) {
            se = kNaN;
            return;
        }
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        se = std::sqrt(ss / (r - 1.0)) / std::sqrt(r);
    };
    double lasso_mse = kNaN;
    std::vector<SummaryRow> out;
    for (Variant method : methods) {
        std::vector<double> mse, support, tpr, fpr;
        SummaryRow s;
        s.method = method;
        for (const auto& row : rows) {
            if (row.method != method) continue;
            mse.push_back(row.metrics.test_error);
            support.push_back(static_cast<double>(row.metrics.support));
            tpr.push_back(row.metrics.tpr);
            fpr.push_back(row.metrics.fpr);
            s.sign_violations += row.sign_violations;
        }
        if (mse.empty()) continue;
        s.replicates = static_cast<int>(mse.size());
        mean_se(mse, s.mse, s.mse_se);
        mean_se(support, s.support, s.support_se);
        mean_se(tpr, s.tpr, s.tpr_se);
        mean_se(fpr, s.fpr, s.fpr_se);
        if (method == Variant::lasso) lasso_mse = s.mse;
        out.push_back(s);
    }
    for (auto& s : out) s.mse_ratio = s.mse / lasso_mse;
    return out;
}

double loo_sign_flip_point(Index n, Index n_features, std::uint64_t seed) {
    check_positive(n, n_features);
    Rng rng(seed);
    Vector y = gaussian_vector(n, rng);
    y = (y.array() - y.mean()) / std::sqrt(population_variance(y));
    Matrix x = gaussian_matrix(n, n_features, rng);
    constexpr double kMaxCorrelation = 0.25;
    for (Index j = 0; j < n_features; ++j) {
        const double c = kMaxCorrelation * (static_cast<double>(j) + 0.5) / static_cast<double>(n_features);
        x.col(j) = c * y + std::sqrt(1.0 - c * c) * x.col(j);
    }
    const Dataset data = make_dataset(std::move(x), y);
    const UnivariateFits fits = univariate_stage(data);
    auto corr = [](const Vector& a, const Vector& b) {
        const Vector ac = a.array() - a.mean();
        const Vector bc = b.array() - b.mean();
        return ac.dot(bc) / std::sqrt(ac.squaredNorm() * bc.squaredNorm());
    };
    std::vector<std::pair<double, double>> points;  // (|corr(y, x)|, corr(y, loo))
    for (Index j = 0; j < n_features; ++j) {
        points.emplace_back(std::abs(corr(y, data.features.col(j))), corr(y, fits.loo_fits.col(j)));
    }
    std::sort(points.begin(), points.end());
    // Step fit: threshold with the fewest sign disagreements.
    Index positives_below = 0;
    Index negatives_above = 0;
    for (const auto& pt : points) negatives_above += pt.second < 0.0 ? 1 : 0;
    Index best_errors = negatives_above;
    double best = 0.0;
    for (std::size_t k = 0; k < points.size(); ++k) {
        positives_below += points[k].second > 0.0 ? 1 : 0;
        negatives_above -= points[k].second < 0.0 ? 1 : 0;
        const Index errors = positives_below + negatives_above;
        if (errors < best_errors) {
            best_errors = errors;
            best = k + 1 < points.size() ? 0.5 * (points[k].first + points[k + 1].first) : points[k].first;
        }
    }
    return best;
}

}  // namespace unilasso
