#include "unilasso/oracle.hpp"
#include "unilasso/pipeline.hpp"

#include "doctest.h"
#include "helpers.hpp"

#include <cmath>

using namespace unilasso;

namespace {

/// Centered columns with (1/n) X'X = I.
Matrix orthonormal_design(Index n, Index p, std::uint64_t seed) {
    Matrix x = helpers::random_matrix(n, p, seed);
    x = x.rowwise() - x.colwise().mean();
    Eigen::HouseholderQR<Matrix> qr(x);
    const Matrix q = qr.householderQ() * Matrix::Identity(n, p);
    return std::sqrt(static_cast<double>(n)) * q;
}

FitConfig no_loo_config() {
    FitConfig c;
    c.loo = false;
    c.n_folds = 5;
    c.n_lambda = 40;
    return c;
}

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("variant names round-trip") {
    for (Variant v : {Variant::unilasso, Variant::unireg, Variant::polish, Variant::adaptive, Variant::no_sign,
                      Variant::no_mag, Variant::lasso, Variant::no_loo, Variant::external}) {
        CHECK(variant_from_string(to_string(v)) == v);
    }
    CHECK_THROWS_AS(variant_from_string("ridge"), ValidationError);
}

TEST_CASE("collapsed coefficients are slope times theta") {
    const Dataset d = helpers::gaussian_data(80, 6, 11);
    FitConfig config;
    config.n_folds = 5;
    const TwoStageFit fit = unilasso_cv(d, config);
    const CollapsedModel& m = fit.model;
    double g0 = m.theta0;
    for (Index j = 0; j < d.p(); ++j) {
        CHECK(m.gammas(j) == doctest::Approx(m.univariate.slopes(j) * m.thetas(j)).epsilon(1e-14));
        g0 += m.univariate.intercepts(j) * m.thetas(j);
    }
    CHECK(m.gamma0 == doctest::Approx(g0).epsilon(1e-12));
    CHECK(m.lambda_selected == fit.cv.lambdas(fit.cv.idx_min));
}

TEST_CASE("collapsed predictions equal theta-space predictions on in-sample univariate fits") {
    const Dataset d = helpers::gaussian_data(60, 5, 12);
    FitConfig config;
    config.n_folds = 5;
    const TwoStageFit fit = unilasso_cv(d, config);
    const UnivariateFits uf = univariate_stage(d);
    const Vector collapsed = predict(fit.model, d.features).eta;
    Vector theta_space = Vector::Constant(d.n(), fit.model.theta0);
    for (Index j = 0; j < d.p(); ++j) theta_space += fit.model.thetas(j) * uf.insample_fits.col(j);
    const double scale = std::max(1.0, collapsed.cwiseAbs().maxCoeff());
    CHECK(max_abs(collapsed - theta_space) <= 1e-12 * scale);
}

TEST_CASE("exact line with one feature") {
    Dataset d;
    d.features = helpers::random_matrix(30, 1, 13);
    d.response = (1.0 + 2.0 * d.features.col(0).array()).matrix();
    FitConfig config;
    config.n_folds = 5;
    const TwoStageFit fit = unilasso_cv(d, config);
    const Index last = fit.collapsed.size() - 1;
    CHECK(fit.collapsed.gammas(0, last) == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(fit.collapsed.gamma0(last) == doctest::Approx(1.0).epsilon(1e-3));

    const CollapsedModel ur = unireg(d, config);
    CHECK(ur.gammas(0) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(ur.gamma0 == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("orthonormal design: two-stage and lasso thresholding rules along the path") {
    Dataset d;
    d.features = orthonormal_design(60, 10, 14);
    Vector b(10);
    b << 3.0, -2.0, 1.5, -1.0, 0.8, -0.6, 0.4, 0.3, -0.2, 0.1;
    d.response = d.features * b + 0.5 * helpers::random_vector(60, 15);
    const Vector beta_hat = d.features.transpose() * d.response / 60.0;

    const TwoStageFit guided = variant_fit(d, no_loo_config());
    for (Index k = 0; k < guided.collapsed.size(); ++k) {
        const auto expected = oracle::orthonormal_formula(beta_hat, guided.collapsed.lambdas(k));
        CHECK(max_abs(guided.collapsed.gammas.col(k) - expected.unilasso) <= 1e-4);
    }
    const TwoStageFit plain = lasso_cv(d, no_loo_config());
    for (Index k = 0; k < plain.collapsed.size(); ++k) {
        const auto expected = oracle::orthonormal_formula(beta_hat, plain.collapsed.lambdas(k));
        CHECK(max_abs(plain.collapsed.gammas.col(k) - expected.lasso) <= 1e-4);
    }
}

TEST_CASE("non-LOO fits match adaptive lasso with penalty 1/|slope| at every lambda") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const Dataset d = helpers::gaussian_data(50, 10, 100 + seed);
        for (bool sign : {true, false}) {
            FitConfig config = no_loo_config();
            config.sign_constraint = sign;
            const TwoStageFit guided = variant_fit(d, config);
            const TwoStageFit adaptive = adaptive_lasso_cv(d, config, sign);
            REQUIRE(guided.collapsed.size() == adaptive.collapsed.size());
            CHECK(max_abs(guided.collapsed.lambdas - adaptive.collapsed.lambdas) <=
                  1e-12 * guided.collapsed.lambdas(0));
            CHECK(max_abs(guided.collapsed.gammas - adaptive.collapsed.gammas) <= 1e-6);
        }
    }
}

TEST_CASE("sign-constrained variants never flip a univariate sign") {
    const Dataset d = helpers::gaussian_data(70, 12, 16, 2.0);
    FitConfig config;
    config.n_folds = 5;
    CHECK(sign_violations(unilasso_cv(d, config).model) == 0);
    CHECK(sign_violations(unireg(d, config)) == 0);
    FitConfig c = config;
    c.loo = false;
    CHECK(sign_violations(variant_fit(d, c).model) == 0);
    c = config;
    c.use_magnitude = false;
    CHECK(sign_violations(variant_fit(d, c).model) == 0);
    c = config;
    c.strict_cv = true;
    CHECK(sign_violations(variant_fit(d, c).model) == 0);
    const ExternalScores ext = external_scores_from(helpers::gaussian_data(40, 12, 17));
    CHECK(sign_violations(unilasso_external(d, ext, config).model) == 0);
}

TEST_CASE("constant features get zero coefficients") {
    Dataset d = helpers::gaussian_data(50, 4, 18);
    d.features.col(2).setConstant(3.0);
    FitConfig config;
    config.n_folds = 5;
    const TwoStageFit fit = unilasso_cv(d, config);
    CHECK(fit.model.gammas(2) == 0.0);
    CHECK(fit.collapsed.gammas.row(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("strict CV recomputes stage 1 per fold and keeps the grid") {
    const Dataset d = helpers::gaussian_data(60, 8, 19);
    FitConfig config;
    config.n_folds = 5;
    const TwoStageFit loose = unilasso_cv(d, config);
    config.strict_cv = true;
    const TwoStageFit strict = unilasso_cv(d, config);
    CHECK(max_abs(strict.cv.lambdas - loose.cv.lambdas) == 0.0);
    CHECK(max_abs(strict.path.coefs - loose.path.coefs) == 0.0);
    CHECK(max_abs(strict.cv.cv_mean - loose.cv.cv_mean) > 0.0);
    CHECK(strict.cv.fold_assignment == loose.cv.fold_assignment);
}

TEST_CASE("uniReg equals the non-negative least squares oracle on the stage-2 columns") {
    const Dataset d = helpers::gaussian_data(80, 6, 20);
    const CollapsedModel m = unireg(d, FitConfig{});
    const UnivariateFits uf = univariate_stage(d);
    const auto nnls = oracle::nnls_active_set(uf.loo_fits, d.response);
    for (Index j = 0; j < d.p(); ++j) CHECK(m.thetas(j) == doctest::Approx(nnls.coefs(j)).epsilon(1e-6));
    CHECK(m.theta0 == doctest::Approx(nnls.intercept).epsilon(1e-6));
    CHECK(m.lambda_selected == 0.0);
}

TEST_CASE("uniReg on pure noise keeps few features") {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Dataset d;
        d.features = helpers::random_matrix(100, 10, seed);
        d.response = helpers::random_vector(100, seed + 999);
        total += static_cast<double>(unireg(d, FitConfig{}).support());
    }
    CHECK(total / 20.0 <= 2.0);
}

TEST_CASE("uniReg with p >= n falls back to the end of a long path") {
    const Dataset d = helpers::gaussian_data(20, 30, 21);
    const CollapsedModel m = unireg(d, FitConfig{});
    CHECK(m.lambda_selected > 0.0);
    CHECK(sign_violations(m) == 0);
    CHECK(m.support() <= 20);
}

TEST_CASE("bootstrap intervals") {
    SUBCASE("deterministic for a fixed seed") {
        const Dataset d = helpers::gaussian_data(40, 3, 22);
        FitConfig config;
        config.seed = 5;
        const auto a = unireg_bootstrap_ci(d, config, 100, 0.9);
        const auto b = unireg_bootstrap_ci(d, config, 100, 0.9);
        CHECK(a.draws == b.draws);
        CHECK(a.lower == b.lower);
        CHECK(a.upper == b.upper);
        CHECK((a.lower.array() <= a.upper.array()).all());
    }
    SUBCASE("width shrinks with the noise") {
        double previous = std::numeric_limits<double>::infinity();
        for (double noise : {1e-1, 1e-3, 1e-6}) {
            Dataset d;
            d.features = helpers::random_matrix(40, 1, 23);
            d.response = (1.0 + 2.0 * d.features.col(0).array()).matrix() + noise * helpers::random_vector(40, 24);
            const auto ci = unireg_bootstrap_ci(d, FitConfig{}, 100, 0.95);
            const double width = ci.upper(0) - ci.lower(0);
            CHECK(width < previous);
            CHECK(width <= 20.0 * noise);
            previous = width;
        }
    }
    SUBCASE("zero-signal feature is usually covered") {
        int covered = 0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Dataset d;
            d.features = helpers::random_matrix(50, 2, 300 + seed);
            d.response = 1.5 * d.features.col(0) + helpers::random_vector(50, 400 + seed);
            FitConfig config;
            config.seed = seed;
            const auto ci = unireg_bootstrap_ci(d, config, 100, 0.95);
            if (ci.lower(1) <= 0.0 && 0.0 <= ci.upper(1)) ++covered;
        }
        CHECK(covered >= 18);
    }
    SUBCASE("argument checks") {
        const Dataset d = helpers::gaussian_data(30, 2, 25);
        CHECK_THROWS_AS(unireg_bootstrap_ci(d, FitConfig{}, 50, 0.95), ValidationError);
        CHECK_THROWS_AS(unireg_bootstrap_ci(d, FitConfig{}, 100, 1.0), ValidationError);
    }
}

TEST_CASE("OLS fit matches the normal equations") {
    const Dataset d = helpers::gaussian_data(40, 4, 26);
    const CollapsedModel m = ols_fit(d);
    const auto ls = oracle::least_squares(d.features, d.response);
    CHECK(m.gamma0 == doctest::Approx(ls.intercept).epsilon(1e-10));
    for (Index j = 0; j < 4; ++j) CHECK(m.gammas(j) == doctest::Approx(ls.coefs(j)).epsilon(1e-10));
}

TEST_CASE("polish") {
    FitConfig config;
    config.n_folds = 5;
    SUBCASE("stitched path starts at the base path and continues from the base model") {
        const Dataset d = helpers::gaussian_data(60, 6, 27);
        const TwoStageFit base = unilasso_cv(d, config);
        const PolishFit pf = polish(d, base, config);
        const Index s = pf.stitch_index;
        CHECK(s == base.selected);
        CHECK(pf.stitched.gammas.col(s) == base.model.gammas);
        CHECK(pf.stitched.gamma0(s) == base.model.gamma0);
        CHECK(pf.stitched.stage[static_cast<std::size_t>(s)] == 0);
        CHECK(pf.stitched.stage[static_cast<std::size_t>(s + 1)] == 1);
        // At the polish lambda_max only the free intercept moves, by the mean base residual.
        CHECK(pf.stitched.gammas.col(s + 1) == base.model.gammas);
        const Vector resid = d.response - predict(base.model, d.features).eta;
        CHECK(pf.stitched.gamma0(s + 1) == doctest::Approx(base.model.gamma0 + resid.mean()).epsilon(1e-12));
        CHECK(pf.model.variant == Variant::polish);
        CHECK(max_abs(pf.model.gammas - base.model.gammas - pf.polish_stage.model.gammas) == 0.0);
    }
    SUBCASE("zero residual leaves nothing to add") {
        Dataset d;
        d.features = helpers::random_matrix(40, 3, 28);
        d.response = (0.5 + 2.0 * d.features.col(0).array()).matrix();
        TwoStageFit base = unilasso_cv(d, config);
        base.model.gammas = Vector::Zero(3);
        base.model.gammas(0) = 2.0;
        base.model.gamma0 = 0.5;
        const PolishFit pf = polish(d, base, config);
        CHECK(max_abs(pf.polish_stage.model.gammas) == 0.0);
        CHECK(max_abs(pf.model.gammas - base.model.gammas) == 0.0);
    }
}

TEST_CASE("external scores") {
    const Dataset d = helpers::gaussian_data(60, 8, 29);
    FitConfig config = no_loo_config();
    SUBCASE("internal non-LOO scores reproduce the non-LOO variant") {
        const UnivariateFits uf = univariate_stage(d);
        ExternalScores ext;
        ext.slopes = uf.slopes;
        ext.intercepts = uf.intercepts;
        const TwoStageFit a = unilasso_external(d, ext, config);
        const TwoStageFit b = variant_fit(d, config);
        CHECK(max_abs(a.collapsed.lambdas - b.collapsed.lambdas) <= 1e-10 * b.collapsed.lambdas(0));
        CHECK(max_abs(a.collapsed.gammas - b.collapsed.gammas) <= 1e-8);
        CHECK(a.model.variant == Variant::external);
    }
    SUBCASE("all-zero slopes give the null model") {
        ExternalScores ext;
        ext.slopes = Vector::Zero(8);
        const TwoStageFit fit = unilasso_external(d, ext, config);
        CHECK(fit.model.support() == 0);
        CHECK(fit.model.gamma0 == doctest::Approx(d.response.mean()).epsilon(1e-12));
    }
    SUBCASE("missing intercepts default to ybar - slope * xbar") {
        ExternalScores with, without;
        without.slopes = univariate_stage(helpers::gaussian_data(50, 8, 30)).slopes;
        with.slopes = without.slopes;
        with.intercepts.resize(8);
        for (Index j = 0; j < 8; ++j) with.intercepts(j) = d.response.mean() - with.slopes(j) * d.features.col(j).mean();
        const TwoStageFit a = unilasso_external(d, with, config);
        const TwoStageFit b = unilasso_external(d, without, config);
        CHECK(max_abs(a.collapsed.gammas - b.collapsed.gammas) <= 1e-10);
    }
    SUBCASE("length and finiteness checks") {
        ExternalScores ext;
        ext.slopes = Vector::Ones(7);
        CHECK_THROWS_AS(unilasso_external(d, ext, config), ValidationError);
        ext.slopes = Vector::Ones(8);
        ext.slopes(3) = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(unilasso_external(d, ext, config), ValidationError);
    }
    SUBCASE("standard errors from a separate sample") {
        const Dataset ext_data = helpers::gaussian_data(200, 8, 31);
        const ExternalScores s = external_scores_from(ext_data);
        for (Index j = 0; j < 8; ++j) {
            const auto [a, b] = helpers::simple_ls(ext_data.features.col(j), ext_data.response);
            CHECK(s.slopes(j) == doctest::Approx(b).epsilon(1e-10));
            CHECK(s.intercepts(j) == doctest::Approx(a).epsilon(1e-10));
            const Vector r = ext_data.response.array() - a - b * ext_data.features.col(j).array();
            const Vector xc = ext_data.features.col(j).array() - ext_data.features.col(j).mean();
            const double se = std::sqrt(r.squaredNorm() / 198.0 / xc.squaredNorm());
            CHECK(s.ses(j) == doctest::Approx(se).epsilon(1e-10));
        }
    }
}

TEST_CASE("one-versus-rest") {
    Dataset d;
    const Index per = 20;
    d.features = helpers::random_matrix(3 * per, 2, 32) * 0.3;
    d.response.resize(3 * per);
    const double centers[3][2] = {{0.0, 4.0}, {4.0, 0.0}, {-4.0, -4.0}};
    for (Index i = 0; i < 3 * per; ++i) {
        const Index k = i % 3;
        d.features(i, 0) += centers[k][0];
        d.features(i, 1) += centers[k][1];
        d.response(i) = static_cast<double>(k + 1);
    }
    FitConfig config;
    config.n_folds = 5;
    const OvrModel model = ovr_multiclass(d, config);
    REQUIRE(model.classes.size() == 3);
    const auto labels = model.classify(d.features);
    int errors = 0;
    for (Index i = 0; i < d.n(); ++i) errors += labels[static_cast<std::size_t>(i)] != d.response(i);
    CHECK(errors == 0);
    const Matrix probs = model.probabilities(d.features);
    CHECK((probs.array() >= 0.0).all());
    CHECK((probs.array() <= 1.0).all());
    CHECK((probs.rowwise().sum().array() - 1.0).abs().maxCoeff() > 1e-6);

    Dataset two = d;
    for (Index i = 0; i < two.n(); ++i) two.response(i) = std::min(two.response(i), 2.0);
    CHECK_THROWS_AS(ovr_multiclass(two, config), ValidationError);
    config.n_folds = 25;
    CHECK_THROWS_WITH_AS(ovr_multiclass(d, config), doctest::Contains("fewer folds"), ValidationError);
}

TEST_CASE("predict") {
    CollapsedModel m;
    m.gamma0 = 1.25;
    m.gammas = Vector::Zero(4);
    const Matrix x = helpers::random_matrix(10, 4, 33);
    CHECK((predict(m, x).eta.array() == 1.25).all());

    m.gammas = helpers::random_vector(4, 34);
    m.family = Family::binomial;
    const Prediction pr = predict(m, x);
    for (Index i = 0; i < 10; ++i) {
        double eta = m.gamma0;
        for (Index j = 0; j < 4; ++j) eta += x(i, j) * m.gammas(j);
        CHECK(std::abs(pr.eta(i) - eta) <= 1e-12);
        CHECK(pr.prob(i) == doctest::Approx(1.0 / (1.0 + std::exp(-eta))).epsilon(1e-12));
    }
    CHECK_THROWS_AS(predict(m, helpers::random_matrix(3, 5, 35)), ValidationError);
}

TEST_CASE("binomial pipeline runs with a stage-2 intercept") {
    const Dataset d = helpers::binomial_data(120, 5, 36);
    FitConfig config;
    config.n_folds = 5;
    const TwoStageFit fit = unilasso_cv(d, config);
    CHECK(fit.cv.cv_misclass.size() == fit.cv.lambdas.size());
    CHECK(sign_violations(fit.model) == 0);
    const Prediction pr = predict(fit.model, d.features);
    CHECK((pr.prob.array() > 0.0).all());
    CHECK((pr.prob.array() < 1.0).all());
}

TEST_CASE("fold count above n is rejected") {
    const Dataset d = helpers::gaussian_data(8, 2, 37);
    FitConfig config;
    config.n_folds = 10;
    CHECK_THROWS_AS(unilasso_cv(d, config), ValidationError);
}
