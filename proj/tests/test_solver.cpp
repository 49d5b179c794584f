#include "doctest.h"
#include "helpers.hpp"

#include "unilasso/oracle.hpp"
#include "unilasso/solver.hpp"

using namespace unilasso;

namespace {

SolverProblem random_problem(Index n, Index q, std::uint64_t seed, bool non_negative,
                             Family family = Family::gaussian) {
    Matrix d = helpers::random_matrix(n, q, seed);
    Vector t = d.col(0) * 1.5 - 0.8 * d.col(1 % q) + helpers::random_vector(n, seed + 1);
    if (family == Family::binomial) {
        for (Index i = 0; i < n; ++i) t(i) = t(i) > 0.0 ? 1.0 : 0.0;
        t(0) = 1.0 - t(0);  // keep it from being separable along column 0
    }
    return make_problem(std::move(d), std::move(t), family, non_negative);
}

// +-1 Walsh columns: mean zero, mutually orthogonal, squared norm n.
Matrix walsh(Index n, Index p) {
    Matrix x(n, p);
    for (Index j = 0; j < p; ++j) {
        for (Index i = 0; i < n; ++i) {
            const auto bits = static_cast<unsigned>(i & (j + 1));
            x(i, j) = (__builtin_popcount(bits) % 2 == 0) ? 1.0 : -1.0;
        }
    }
    return x;
}

}  // namespace

TEST_CASE("lambda_max: zero target gives a degenerate path") {
    SolverProblem p = make_problem(helpers::random_matrix(10, 3, 1), Vector::Zero(10), Family::gaussian, true);
    CHECK(lambda_max(p) == 0.0);
    const Vector grid = lambda_grid(lambda_max(p), 100, 1e-3);
    REQUIRE(grid.size() == 1);
    CHECK(grid(0) == 0.0);
    const PathSolution path = fit_path(p, FitConfig{});
    CHECK(path.size() == 1);
    CHECK(path.coefs.isZero(0.0));
}

TEST_CASE("lambda_max: single column equal to target, n = 4") {
    const Vector t{{1.0, 3.0, 4.0, 8.0}};
    SolverProblem p = make_problem(t, t, Family::gaussian, true);
    const Vector tc = t.array() - t.mean();
    CHECK(lambda_max(p) == doctest::Approx(tc.squaredNorm() / 4.0));
}

TEST_CASE("lambda_max: non-negativity ignores negatively correlated columns") {
    const Vector t{{1.0, 2.0, 3.0, 4.0, 5.0}};
    Matrix d(5, 2);
    d.col(0) = -t;
    d.col(1) = 0.1 * t;
    SolverProblem nn = make_problem(d, t, Family::gaussian, true);
    SolverProblem free = make_problem(d, t, Family::gaussian, false);
    CHECK(lambda_max(nn) == doctest::Approx(0.1 * 2.0));
    CHECK(lambda_max(free) == doctest::Approx(2.0));
}

TEST_CASE("at lambda_max every coefficient is zero and the intercept is the weighted mean") {
    SolverProblem p = random_problem(30, 5, 3, true);
    p.weights = helpers::random_vector(30, 9).cwiseAbs();
    p.offset = 0.3 * helpers::random_vector(30, 10);
    const double lmax = lambda_max(p);
    const Solution s = solve_at(p, lmax, FitConfig{});
    CHECK(s.coefs.isZero(0.0));
    CHECK(s.intercept == doctest::Approx(p.weights.dot(p.target - p.offset) / p.weights.sum()).epsilon(1e-12));
    const Solution above = solve_at(p, 2.0 * lmax, FitConfig{});
    CHECK(above.coefs.isZero(0.0));
}

TEST_CASE("orthonormal design: guided columns give (1 - lambda / b^2)_+, plain columns soft-threshold") {
    const Index n = 16, q = 6;
    const Matrix x = walsh(n, q);
    REQUIRE((x.transpose() * x - n * Matrix::Identity(q, q)).cwiseAbs().maxCoeff() == 0.0);
    Vector b{{2.0, -1.5, 0.8, 0.3, -0.6, 1.1}};
    const Vector y = x * b;
    Vector bhat = x.transpose() * y / static_cast<double>(n);
    const Matrix guided = x * bhat.asDiagonal();
    const SolverProblem pg = make_problem(guided, y, Family::gaussian, true);
    const SolverProblem pl = make_problem(x, y, Family::gaussian, false);
    for (double lambda : {0.05, 0.3, 1.0, 2.5}) {
        const Solution sg = solve_at(pg, lambda, FitConfig{});
        const Solution sl = solve_at(pl, lambda, FitConfig{});
        for (Index j = 0; j < q; ++j) {
            const double expect = std::max(0.0, 1.0 - lambda / (bhat(j) * bhat(j)));
            CHECK(std::abs(sg.coefs(j) - expect) < 1e-8);
            const double soft = (bhat(j) > 0 ? 1.0 : -1.0) * std::max(0.0, std::abs(bhat(j)) - lambda);
            CHECK(std::abs(sl.coefs(j) - soft) < 1e-8);
        }
    }
}

TEST_CASE("objective agrees with projected gradient on random 30x8 problems") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        for (bool nn : {true, false}) {
            const SolverProblem p = random_problem(30, 8, 50 + seed, nn);
            const double lmax = lambda_max(p);
            for (double frac : {0.5, 0.1, 0.01}) {
                const Solution s = solve_at(p, frac * lmax, FitConfig{});
                const auto o = oracle::projected_gradient(p, frac * lmax);
                CHECK(std::abs(s.objective - o.objective) <= 1e-6 * std::abs(o.objective));
            }
        }
    }
}

TEST_CASE("binomial objective agrees with projected gradient") {
    const SolverProblem p = random_problem(60, 5, 17, true, Family::binomial);
    const double lmax = lambda_max(p);
    for (double frac : {0.5, 0.1, 0.02}) {
        const Solution s = solve_at(p, frac * lmax, FitConfig{});
        const auto o = oracle::projected_gradient(p, frac * lmax);
        CHECK(std::abs(s.objective - o.objective) <= 1e-6 * std::abs(o.objective));
        CHECK(max_kkt_violation(p, frac * lmax, s.intercept, s.coefs) <= 1e-6);
    }
}

TEST_CASE("lambda = 0 without constraints is least squares") {
    const SolverProblem p = random_problem(40, 6, 5, false);
    const Solution s = solve_at(p, 0.0, FitConfig{});
    const auto ls = oracle::least_squares(p.design, p.target);
    CHECK((s.coefs - ls.coefs).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::abs(s.intercept - ls.intercept) < 1e-8);
}

TEST_CASE("lambda = 0 with non-negativity matches active-set NNLS") {
    const SolverProblem p = random_problem(50, 10, 6, true);
    const Solution s = solve_at(p, 0.0, FitConfig{});
    const auto nnls = oracle::nnls_active_set(p.design, p.target);
    CHECK((s.coefs - nnls.coefs).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(std::abs(s.intercept - nnls.intercept) < 1e-6);
    CHECK((s.coefs.array() >= 0.0).all());
}

TEST_CASE("KKT residuals stay below 1e-6 along gaussian and binomial paths") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        for (bool nn : {true, false}) {
            const SolverProblem p = random_problem(30, 8, 200 + seed, nn);
            const PathSolution path = fit_path(p, FitConfig{});
            for (Index k = 0; k < path.size(); ++k) {
                CHECK(max_kkt_violation(p, path.lambdas(k), path.intercepts(k), path.coefs.col(k)) <= 1e-6);
            }
            if (nn) CHECK((path.coefs.array() >= 0.0).all());
        }
    }
    const SolverProblem b = random_problem(80, 6, 9, true, Family::binomial);
    const PathSolution path = fit_path(b, FitConfig{});
    for (Index k = 0; k < path.size(); ++k) {
        CHECK(max_kkt_violation(b, path.lambdas(k), path.intercepts(k), path.coefs.col(k)) <= 1e-6);
    }
}

TEST_CASE("path starts at zero and is strictly decreasing") {
    const SolverProblem p = random_problem(40, 10, 12, true);
    const PathSolution path = fit_path(p, FitConfig{});
    CHECK(path.size() == 100);
    CHECK(path.coefs.col(0).isZero(0.0));
    for (Index k = 1; k < path.size(); ++k) CHECK(path.lambdas(k) < path.lambdas(k - 1));
    CHECK(path.lambdas(99) == doctest::Approx(path.lambdas(0) * 1e-4));
}

TEST_CASE("warm starts need fewer sweeps than cold starts") {
    const SolverProblem p = random_problem(100, 50, 4, true);
    const double lmax = lambda_max(p);
    const FitConfig config;
    const Solution prev = solve_at(p, 0.05 * lmax, config);
    const Solution warm = solve_at(p, 0.045 * lmax, config, &prev);
    const Solution cold = solve_at(p, 0.045 * lmax, config);
    CHECK(warm.sweeps < cold.sweeps);
    CHECK(std::abs(warm.objective - cold.objective) < 1e-10 * std::abs(cold.objective));
}

TEST_CASE("paths are bitwise reproducible") {
    const SolverProblem p = random_problem(50, 12, 8, true);
    const PathSolution a = fit_path(p, FitConfig{});
    const PathSolution b = fit_path(p, FitConfig{});
    CHECK(a.coefs == b.coefs);
    CHECK(a.intercepts == b.intercepts);
}

TEST_CASE("solution objective does not exceed the warm-start objective") {
    const SolverProblem p = random_problem(40, 8, 13, false);
    const double lambda = 0.1 * lambda_max(p);
    const Solution start = solve_at(p, 0.3 * lambda_max(p), FitConfig{});
    const Solution s = solve_at(p, lambda, FitConfig{}, &start);
    CHECK(s.objective <= objective_value(p, lambda, start.intercept, start.coefs) + 1e-15);
}

TEST_CASE("problem validation and non-convergence") {
    SolverProblem p = random_problem(20, 3, 1, true);
    p.lower_bounds(1) = -1.0;
    CHECK_THROWS_AS(lambda_max(p), ValidationError);
    p = random_problem(20, 3, 1, true);
    p.weights.setZero();
    CHECK_THROWS_AS(fit_path(p, FitConfig{}), ValidationError);

    const SolverProblem q = random_problem(40, 10, 2, false);
    FitConfig strict;
    strict.max_iter = 1;
    CHECK_THROWS_WITH_AS(fit_path(q, strict), doctest::Contains("path index"), NumericalError);
}
