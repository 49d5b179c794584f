#include "unilasso/solver.hpp"

#include <cmath>
#include <optional>
#include <sstream>

namespace unilasso {

namespace {

double sigmoid(double eta) {
    return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

// log(1 + e^eta) without overflow
double log1p_exp(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

constexpr double kMinIrlsWeight = 1e-5;
constexpr int kMaxOuterIrls = 25;
constexpr int kMaxStepHalvings = 20;

/**
 * Weighted least-squares coordinate descent:
 *     (1/2) sum_i v_i (t_i - b0 - d_i . b)^2 + lambda sum_j pf_j |b_j|,  b_j >= lb_j
 * The design is centered with the v-weighted column means so the intercept
 * drops out and is recovered afterwards.
 */
class WeightedCd {
public:
    WeightedCd(const Matrix& design, const Vector& v, const Vector& target, const Vector& pf, const Vector& lb)
        : pf_(pf), lb_(lb), v_(v) {
        const double sv = v.sum();
        dmean_ = (design.transpose() * v) / sv;
        tmean_ = v.dot(target) / sv;
        dc_ = design.rowwise() - dmean_.transpose();
        vdc_ = dc_.array().colwise() * v.array();
        a_ = (vdc_.array() * dc_.array()).colwise().sum().transpose();
        tc_ = target.array() - tmean_;
        null_scale_ = v.dot(tc_.cwiseProduct(tc_));
    }

    /// Runs to convergence from `coefs` (updated in place). Returns false if
    /// `max_sweeps` was exhausted; `last_change` holds the final criterion.
    bool solve(double lambda, Vector& coefs, double tol, long max_sweeps, long& sweeps, double& last_change) {
        const Index q = dc_.cols();
        resid_ = tc_ - dc_ * coefs;
        const double thr = tol * (null_scale_ > 0.0 ? null_scale_ : 1.0);
        std::vector<Index> active;
        active.reserve(static_cast<std::size_t>(q));
        while (true) {
            // Full sweep; it also defines the active set.
            double change = sweep_all(lambda, coefs);
            ++sweeps;
            last_change = change;
            if (change < thr) return true;
            if (sweeps >= max_sweeps) return false;
            active.clear();
            for (Index j = 0; j < q; ++j) {
                if (coefs(j) != 0.0) active.push_back(j);
            }
            while (true) {
                change = 0.0;
                for (Index j : active) change = std::max(change, update(j, lambda, coefs));
                ++sweeps;
                last_change = change;
                if (change < thr) break;
                if (sweeps >= max_sweeps) return false;
            }
        }
    }

    double intercept(const Vector& coefs) const { return tmean_ - dmean_.dot(coefs); }

    /// Exact solve of the stationarity equations on the current nonzero
    /// set with signs held fixed. Kept only when the signs survive and the
    /// objective does not increase.
    void refine(double lambda, Vector& coefs) {
        std::vector<Index> act;
        for (Index j = 0; j < dc_.cols(); ++j) {
            if (coefs(j) != 0.0 && a_(j) > 0.0) act.push_back(j);
        }
        if (act.empty()) return;
        const auto m = static_cast<Index>(act.size());
        Matrix gram(m, m);
        Vector rhs(m);
        for (Index r = 0; r < m; ++r) {
            const Index j = act[static_cast<std::size_t>(r)];
            for (Index c = 0; c <= r; ++c) {
                gram(r, c) = gram(c, r) = vdc_.col(j).dot(dc_.col(act[static_cast<std::size_t>(c)]));
            }
            rhs(r) = vdc_.col(j).dot(tc_) - lambda * pf_(j) * (coefs(j) > 0.0 ? 1.0 : -1.0);
        }
        Eigen::LDLT<Matrix> ldlt(gram);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return;
        const Vector b = ldlt.solve(rhs);
        if (!b.allFinite()) return;
        Vector next = coefs;
        for (Index r = 0; r < m; ++r) {
            const Index j = act[static_cast<std::size_t>(r)];
            if (b(r) * coefs(j) <= 0.0 || b(r) < lb_(j)) return;
            next(j) = b(r);
        }
        const Vector next_resid = tc_ - dc_ * next;
        if (penalized(lambda, next, next_resid) <= penalized(lambda, coefs, resid_)) {
            coefs = std::move(next);
            resid_ = next_resid;
        }
    }

private:
    double penalized(double lambda, const Vector& coefs, const Vector& resid) const {
        return 0.5 * (resid.array().square() * v_.array()).sum() + lambda * pf_.dot(coefs.cwiseAbs());
    }

    double sweep_all(double lambda, Vector& coefs) {
        double change = 0.0;
        for (Index j = 0; j < dc_.cols(); ++j) change = std::max(change, update(j, lambda, coefs));
        return change;
    }

    double update(Index j, double lambda, Vector& coefs) {
        const double a = a_(j);
        if (!(a > 0.0)) return 0.0;
        const double old = coefs(j);
        const double u = a * old + vdc_.col(j).dot(resid_);
        const double thresh = lambda * pf_(j);
        double next = 0.0;
        if (u > thresh) {
            next = (u - thresh) / a;
        } else if (u < -thresh) {
            next = (u + thresh) / a;
        }
        next = std::max(next, lb_(j));
        const double delta = next - old;
        if (delta == 0.0) return 0.0;
        coefs(j) = next;
        resid_.noalias() -= delta * dc_.col(j);
        return a * delta * delta;
    }

    const Vector& pf_;
    const Vector& lb_;
    Vector v_;
    Vector dmean_;
    double tmean_ = 0.0;
    Matrix dc_;
    Matrix vdc_;
    Vector a_;
    Vector tc_;
    Vector resid_;
    double null_scale_ = 0.0;
};

[[noreturn]] void throw_no_convergence(double lambda, long sweeps, double change) {
    std::ostringstream msg;
    msg << "coordinate descent did not converge at lambda=" << lambda << " after " << sweeps
        << " sweeps (last max weighted change " << change << ")";
    throw NumericalError(msg.str());
}

WeightedCd make_gaussian_cd(const SolverProblem& problem) {
    const Vector v = problem.weights / problem.weights.sum();
    const Vector t = problem.target - problem.offset;
    return WeightedCd(problem.design, v, t, problem.penalty_factors, problem.lower_bounds);
}

Solution solve_gaussian(const SolverProblem& problem, double lambda, const FitConfig& config, Vector coefs,
                        WeightedCd& cd, bool refine) {
    Solution sol;
    double change = 0.0;
    if (!cd.solve(lambda, coefs, config.tol, config.max_iter, sol.sweeps, change)) {
        throw_no_convergence(lambda, sol.sweeps, change);
    }
    if (refine) {
        cd.refine(lambda, coefs);
        if (!cd.solve(lambda, coefs, config.tol, config.max_iter, sol.sweeps, change)) {
            throw_no_convergence(lambda, sol.sweeps, change);
        }
    }
    sol.intercept = cd.intercept(coefs);
    sol.coefs = std::move(coefs);
    sol.objective = objective_value(problem, lambda, sol.intercept, sol.coefs);
    return sol;
}

double binomial_null_intercept(const SolverProblem& problem) {
    const double total = problem.weights.sum();
    const double ybar = std::clamp(problem.weights.dot(problem.target) / total, 1e-5, 1.0 - 1e-5);
    double b0 = std::log(ybar / (1.0 - ybar));
    if (problem.offset.isZero(0.0)) return b0;
    for (int it = 0; it < 100; ++it) {
        double score = 0.0, info = 0.0;
        for (Index i = 0; i < problem.n(); ++i) {
            const double prob = sigmoid(problem.offset(i) + b0);
            score += problem.weights(i) * (problem.target(i) - prob);
            info += problem.weights(i) * prob * (1.0 - prob);
        }
        if (info <= 0.0) break;
        const double step = score / info;
        b0 += step;
        if (std::abs(step) < 1e-12) break;
    }
    return b0;
}

Solution solve_binomial(const SolverProblem& problem, double lambda, const FitConfig& config, Vector coefs,
                        double intercept, bool have_intercept) {
    const Index n = problem.n();
    const double total = problem.weights.sum();
    if (!have_intercept) intercept = binomial_null_intercept(problem);
    Solution sol;
    double obj = objective_value(problem, lambda, intercept, coefs);
    Vector v(n), u(n);
    for (int outer = 0; outer < kMaxOuterIrls; ++outer) {
        const Vector eta = linear_predictor(problem, intercept, coefs);
        for (Index i = 0; i < n; ++i) {
            const double prob = sigmoid(eta(i));
            const double var = std::max(prob * (1.0 - prob), kMinIrlsWeight);
            v(i) = problem.weights(i) * var / total;
            u(i) = eta(i) - problem.offset(i) + (problem.target(i) - prob) / var;
        }
        WeightedCd cd(problem.design, v, u, problem.penalty_factors, problem.lower_bounds);
        Vector next = coefs;
        double change = 0.0;
        long inner = 0;  // sweep budget applies to each weighted least-squares solve
        const bool ok = cd.solve(lambda, next, config.tol, config.max_iter, inner, change);
        sol.sweeps += inner;
        if (!ok) throw_no_convergence(lambda, inner, change);
        double next_b0 = cd.intercept(next);
        double next_obj = objective_value(problem, lambda, next_b0, next);
        // Step halving on objective increase; the feasible set is convex so
        // the blend stays feasible.
        for (int h = 0; h < kMaxStepHalvings && next_obj > obj + 1e-15 * std::abs(obj); ++h) {
            next = 0.5 * (next + coefs);
            next_b0 = 0.5 * (next_b0 + intercept);
            next_obj = objective_value(problem, lambda, next_b0, next);
        }
        const double delta = std::abs(obj - next_obj);
        coefs = std::move(next);
        intercept = next_b0;
        obj = next_obj;
        if (delta <= config.tol * std::max(1e-3, std::abs(obj))) break;
    }
    sol.intercept = intercept;
    sol.coefs = std::move(coefs);
    sol.objective = obj;
    return sol;
}

// Exact null model, used at lambda >= lambda_max where rounding in the
// coordinate updates could otherwise admit a ~1e-17 coefficient.
Solution null_solution(const SolverProblem& problem, double lambda) {
    Solution sol;
    sol.coefs = Vector::Zero(problem.q());
    if (problem.family == Family::binomial) {
        sol.intercept = binomial_null_intercept(problem);
    } else {
        sol.intercept = problem.weights.dot(problem.target - problem.offset) / problem.weights.sum();
    }
    sol.objective = objective_value(problem, lambda, sol.intercept, sol.coefs);
    return sol;
}

bool all_penalized(const SolverProblem& problem) { return (problem.penalty_factors.array() > 0.0).all(); }

Solution solve_impl(const SolverProblem& problem, double lambda, const FitConfig& config, const Solution* warm,
                    double lmax, WeightedCd* gaussian_cd = nullptr, bool refine = false) {
    if (lambda >= lmax && all_penalized(problem)) return null_solution(problem, lambda);
    Vector coefs = warm ? warm->coefs : Vector::Zero(problem.q());
    // Warm starts may come from a different bound configuration.
    coefs = coefs.cwiseMax(problem.lower_bounds);
    if (problem.family == Family::binomial) {
        return solve_binomial(problem, lambda, config, std::move(coefs), warm ? warm->intercept : 0.0, warm != nullptr);
    }
    if (gaussian_cd) return solve_gaussian(problem, lambda, config, std::move(coefs), *gaussian_cd, refine);
    WeightedCd cd = make_gaussian_cd(problem);
    return solve_gaussian(problem, lambda, config, std::move(coefs), cd, refine);
}

Vector score_vector(const SolverProblem& problem, double intercept, const Vector& coefs, double& intercept_score) {
    const Vector eta = linear_predictor(problem, intercept, coefs);
    Vector resid(problem.n());
    for (Index i = 0; i < problem.n(); ++i) {
        const double mu = problem.family == Family::binomial ? sigmoid(eta(i)) : eta(i);
        resid(i) = problem.weights(i) * (problem.target(i) - mu);
    }
    const double total = problem.weights.sum();
    intercept_score = resid.sum() / total;
    return problem.design.transpose() * resid / total;
}

}  // namespace

SolverProblem make_problem(Matrix design, Vector target, Family family, bool non_negative) {
    SolverProblem problem;
    const Index n = design.rows();
    const Index q = design.cols();
    problem.design = std::move(design);
    problem.target = std::move(target);
    problem.weights = Vector::Ones(n);
    problem.offset = Vector::Zero(n);
    problem.penalty_factors = Vector::Ones(q);
    problem.lower_bounds = Vector::Constant(q, non_negative ? 0.0 : kNoLowerBound);
    problem.family = family;
    return problem;
}

void check_problem(const SolverProblem& problem) {
    const Index n = problem.n();
    const Index q = problem.q();
    if (problem.target.size() != n || problem.weights.size() != n || problem.offset.size() != n) {
        throw ValidationError("solver problem: target/weights/offset length must equal design rows");
    }
    if (problem.penalty_factors.size() != q || problem.lower_bounds.size() != q) {
        throw ValidationError("solver problem: penalty_factors/lower_bounds length must equal design columns");
    }
    if ((problem.weights.array() < 0.0).any() || !(problem.weights.sum() > 0.0)) {
        throw ValidationError("solver problem: weights must be non-negative with a positive sum");
    }
    for (Index j = 0; j < q; ++j) {
        if (!std::isfinite(problem.penalty_factors(j)) || problem.penalty_factors(j) < 0.0) {
            throw ValidationError("solver problem: penalty factor " + std::to_string(j + 1) +
                                  " must be finite and non-negative");
        }
        const double lb = problem.lower_bounds(j);
        if (lb != 0.0 && lb != kNoLowerBound) {
            throw ValidationError("solver problem: lower bounds must be 0 or -infinity");
        }
    }
}

Solution PathSolution::at(Index k) const {
    Solution sol;
    sol.intercept = intercepts(k);
    sol.coefs = coefs.col(k);
    sol.objective = objective(k);
    sol.sweeps = sweeps[static_cast<std::size_t>(k)];
    return sol;
}

Vector linear_predictor(const SolverProblem& problem, double intercept, const Vector& coefs) {
    Vector eta = problem.offset.array() + intercept;
    if (problem.q() > 0) eta.noalias() += problem.design * coefs;
    return eta;
}

double objective_value(const SolverProblem& problem, double lambda, double intercept, const Vector& coefs) {
    const Vector eta = linear_predictor(problem, intercept, coefs);
    const double total = problem.weights.sum();
    double loss = 0.0;
    if (problem.family == Family::binomial) {
        for (Index i = 0; i < problem.n(); ++i) {
            loss += problem.weights(i) * (log1p_exp(eta(i)) - problem.target(i) * eta(i));
        }
        loss /= total;
    } else {
        loss = 0.5 * problem.weights.dot((problem.target - eta).array().square().matrix()) / total;
    }
    return loss + lambda * problem.penalty_factors.dot(coefs.cwiseAbs());
}

double lambda_max(const SolverProblem& problem) {
    check_problem(problem);
    const double total = problem.weights.sum();
    Vector resid(problem.n());
    if (problem.family == Family::binomial) {
        const double b0 = binomial_null_intercept(problem);
        for (Index i = 0; i < problem.n(); ++i) {
            resid(i) = problem.target(i) - sigmoid(problem.offset(i) + b0);
        }
    } else {
        const Vector t = problem.target - problem.offset;
        resid = t.array() - problem.weights.dot(t) / total;
    }
    const Vector g = problem.design.transpose() * problem.weights.cwiseProduct(resid) / total;
    double lmax = 0.0;
    for (Index j = 0; j < problem.q(); ++j) {
        const double pf = problem.penalty_factors(j);
        if (pf <= 0.0) continue;
        const double score = problem.lower_bounds(j) == 0.0 ? std::max(0.0, g(j)) : std::abs(g(j));
        lmax = std::max(lmax, score / pf);
    }
    return lmax;
}

Vector lambda_grid(double lmax, int n_lambda, double min_ratio) {
    if (!(lmax > 0.0)) return Vector::Zero(1);
    Vector grid(n_lambda);
    const double step = std::log(min_ratio) / static_cast<double>(n_lambda - 1);
    for (int k = 0; k < n_lambda; ++k) grid(k) = lmax * std::exp(step * k);
    grid(0) = lmax;
    return grid;
}

PathSolution fit_path(const SolverProblem& problem, const FitConfig& config) {
    check_config(config);
    const double lmax = lambda_max(problem);
    return fit_path(problem, lambda_grid(lmax, config.n_lambda, config.effective_min_ratio(problem.n(), problem.q())),
                    config);
}

PathSolution fit_path(const SolverProblem& problem, const Vector& lambdas, const FitConfig& config) {
    check_problem(problem);
    const Index nl = lambdas.size();
    for (Index k = 0; k < nl; ++k) {
        if (lambdas(k) < 0.0 || (k > 0 && lambdas(k) > lambdas(k - 1))) {
            throw ValidationError("lambda sequence must be non-negative and non-increasing");
        }
    }
    PathSolution path;
    path.lambdas = lambdas;
    path.intercepts.resize(nl);
    path.coefs.resize(problem.q(), nl);
    path.objective.resize(nl);
    path.n_active.resize(static_cast<std::size_t>(nl));
    path.sweeps.resize(static_cast<std::size_t>(nl));
    const double lmax = lambda_max(problem);
    std::optional<WeightedCd> cd;
    if (problem.family == Family::gaussian) cd.emplace(make_gaussian_cd(problem));
    Solution prev;
    for (Index k = 0; k < nl; ++k) {
        Solution sol;
        try {
            sol = solve_impl(problem, lambdas(k), config, k > 0 ? &prev : nullptr, lmax, cd ? &*cd : nullptr);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " [path index " + std::to_string(k) + "]");
        }
        path.intercepts(k) = sol.intercept;
        path.coefs.col(k) = sol.coefs;
        path.objective(k) = sol.objective;
        path.n_active[static_cast<std::size_t>(k)] = (sol.coefs.array() != 0.0).count();
        path.sweeps[static_cast<std::size_t>(k)] = sol.sweeps;
        prev = std::move(sol);
    }
    return path;
}

Solution solve_at(const SolverProblem& problem, double lambda, const FitConfig& config, const Solution* warm) {
    check_problem(problem);
    if (lambda < 0.0) throw ValidationError("lambda must be non-negative");
    return solve_impl(problem, lambda, config, warm, lambda_max(problem), nullptr, true);
}

double max_kkt_violation(const SolverProblem& problem, double lambda, double intercept, const Vector& coefs) {
    double intercept_score = 0.0;
    const Vector g = score_vector(problem, intercept, coefs, intercept_score);
    double worst = std::abs(intercept_score);
    for (Index j = 0; j < problem.q(); ++j) {
        const double pen = lambda * problem.penalty_factors(j);
        double viol = 0.0;
        if (coefs(j) != 0.0) {
            viol = std::abs(g(j) - pen * (coefs(j) > 0.0 ? 1.0 : -1.0));
        } else if (problem.lower_bounds(j) == 0.0) {
            viol = std::max(0.0, g(j) - pen);
        } else {
            viol = std::max(0.0, std::abs(g(j)) - pen);
        }
        worst = std::max(worst, viol);
    }
    return worst;
}

}  // namespace unilasso
