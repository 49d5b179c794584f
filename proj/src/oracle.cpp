#include "unilasso/oracle.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace unilasso::oracle {

namespace {

double logistic(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

}  // namespace

std::pair<double, double> logistic_newton(const Vector& x, const Vector& y, int iterations) {
    double b0 = 0.0, b1 = 0.0;
    for (int it = 0; it < iterations; ++it) {
        double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
        for (Index i = 0; i < x.size(); ++i) {
            const double prob = logistic(b0 + b1 * x(i));
            const double w = prob * (1.0 - prob);
            g0 += y(i) - prob;
            g1 += (y(i) - prob) * x(i);
            h00 += w;
            h01 += w * x(i);
            h11 += w * x(i) * x(i);
        }
        const double det = h00 * h11 - h01 * h01;
        if (!(det > 0.0)) break;
        b0 += (h11 * g0 - h01 * g1) / det;
        b1 += (h00 * g1 - h01 * g0) / det;
    }
    return {b0, b1};
}

Matrix loo_refit(const Matrix& z, const Vector& y, Family family) {
    const Index n = z.rows();
    const Index p = z.cols();
    if (n > kMaxLooRows) {
        throw ValidationError("leave-one-out refit oracle limited to " + std::to_string(kMaxLooRows) + " rows");
    }
    Matrix out(n, p);
    Vector xs(n - 1), ys(n - 1);
    for (Index j = 0; j < p; ++j) {
        for (Index i = 0; i < n; ++i) {
            Index k = 0;
            for (Index r = 0; r < n; ++r) {
                if (r == i) continue;
                xs(k) = z(r, j);
                ys(k) = y(r);
                ++k;
            }
            if (family == Family::binomial) {
                const auto [b0, b1] = logistic_newton(xs, ys);
                out(i, j) = b0 + b1 * z(i, j);
            } else {
                const double mx = xs.mean();
                const double my = ys.mean();
                double sxx = 0.0, sxy = 0.0;
                for (Index r = 0; r < n - 1; ++r) {
                    sxx += (xs(r) - mx) * (xs(r) - mx);
                    sxy += (xs(r) - mx) * (ys(r) - my);
                }
                const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
                out(i, j) = my + slope * (z(i, j) - mx);
            }
        }
    }
    return out;
}

GradientResult projected_gradient(const SolverProblem& problem, double lambda) {
    check_problem(problem);
    const Index n = problem.n();
    const Index q = problem.q();
    if (q > kMaxGradientColumns) {
        throw ValidationError("projected-gradient oracle limited to " + std::to_string(kMaxGradientColumns) +
                              " columns");
    }
    const double total = problem.weights.sum();
    Matrix aug(n, q + 1);
    aug.col(0).setOnes();
    aug.rightCols(q) = problem.design;
    const Matrix gram = aug.transpose() * problem.weights.asDiagonal() * aug / total;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    double lip = eig.eigenvalues().maxCoeff();
    if (problem.family == Family::binomial) lip *= 0.25;
    const double step = 1.0 / std::max(lip, 1e-300);

    auto loss_and_grad = [&](const Vector& x, Vector* grad) {
        const Vector eta = problem.offset + aug * x;
        Vector resid(n);
        double loss = 0.0;
        for (Index i = 0; i < n; ++i) {
            if (problem.family == Family::binomial) {
                const double e = eta(i);
                const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
                loss += problem.weights(i) * (softplus - problem.target(i) * e);
                resid(i) = problem.target(i) - logistic(e);
            } else {
                resid(i) = problem.target(i) - eta(i);
                loss += 0.5 * problem.weights(i) * resid(i) * resid(i);
            }
        }
        if (grad) *grad = -(aug.transpose() * problem.weights.cwiseProduct(resid)) / total;
        return loss / total;
    };
    auto penalty = [&](const Vector& x) {
        double pen = 0.0;
        for (Index j = 0; j < q; ++j) pen += problem.penalty_factors(j) * std::abs(x(j + 1));
        return lambda * pen;
    };

    Vector x = Vector::Zero(q + 1);
    Vector grad(q + 1);
    double obj = loss_and_grad(x, &grad) + penalty(x);
    constexpr long kMaxIterations = 1000000;
    for (long it = 1; it <= kMaxIterations; ++it) {
        Vector next = x - step * grad;
        for (Index j = 0; j < q; ++j) {
            const double thresh = step * lambda * problem.penalty_factors(j);
            double v = next(j + 1);
            v = v > thresh ? v - thresh : (v < -thresh ? v + thresh : 0.0);
            next(j + 1) = std::max(v, problem.lower_bounds(j));
        }
        const double next_obj = loss_and_grad(next, &grad) + penalty(next);
        const double move = (next - x).cwiseAbs().maxCoeff();
        const double change = std::abs(obj - next_obj);
        x = std::move(next);
        obj = next_obj;
        if (change < 1e-10 * std::max(1e-6, std::abs(obj)) && move < 1e-13) {
            return {x(0), x.tail(q), obj, it};
        }
    }
    throw NumericalError("projected-gradient oracle hit its iteration cap");
}

namespace {

Vector solve_subset(const Matrix& a, const Vector& b, const std::vector<Index>& set) {
    Matrix sub(a.rows(), static_cast<Index>(set.size()));
    for (std::size_t k = 0; k < set.size(); ++k) sub.col(static_cast<Index>(k)) = a.col(set[k]);
    return sub.colPivHouseholderQr().solve(b);
}

}  // namespace

NnlsResult nnls_active_set(const Matrix& design, const Vector& target, bool intercept) {
    const Index q = design.cols();
    Vector dmean = Vector::Zero(q);
    double tmean = 0.0;
    if (intercept) {
        dmean = design.colwise().mean().transpose();
        tmean = target.mean();
    }
    const Matrix a = design.rowwise() - dmean.transpose();
    const Vector b = target.array() - tmean;

    Vector x = Vector::Zero(q);
    std::vector<bool> passive(static_cast<std::size_t>(q), false);
    const double eps = 1e-12 * std::max(1.0, (a.transpose() * b).cwiseAbs().maxCoeff());
    const long guard = 10 * std::max<Index>(q, 1);
    long outer = 0;
    while (true) {
        const Vector w = a.transpose() * (b - a * x);
        Index best = -1;
        double best_w = eps;
        for (Index j = 0; j < q; ++j) {
            if (!passive[j] && w(j) > best_w) {
                best_w = w(j);
                best = j;
            }
        }
        if (best < 0) break;
        if (++outer > guard) throw NumericalError("NNLS active-set oracle cycled");
        passive[best] = true;
        while (true) {
            std::vector<Index> set;
            for (Index j = 0; j < q; ++j) {
                if (passive[j]) set.push_back(j);
            }
            const Vector s_set = solve_subset(a, b, set);
            Vector s = Vector::Zero(q);
            for (std::size_t k = 0; k < set.size(); ++k) s(set[k]) = s_set(static_cast<Index>(k));
            bool feasible = true;
            for (Index j : set) feasible = feasible && s(j) > 0.0;
            if (feasible) {
                x = s;
                break;
            }
            double alpha = 1.0;
            for (Index j : set) {
                if (s(j) <= 0.0) alpha = std::min(alpha, x(j) / (x(j) - s(j)));
            }
            x += alpha * (s - x);
            for (Index j : set) {
                if (x(j) <= 1e-15) {
                    x(j) = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    return {tmean - dmean.dot(x), x};
}

NnlsResult least_squares(const Matrix& design, const Vector& target, bool intercept) {
    Vector dmean = Vector::Zero(design.cols());
    double tmean = 0.0;
    if (intercept) {
        dmean = design.colwise().mean().transpose();
        tmean = target.mean();
    }
    const Matrix a = design.rowwise() - dmean.transpose();
    const Vector b = target.array() - tmean;
    const Vector coefs = (a.transpose() * a).ldlt().solve(a.transpose() * b);
    return {tmean - dmean.dot(coefs), coefs};
}

OrthonormalCoefficients orthonormal_formula(const Vector& beta_hats, double lambda) {
    OrthonormalCoefficients out{Vector::Zero(beta_hats.size()), Vector::Zero(beta_hats.size())};
    for (Index j = 0; j < beta_hats.size(); ++j) {
        const double b = beta_hats(j);
        const double mag = std::abs(b);
        const double sign = b > 0 ? 1.0 : (b < 0 ? -1.0 : 0.0);
        if (mag > 0.0) out.unilasso(j) = sign * std::max(0.0, mag - lambda / mag);
        out.lasso(j) = sign * std::max(0.0, mag - lambda);
    }
    return out;
}

}  // namespace unilasso::oracle
