#include "unilasso/univariate.hpp"

#include "unilasso/parallel.hpp"

#include <cmath>
#include <sstream>

namespace unilasso {

namespace {

void map_to_raw_scale(UnivariateFits& fits) {
    const Index p = fits.std_slopes.size();
    fits.slopes.resize(p);
    fits.intercepts.resize(p);
    for (Index j = 0; j < p; ++j) {
        if (fits.stats.constant_mask[j]) {
            fits.slopes(j) = 0.0;
            fits.intercepts(j) = fits.std_intercepts(j);
        } else {
            fits.slopes(j) = fits.std_slopes(j) / fits.stats.sds(j);
            fits.intercepts(j) = fits.std_intercepts(j) - fits.slopes(j) * fits.stats.means(j);
        }
    }
}

double sigmoid(double eta) {
    return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

double clamp_prob(double prob) { return std::clamp(prob, kProbClamp, 1.0 - kProbClamp); }

double binomial_deviance(const Vector& y, const Eigen::Ref<const Vector>& eta) {
    double dev = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
        const double prob = clamp_prob(sigmoid(eta(i)));
        dev -= 2.0 * (y(i) * std::log(prob) + (1.0 - y(i)) * std::log(1.0 - prob));
    }
    return dev;
}

struct LogisticColumn {
    double intercept = 0.0;
    double slope = 0.0;
    bool separated = false;
};

constexpr int kNewtonSteps = 4;
constexpr int kMaxNewtonSteps = 25;
constexpr double kDevianceTol = 1e-10;

LogisticColumn fit_logistic_column(const Eigen::Ref<const Vector>& z, const Vector& y) {
    const Index n = y.size();
    const double ybar = clamp_prob(y.mean());
    LogisticColumn fit;
    fit.intercept = std::log(ybar / (1.0 - ybar));
    Vector eta = Vector::Constant(n, fit.intercept);
    double dev = binomial_deviance(y, eta);
    Vector w(n), u(n);
    for (int step = 0; step < kMaxNewtonSteps; ++step) {
        for (Index i = 0; i < n; ++i) {
            const double prob = clamp_prob(sigmoid(eta(i)));
            w(i) = prob * (1.0 - prob);
            u(i) = eta(i) + (y(i) - prob) / w(i);
        }
        const double sw = w.sum();
        const double swz = w.dot(z);
        const double swzz = (w.array() * z.array().square()).sum();
        const double swu = w.dot(u);
        const double swzu = (w.array() * z.array() * u.array()).sum();
        double slope = fit.slope;
        if (!fit.separated) {
            const double det = sw * swzz - swz * swz;
            slope = det > 0.0 ? (sw * swzu - swz * swu) / det : 0.0;
            if (std::abs(slope) > kSeparationCap) {
                slope = std::copysign(kSeparationCap, slope);
                fit.separated = true;
            }
        }
        // Intercept is the weighted LS solution given the slope.
        const double intercept = (swu - slope * swz) / sw;
        fit.slope = slope;
        fit.intercept = intercept;
        eta = (intercept + slope * z.array()).matrix();
        const double new_dev = binomial_deviance(y, eta);
        const double change = std::abs(dev - new_dev);
        dev = new_dev;
        if (step + 1 >= kNewtonSteps && change <= kDevianceTol * (std::abs(dev) + 0.1)) break;
    }
    return fit;
}

}  // namespace

UnivariateFits fit_univariate_gaussian(const Matrix& z, const Vector& y, const StandardizationStats& stats,
                                       int threads) {
    const Index n = z.rows();
    const Index p = z.cols();
    UnivariateFits fits;
    fits.family = Family::gaussian;
    fits.stats = stats;
    fits.separated.assign(static_cast<std::size_t>(p), false);
    fits.std_intercepts = Vector::Constant(p, y.mean());
    fits.std_slopes.resize(p);
    fits.insample_fits.resize(n, p);
    const double ybar = y.mean();
    parallel_for(p, threads, [&](long j) {
        const double slope = stats.constant_mask[j] ? 0.0 : z.col(j).dot(y) / static_cast<double>(n);
        fits.std_slopes(j) = slope;
        fits.insample_fits.col(j) = (ybar + slope * z.col(j).array()).matrix();
    });
    map_to_raw_scale(fits);
    return fits;
}

Matrix loo_fits_gaussian(const UnivariateFits& fits, const Matrix& z, const Vector& y) {
    const Index n = z.rows();
    const Index p = z.cols();
    const double dn = static_cast<double>(n);
    const Eigen::ArrayXXd one_minus_h = 1.0 - (1.0 + z.array().square()) / dn;
    Index bad_i = 0, bad_j = 0;
    if (p > 0 && one_minus_h.minCoeff(&bad_i, &bad_j) < kLeverageGuard) {
        std::ostringstream msg;
        msg << "leave-one-out undefined: leverage of row " << bad_i + 1 << " in feature column " << bad_j + 1
            << " is 1 (1 - H = " << one_minus_h(bad_i, bad_j) << ")";
        throw NumericalError(msg.str());
    }
    const Eigen::ArrayXXd yy = y.replicate(1, p).array();
    return (yy - (yy - fits.insample_fits.array()) / one_minus_h).matrix();
}

UnivariateFits fit_univariate_binomial(const Matrix& z, const Vector& y, const StandardizationStats& stats,
                                       int threads) {
    const Index n = z.rows();
    const Index p = z.cols();
    UnivariateFits fits;
    fits.family = Family::binomial;
    fits.stats = stats;
    fits.separated.assign(static_cast<std::size_t>(p), false);
    fits.std_intercepts.resize(p);
    fits.std_slopes.resize(p);
    fits.insample_fits.resize(n, p);
    std::vector<char> separated(static_cast<std::size_t>(p), 0);
    parallel_for(p, threads, [&](long j) {
        const LogisticColumn col = fit_logistic_column(z.col(j), y);
        fits.std_intercepts(j) = col.intercept;
        fits.std_slopes(j) = stats.constant_mask[j] ? 0.0 : col.slope;
        separated[static_cast<std::size_t>(j)] = col.separated ? 1 : 0;
        fits.insample_fits.col(j) = (fits.std_intercepts(j) + fits.std_slopes(j) * z.col(j).array()).matrix();
    });
    for (Index j = 0; j < p; ++j) fits.separated[j] = separated[static_cast<std::size_t>(j)] != 0;
    map_to_raw_scale(fits);
    return fits;
}

Vector weighted_loo_column(const Vector& u, const Vector& w, const Eigen::Ref<const Vector>& z, Index column) {
    const double sw = w.sum();
    const double swz = w.dot(z);
    const double swzz = (w.array() * z.array().square()).sum();
    const double det = sw * swzz - swz * swz;
    Eigen::ArrayXd fit;
    Eigen::ArrayXd lev;
    if (det > 0.0) {
        const double swu = w.dot(u);
        const double swzu = (w.array() * z.array() * u.array()).sum();
        const double slope = (sw * swzu - swz * swu) / det;
        const double intercept = (swu - slope * swz) / sw;
        fit = intercept + slope * z.array();
        lev = w.array() * (swzz - 2.0 * z.array() * swz + z.array().square() * sw) / det;
    } else {
        // Degenerate column: intercept-only weighted mean.
        fit = Eigen::ArrayXd::Constant(u.size(), w.dot(u) / sw);
        lev = w.array() / sw;
    }
    const Eigen::ArrayXd one_minus_h = 1.0 - lev;
    Index bad = 0;
    if (one_minus_h.minCoeff(&bad) < kLeverageGuard) {
        std::ostringstream msg;
        msg << "leave-one-out undefined: weighted leverage of row " << bad + 1 << " in feature column "
            << column + 1 << " is 1";
        throw NumericalError(msg.str());
    }
    return (u.array() - (u.array() - fit) / one_minus_h).matrix();
}

Matrix loo_fits_binomial(const UnivariateFits& fits, const Matrix& z, const Vector& y) {
    const Index n = z.rows();
    const Index p = z.cols();
    Matrix loo(n, p);
    Vector w(n), u(n);
    for (Index j = 0; j < p; ++j) {
        if (fits.separated[j]) {
            loo.col(j) = fits.insample_fits.col(j);
            continue;
        }
        for (Index i = 0; i < n; ++i) {
            const double eta = fits.insample_fits(i, j);
            const double prob = clamp_prob(sigmoid(eta));
            w(i) = prob * (1.0 - prob);
            u(i) = eta + (y(i) - prob) / w(i);
        }
        loo.col(j) = weighted_loo_column(u, w, z.col(j), j);
    }
    return loo;
}

double loo_correlation_threshold(Index n) {
    if (n < 3) throw ValidationError("loo_correlation_threshold needs n >= 3");
    return std::sqrt(2.0 / static_cast<double>(n));
}

UnivariateFits univariate_stage(const Dataset& data, int threads) {
    const Standardized std_data = standardize(data.features);
    UnivariateFits fits = data.family == Family::binomial
                              ? fit_univariate_binomial(std_data.z, data.response, std_data.stats, threads)
                              : fit_univariate_gaussian(std_data.z, data.response, std_data.stats, threads);
    fits.loo_fits = data.family == Family::binomial ? loo_fits_binomial(fits, std_data.z, data.response)
                                                    : loo_fits_gaussian(fits, std_data.z, data.response);
    return fits;
}

}  // namespace unilasso
