#include "unilasso/data.hpp"

#include <cmath>
#include <sstream>

namespace unilasso {

std::string to_string(Family family) {
    return family == Family::binomial ? "binomial" : "gaussian";
}

Family family_from_string(const std::string& name) {
    if (name == "gaussian") return Family::gaussian;
    if (name == "binomial") return Family::binomial;
    throw ValidationError("unknown family '" + name + "' (expected gaussian or binomial)");
}

Dataset subset_rows(const Dataset& data, std::span<const Index> rows) {
    Dataset out;
    out.family = data.family;
    out.feature_names = data.feature_names;
    out.response_name = data.response_name;
    out.features.resize(static_cast<Index>(rows.size()), data.p());
    out.response.resize(static_cast<Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        out.features.row(static_cast<Index>(k)) = data.features.row(rows[k]);
        out.response(static_cast<Index>(k)) = data.response(rows[k]);
    }
    return out;
}

std::vector<std::string> default_feature_names(Index p) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
    return names;
}

namespace {

// Exact equality: a rounded mean can leave a spurious sd of ~1e-17.
bool is_constant_column(const Eigen::Ref<const Vector>& col) {
    return col.size() == 0 || (col.array() == col(0)).all();
}

}  // namespace

ValidationReport validate(const Dataset& data) {
    const Index n = data.n();
    const Index p = data.p();
    if (data.response.size() != n) {
        std::ostringstream msg;
        msg << "response length " << data.response.size() << " does not match " << n << " feature rows";
        throw ValidationError(msg.str());
    }
    if (n < 3) {
        throw ValidationError("need at least 3 observations, got " + std::to_string(n));
    }
    if (!data.feature_names.empty() && static_cast<Index>(data.feature_names.size()) != p) {
        throw ValidationError("feature_names has wrong length");
    }
    for (Index j = 0; j < p; ++j) {
        for (Index i = 0; i < n; ++i) {
            if (!std::isfinite(data.features(i, j))) {
                std::ostringstream msg;
                msg << "non-finite value in feature ";
                if (!data.feature_names.empty()) msg << "'" << data.feature_names[j] << "' ";
                msg << "(column " << j + 1 << "), row " << i + 1;
                throw ValidationError(msg.str());
            }
        }
    }
    for (Index i = 0; i < n; ++i) {
        const double v = data.response(i);
        if (!std::isfinite(v)) {
            throw ValidationError("non-finite response at row " + std::to_string(i + 1));
        }
        if (data.family == Family::binomial && v != 0.0 && v != 1.0) {
            std::ostringstream msg;
            msg << "non-binary response for binomial family at row " << i + 1 << " (value " << v << ")";
            throw ValidationError(msg.str());
        }
    }

    ValidationReport report;
    report.n = n;
    report.p = p;
    report.family = data.family;
    report.constant_mask.assign(static_cast<std::size_t>(p), false);
    for (Index j = 0; j < p; ++j) {
        if (is_constant_column(data.features.col(j))) {
            report.constant_mask[j] = true;
            report.constant_columns.push_back(j);
        }
    }
    return report;
}

Index StandardizationStats::n_constant() const {
    Index count = 0;
    for (bool c : constant_mask) count += c ? 1 : 0;
    return count;
}

Standardized standardize(const Matrix& x) {
    const Index n = x.rows();
    const Index p = x.cols();
    Standardized out;
    out.z.resize(n, p);
    out.stats.means.resize(p);
    out.stats.sds.resize(p);
    out.stats.constant_mask.assign(static_cast<std::size_t>(p), false);
    for (Index j = 0; j < p; ++j) {
        const auto col = x.col(j);
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().mean());
        out.stats.means(j) = mean;
        if (is_constant_column(col)) {
            out.stats.sds(j) = 0.0;
            out.stats.constant_mask[j] = true;
            out.z.col(j).setZero();
        } else {
            out.stats.sds(j) = sd;
            out.z.col(j) = (col.array() - mean) / sd;
        }
    }
    return out;
}

Matrix unstandardize(const Matrix& z, const StandardizationStats& stats) {
    Matrix x(z.rows(), z.cols());
    for (Index j = 0; j < z.cols(); ++j) {
        if (stats.constant_mask[j]) {
            x.col(j).setConstant(stats.means(j));
        } else {
            x.col(j) = (z.col(j).array() * stats.sds(j) + stats.means(j)).matrix();
        }
    }
    return x;
}

double FitConfig::effective_min_ratio(Index n, Index p) const {
    if (lambda_min_ratio > 0.0) return lambda_min_ratio;
    return p >= n ? 1e-3 : 1e-4;
}

void check_config(const FitConfig& config) {
    if (config.n_lambda < 2) throw ValidationError("n_lambda must be >= 2");
    if (config.lambda_min_ratio > 0.0 && config.lambda_min_ratio >= 1.0) {
        throw ValidationError("lambda_min_ratio must lie in (0, 1)");
    }
    if (config.n_folds < 2) throw ValidationError("n_folds must be >= 2");
    if (!(config.tol > 0.0)) throw ValidationError("tol must be positive");
    if (config.max_iter < 1) throw ValidationError("max_iter must be positive");
}

}  // namespace unilasso
