#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace unilasso {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Family { gaussian, binomial };

std::string to_string(Family family);
Family family_from_string(const std::string& name);

// Error taxonomy. The CLI maps each class onto a fixed exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

/**
 * Feature matrix plus response. Columns are features (Eigen default
 * column-major storage, so per-feature scans are contiguous).
 */
struct Dataset {
    Matrix features;
    Vector response;
    Family family = Family::gaussian;
    std::vector<std::string> feature_names;
    std::string response_name = "y";

    Index n() const { return features.rows(); }
    Index p() const { return features.cols(); }
};

Dataset subset_rows(const Dataset& data, std::span<const Index> rows);

/// Generated names x1..xp when the dataset carries none.
std::vector<std::string> default_feature_names(Index p);

struct ValidationReport {
    Index n = 0;
    Index p = 0;
    Family family = Family::gaussian;
    std::vector<bool> constant_mask;
    std::vector<Index> constant_columns;
};

/// Throws ValidationError on n < 3, non-finite entries, or a
/// non-binary binomial response.
ValidationReport validate(const Dataset& data);

struct StandardizationStats {
    Vector means;
    Vector sds;  // population form, divisor n
    std::vector<bool> constant_mask;

    Index p() const { return means.size(); }
    Index n_constant() const;
};

struct Standardized {
    Matrix z;
    StandardizationStats stats;
};

/// z_ij = (x_ij - mean_j) / sd_j. Constant columns come back as zeros
/// with the mask set.
Standardized standardize(const Matrix& x);
Matrix unstandardize(const Matrix& z, const StandardizationStats& stats);

enum class SelectionRule { lambda_min, lambda_1se };

struct FitConfig {
    int n_lambda = 100;
    // <= 0 means the glmnet-style default: 1e-3 when p >= n, else 1e-4.
    double lambda_min_ratio = -1.0;
    int n_folds = 10;
    double tol = 1e-12;
    long max_iter = 100000;
    std::uint64_t seed = 0;
    bool loo = true;
    bool sign_constraint = true;
    bool use_magnitude = true;
    bool strict_cv = false;
    SelectionRule selection = SelectionRule::lambda_min;
    int threads = 1;

    double effective_min_ratio(Index n, Index p) const;
};

/// Throws ValidationError when a field is out of range.
void check_config(const FitConfig& config);

}  // namespace unilasso
