#pragma once

#include "unilasso/pipeline.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace unilasso {

enum class ScenarioKind { low_snr, medium_snr, high_snr, homecourt, two_class, counter_example, external };

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_from_string(const std::string& name);

struct Scenario {
    ScenarioKind kind = ScenarioKind::medium_snr;
    Index n = 100;
    Index p = 30;
    double snr = 1.0;
    double rho = 0.5;
    double sparsity = 0.1;
    std::uint64_t seed = 0;
    Index n_test = 10000;
    Index n_external = 50;  // external scenario only
};

/// Defaults for each scenario kind; the seed is left at 0.
Scenario default_scenario(ScenarioKind kind);

/// SNR targets for the equicorrelated scenarios.
double snr_for_level(ScenarioKind kind);

struct SimData {
    Dataset train;
    Dataset test;
    Vector true_beta;  // coefficients of the mean function, p
    double sigma = 0.0;
    std::optional<Dataset> external;
    // homecourt only: the non-negative draw and the pilot univariate slopes
    Vector base_beta;
    Vector pilot_slopes;
};

SimData gen_snr_scenario(Index n, Index p, ScenarioKind level, std::uint64_t seed, Index n_test = 10000);
SimData gen_homecourt(Index n, Index p, double rho, double sparsity, std::uint64_t seed, Index n_test = 10000);
SimData gen_two_class(Index n, Index p, std::uint64_t seed, Index n_test = 10000);
SimData gen_counter_example(Index n, std::uint64_t seed, Index n_test = 10000);
SimData gen_external(Index n, Index p, Index n_external, std::uint64_t seed, Index n_test = 10000);

SimData generate(const Scenario& scenario);

struct Metrics {
    double test_error = 0.0;  // MSE, or misclassification rate for binomial
    Index support = 0;
    double tpr = 0.0;  // NaN without a reference support
    double fpr = 0.0;
};

Metrics evaluate(const CollapsedModel& model, const Dataset& test, const Vector* true_beta = nullptr);

/// Mean pairwise Jaccard index of the supports; two empty supports count 1.
double stability(const std::vector<CollapsedModel>& models);

/// From the CV-selected lasso, steps toward larger lambda until the
/// support is at most `target_support`.
CollapsedModel matching_lasso(const TwoStageFit& lasso, Index target_support);
CollapsedModel matching_lasso(const Dataset& data, Index target_support, const FitConfig& config);

struct SimulationOptions {
    Scenario scenario;
    int replicates = 1;
    std::vector<Variant> methods;
    FitConfig config;
};

struct ReplicateRow {
    std::uint64_t seed = 0;
    Variant method = Variant::lasso;
    Metrics metrics;
    double mse_ratio = 0.0;  // test error over lasso's on the same replicate; NaN without lasso
    Index sign_violations = 0;
};

/// Replicate r uses seed scenario.seed + r. Rows are ordered by replicate,
/// then by the order of `methods`.
std::vector<ReplicateRow> run_simulation(const SimulationOptions& options);

struct SummaryRow {
    Variant method = Variant::lasso;
    int replicates = 0;
    double mse = 0.0, mse_se = 0.0;
    double support = 0.0, support_se = 0.0;
    double tpr = 0.0, tpr_se = 0.0;
    double fpr = 0.0, fpr_se = 0.0;
    double mse_ratio = 0.0;  // mean test error over lasso's mean test error
    Index sign_violations = 0;
};

/// Mean and se = sd / sqrt(R) per method; se is NaN when R = 1.
std::vector<SummaryRow> summarize(const std::vector<ReplicateRow>& rows, const std::vector<Variant>& methods);

/// Features at graded correlation with y; returns the absolute sample
/// correlation at which corr(y, LOO fit) changes sign, by interpolating
/// binned means.
double loo_sign_flip_point(Index n, Index n_features, std::uint64_t seed);

}  // namespace unilasso
