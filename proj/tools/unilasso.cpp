#include "unilasso/csv.hpp"
#include "unilasso/parallel.hpp"
#include "unilasso/pipeline.hpp"
#include "unilasso/serialize.hpp"
#include "unilasso/simulate.hpp"
#include "unilasso/verify.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace unilasso;

namespace {

enum ExitCode { kOk = 0, kIo = 2, kValidation = 3, kNumerical = 4 };

struct CommonArgs {
    std::string input;
    std::string response;
    long response_index = 0;
    std::string family = "gaussian";
    bool no_loo = false;
    bool no_sign = false;
    bool no_mag = false;
    std::string external_scores;
    bool strict_cv = false;
    int n_lambda = 100;
    double lambda_min_ratio = -1.0;
    int folds = 10;
    double tol = 1e-12;
    long max_iter = 100000;
    std::uint64_t seed = 0;
    std::string out;
    int threads = 0;
    std::string rule = "min";
};

void add_data_options(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--input", a.input, "CSV file with a header row")->required();
    auto* name = cmd->add_option("--response", a.response, "response column name");
    auto* index = cmd->add_option("--response-index", a.response_index, "response column, 1-based");
    name->excludes(index);
    cmd->add_option("--family", a.family, "gaussian or binomial")
        ->check(CLI::IsMember({"gaussian", "binomial"}));
    cmd->add_option("--threads", a.threads, "worker threads (overrides UNILASSO_THREADS)");
}

void add_fit_options(CLI::App* cmd, CommonArgs& a) {
    add_data_options(cmd, a);
    cmd->add_flag("--no-loo", a.no_loo, "stage 2 on in-sample univariate fits");
    cmd->add_flag("--no-sign", a.no_sign, "drop the non-negativity constraint");
    cmd->add_flag("--no-mag", a.no_mag, "stage 2 on sign(slope) * standardized x");
    cmd->add_option("--external-scores", a.external_scores, "CSV with slope[,intercept][,se] per feature");
    cmd->add_flag("--strict-cv", a.strict_cv, "refit stage 1 inside every fold");
    cmd->add_option("--n-lambda", a.n_lambda, "path length");
    cmd->add_option("--lambda-min-ratio", a.lambda_min_ratio, "smallest lambda over lambda_max");
    cmd->add_option("--folds", a.folds, "cross-validation folds");
    cmd->add_option("--tol", a.tol, "coordinate-descent tolerance");
    cmd->add_option("--max-iter", a.max_iter, "maximum sweeps per lambda");
    cmd->add_option("--seed", a.seed, "fold assignment seed");
    cmd->add_option("--rule", a.rule, "lambda selection: min or 1se")->check(CLI::IsMember({"min", "1se"}));
}

void check_variant_flags(const CommonArgs& a) {
    if (!a.external_scores.empty() && (a.no_loo || a.no_sign || a.no_mag)) {
        throw ValidationError("--external-scores cannot be combined with --no-loo, --no-sign or --no-mag");
    }
}

int resolve_threads(int flag) { return flag > 0 ? flag : default_threads(); }

FitConfig make_config(const CommonArgs& a) {
    FitConfig c;
    c.n_lambda = a.n_lambda;
    c.lambda_min_ratio = a.lambda_min_ratio;
    c.n_folds = a.folds;
    c.tol = a.tol;
    c.max_iter = a.max_iter;
    c.seed = a.seed;
    c.loo = !a.no_loo;
    c.sign_constraint = !a.no_sign;
    c.use_magnitude = !a.no_mag;
    c.strict_cv = a.strict_cv;
    c.selection = a.rule == "1se" ? SelectionRule::lambda_1se : SelectionRule::lambda_min;
    c.threads = resolve_threads(a.threads);
    check_config(c);
    return c;
}

Dataset load(const CommonArgs& a) {
    ResponseSelector sel;
    if (!a.response.empty()) sel.name = a.response;
    if (a.response_index > 0) sel.index = a.response_index;
    if (!sel.name && !sel.index) throw ValidationError("give --response or --response-index");
    return read_dataset(a.input, sel, family_from_string(a.family));
}

ExternalScores load_scores(const std::string& path, Index p) {
    const CsvTable table = read_csv_table(path);
    const Index slope = table.column_index("slope");
    if (slope < 0) throw ValidationError(path + ": external scores need a 'slope' column");
    if (table.values.rows() != p) {
        throw ValidationError(path + ": " + std::to_string(table.values.rows()) + " score rows, data has " +
                              std::to_string(p) + " features");
    }
    ExternalScores scores;
    scores.slopes = table.values.col(slope);
    if (const Index k = table.column_index("intercept"); k >= 0) scores.intercepts = table.values.col(k);
    if (const Index k = table.column_index("se"); k >= 0) scores.ses = table.values.col(k);
    return scores;
}

TwoStageFit run_fit(const Dataset& data, const CommonArgs& a, const FitConfig& config) {
    if (!a.external_scores.empty()) {
        return unilasso_external(data, load_scores(a.external_scores, data.p()), config);
    }
    return variant_fit(data, config);
}

std::string output_prefix(const CommonArgs& a, const char* fallback) { return a.out.empty() ? fallback : a.out; }

void print_summary(std::ostream& os, const CollapsedModel& model) {
    os << "family: " << to_string(model.family) << "  variant: " << to_string(model.variant)
       << "  lambda: " << format_double(model.lambda_selected) << "  nonzero: " << model.support() << " of "
       << model.p() << '\n';
    std::size_t width = 7;
    for (Index j : model.support_set()) width = std::max(width, model.feature_names[static_cast<std::size_t>(j)].size());
    os << std::left << std::setw(static_cast<int>(width) + 2) << "feature" << std::right << std::setw(14)
       << "univariate" << std::setw(14) << "final" << '\n';
    os << std::left << std::setw(static_cast<int>(width) + 2) << "(intercept)" << std::right << std::setw(14) << ""
       << std::setw(14) << std::setprecision(6) << model.gamma0 << '\n';
    for (Index j : model.support_set()) {
        os << std::left << std::setw(static_cast<int>(width) + 2) << model.feature_names[static_cast<std::size_t>(j)]
           << std::right << std::setw(14) << std::setprecision(6) << model.univariate.slopes(j) << std::setw(14)
           << model.gammas(j) << '\n';
    }
}

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
    std::ostringstream buf;
    body(buf);
    write_text_file(path, buf.str());
}

std::vector<Index> n_active_of(const CollapsedPath& path) {
    std::vector<Index> out;
    for (Index k = 0; k < path.size(); ++k) out.push_back((path.gammas.col(k).array() != 0.0).count());
    return out;
}

std::string fmt_or_empty(double v) { return std::isnan(v) ? std::string() : format_double(v); }

// --- subcommands -----------------------------------------------------------

int cmd_fit(const CommonArgs& a) {
    const FitConfig config = make_config(a);
    const Dataset data = load(a);
    const TwoStageFit fit = run_fit(data, a, config);
    const std::string prefix = output_prefix(a, "unilasso_fit");
    write_model(fit.model, prefix + ".json");
    write_file(prefix + "_path.csv", [&](std::ostream& os) {
        write_path_csv(os, fit.collapsed, fit.path.objective, fit.model.feature_names);
    });
    print_summary(std::cout, fit.model);
    return kOk;
}

int cmd_cv(const CommonArgs& a) {
    const FitConfig config = make_config(a);
    const Dataset data = load(a);
    const TwoStageFit fit = run_fit(data, a, config);
    const std::string prefix = output_prefix(a, "unilasso_cv");
    write_model(fit.model, prefix + ".json");
    write_file(prefix + "_cv.csv",
               [&](std::ostream& os) { write_cv_csv(os, fit.cv, n_active_of(fit.collapsed), config.seed); });
    std::cout << "lambda_min " << format_double(fit.cv.lambdas(fit.cv.idx_min)) << " (index " << fit.cv.idx_min + 1
              << ", cv " << format_double(fit.cv.cv_mean(fit.cv.idx_min)) << ")\n"
              << "lambda_1se " << format_double(fit.cv.lambdas(fit.cv.idx_1se)) << " (index " << fit.cv.idx_1se + 1
              << ")\n";
    return kOk;
}

int cmd_predict(const std::string& model_path, const std::string& input, const std::string& out) {
    const CollapsedModel model = read_model(model_path);
    const CsvTable table = read_csv_table(input);
    Matrix x(table.values.rows(), model.p());
    for (Index j = 0; j < model.p(); ++j) {
        const std::string& name = model.feature_names[static_cast<std::size_t>(j)];
        const Index col = table.column_index(name);
        if (col < 0) throw ValidationError(input + ": missing feature column '" + name + "'");
        x.col(j) = table.values.col(col);
        for (Index i = 0; i < x.rows(); ++i) {
            if (!std::isfinite(x(i, j))) {
                throw ValidationError(input + ": non-finite value in column '" + name + "', row " +
                                      std::to_string(i + 1));
            }
        }
    }
    const Prediction pred = predict(model, x);
    const bool binomial = model.family == Family::binomial;
    write_file(out.empty() ? "predictions.csv" : out, [&](std::ostream& os) {
        os << (binomial ? "eta,prob\n" : "eta\n");
        for (Index i = 0; i < pred.eta.size(); ++i) {
            os << format_double(pred.eta(i));
            if (binomial) os << ',' << format_double(pred.prob(i));
            os << '\n';
        }
    });
    return kOk;
}

int cmd_unireg(const CommonArgs& a, int n_boot, double level) {
    if (!a.external_scores.empty() || a.no_sign || a.no_mag) {
        throw ValidationError("unireg accepts only --no-loo among the variant flags");
    }
    const FitConfig config = make_config(a);
    const Dataset data = load(a);
    const std::string prefix = output_prefix(a, "unireg");
    const CollapsedModel model = unireg(data, config);
    write_model(model, prefix + ".json");
    print_summary(std::cout, model);
    if (n_boot > 0) {
        const BootstrapIntervals ci = unireg_bootstrap_ci(data, config, n_boot, level);
        write_file(prefix + "_ci.csv", [&](std::ostream& os) {
            os << "# seed=" << config.seed << " n_boot=" << n_boot << " level=" << format_double(level) << '\n';
            os << "feature,estimate,lower,upper\n";
            for (Index j = 0; j < data.p(); ++j) {
                os << model.feature_names[static_cast<std::size_t>(j)] << ',' << format_double(ci.estimate(j)) << ','
                   << format_double(ci.lower(j)) << ',' << format_double(ci.upper(j)) << '\n';
            }
        });
    }
    return kOk;
}

int cmd_polish(const CommonArgs& a) {
    check_variant_flags(a);
    const FitConfig config = make_config(a);
    const Dataset data = load(a);
    const TwoStageFit base = run_fit(data, a, config);
    const PolishFit fit = polish(data, base, config);
    const std::string prefix = output_prefix(a, "polish");
    write_model(fit.model, prefix + ".json");
    write_file(prefix + "_path.csv", [&](std::ostream& os) {
        write_path_csv(os, fit.stitched, Vector(), fit.model.feature_names, true);
    });
    print_summary(std::cout, fit.model);
    return kOk;
}

struct SimulateArgs {
    std::string scenario;
    int replicates = 20;
    std::vector<std::string> methods{"lasso", "unilasso", "polish", "adaptive", "matching"};
    long n = 0, p = 0, n_test = 0, n_external = 0;
    std::uint64_t seed = 0;
    std::string out;
    int threads = 0;
    int folds = 10;
    int n_lambda = 100;
};

int cmd_simulate(const SimulateArgs& s) {
    SimulationOptions options;
    options.scenario = default_scenario(scenario_from_string(s.scenario));
    if (s.n > 0) options.scenario.n = s.n;
    if (s.p > 0) options.scenario.p = s.p;
    if (s.n_test > 0) options.scenario.n_test = s.n_test;
    if (s.n_external > 0) options.scenario.n_external = s.n_external;
    options.scenario.seed = s.seed;
    options.replicates = s.replicates;
    for (const auto& m : s.methods) options.methods.push_back(variant_from_string(m));
    options.config.n_folds = s.folds;
    options.config.n_lambda = s.n_lambda;
    options.config.threads = resolve_threads(s.threads);
    const auto rows = run_simulation(options);
    const auto summary = summarize(rows, options.methods);
    const std::string prefix = s.out.empty() ? "simulation" : s.out;
    write_file(prefix + "_replicates.csv", [&](std::ostream& os) {
        os << "# scenario=" << s.scenario << " n=" << options.scenario.n << " p=" << options.scenario.p
           << " replicates=" << s.replicates << '\n';
        os << "seed,method,mse,support,tpr,fpr,mse_ratio,sign_violations\n";
        for (const auto& r : rows) {
            os << r.seed << ',' << to_string(r.method) << ',' << format_double(r.metrics.test_error) << ','
               << r.metrics.support << ',' << fmt_or_empty(r.metrics.tpr) << ',' << fmt_or_empty(r.metrics.fpr) << ','
               << fmt_or_empty(r.mse_ratio) << ',' << r.sign_violations << '\n';
        }
    });
    std::ostringstream table;
    table << "method,replicates,mse,mse_se,support,support_se,tpr,tpr_se,fpr,fpr_se,mse_ratio,sign_violations\n";
    for (const auto& r : summary) {
        table << to_string(r.method) << ',' << r.replicates << ',' << format_double(r.mse) << ','
              << fmt_or_empty(r.mse_se) << ',' << format_double(r.support) << ',' << fmt_or_empty(r.support_se) << ','
              << fmt_or_empty(r.tpr) << ',' << fmt_or_empty(r.tpr_se) << ',' << fmt_or_empty(r.fpr) << ','
              << fmt_or_empty(r.fpr_se) << ',' << fmt_or_empty(r.mse_ratio) << ',' << r.sign_violations << '\n';
    }
    write_text_file(prefix + "_summary.csv", table.str());
    std::cout << table.str();
    return kOk;
}

int cmd_verify(const CommonArgs& a, double corrupt_tol) {
    FitConfig config = make_config(a);
    const Dataset data = load(a);
    if (corrupt_tol > 0.0) {
        config.tol = corrupt_tol;
        config.max_iter = 2;
    }
    const VerifyReport report = verify_dataset(data, config);
    std::ostringstream os;
    for (const auto& c : report.checks) {
        os << (c.passed() ? "ok    " : "FAIL  ") << c.name << ": max " << format_double(c.value) << " (tolerance "
           << format_double(c.tolerance) << ", " << c.detail << ")\n";
    }
    std::cout << os.str();
    if (!a.out.empty()) write_text_file(a.out, os.str());
    if (!report.passed()) {
        std::cerr << "verify: at least one oracle check failed\n";
        return kNumerical;
    }
    return kOk;
}

int cmd_bench(const CommonArgs& a) {
    const FitConfig config = make_config(a);
    const Dataset data = load(a);
    const auto start = std::chrono::steady_clock::now();
    const UnivariateFits fits = univariate_stage(data, config.threads);
    const auto mid = std::chrono::steady_clock::now();
    const Stage2Design design = build_stage2(data, fits, Stage2Options::from_config(config));
    const PathSolution path = fit_path(design.problem, config);
    const auto end = std::chrono::steady_clock::now();
    write_file(output_prefix(a, "bench") + ".csv", [&](std::ostream& os) {
        os << "index,lambda,sweeps,n_active,objective\n";
        for (Index k = 0; k < path.size(); ++k) {
            os << k + 1 << ',' << format_double(path.lambdas(k)) << ',' << path.sweeps[static_cast<std::size_t>(k)]
               << ',' << path.n_active[static_cast<std::size_t>(k)] << ',' << format_double(path.objective(k))
               << '\n';
        }
    });
    using ms = std::chrono::duration<double, std::milli>;
    std::cerr << "stage 1: " << ms(mid - start).count() << " ms, stage 2 path: " << ms(end - mid).count()
              << " ms\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"uniLasso: univariate-guided sparse regression"};
    app.require_subcommand(1);
    CommonArgs fit_args, cv_args, unireg_args, polish_args, verify_args, bench_args;
    auto* fit = app.add_subcommand("fit", "fit the path, select lambda by CV, write model and path");
    add_fit_options(fit, fit_args);
    fit->add_option("--out", fit_args.out, "output prefix");
    auto* cv = app.add_subcommand("cv", "cross-validate and write the CV curve");
    add_fit_options(cv, cv_args);
    cv->add_option("--out", cv_args.out, "output prefix");

    std::string model_path, predict_input, predict_out;
    auto* pred = app.add_subcommand("predict", "apply a saved model to a CSV");
    pred->add_option("--model", model_path, "model JSON")->required();
    pred->add_option("--input", predict_input, "CSV with the model's feature columns")->required();
    pred->add_option("--out", predict_out, "predictions CSV");

    int n_boot = 0;
    double level = 0.95;
    auto* ureg = app.add_subcommand("unireg", "lambda -> 0 limit, optional bootstrap intervals");
    add_fit_options(ureg, unireg_args);
    ureg->add_option("--out", unireg_args.out, "output prefix");
    ureg->add_option("--bootstrap", n_boot, "bootstrap resamples (>= 100)");
    ureg->add_option("--level", level, "interval level");

    auto* pol = app.add_subcommand("polish", "lasso on top of the selected fit, stitched path");
    add_fit_options(pol, polish_args);
    pol->add_option("--out", polish_args.out, "output prefix");

    SimulateArgs sim;
    auto* simc = app.add_subcommand("simulate", "replicated simulation study");
    simc->add_option("--scenario", sim.scenario, "scenario name")->required();
    simc->add_option("--seed", sim.seed, "base seed")->required();
    simc->add_option("--replicates", sim.replicates, "number of replicates");
    simc->add_option("--methods", sim.methods, "methods to run")->delimiter(',');
    simc->add_option("--n", sim.n, "training rows");
    simc->add_option("--p", sim.p, "features");
    simc->add_option("--n-test", sim.n_test, "test rows");
    simc->add_option("--n-external", sim.n_external, "external rows (external scenario)");
    simc->add_option("--folds", sim.folds, "cross-validation folds");
    simc->add_option("--n-lambda", sim.n_lambda, "path length");
    simc->add_option("--threads", sim.threads, "worker threads (overrides UNILASSO_THREADS)");
    simc->add_option("--out", sim.out, "output prefix");

    double corrupt_tol = 0.0;
    auto* ver = app.add_subcommand("verify", "oracle checks on a small dataset");
    add_fit_options(ver, verify_args);
    ver->add_option("--out", verify_args.out, "report file");
    ver->add_option("--corrupt-tol", corrupt_tol, "test hook: loosen the solver")->group("");

    auto* bench = app.add_subcommand("bench", "time stage 1 and the stage-2 path");
    add_fit_options(bench, bench_args);
    bench->add_option("--out", bench_args.out, "output prefix");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*fit) return check_variant_flags(fit_args), cmd_fit(fit_args);
        if (*cv) return check_variant_flags(cv_args), cmd_cv(cv_args);
        if (*pred) return cmd_predict(model_path, predict_input, predict_out);
        if (*ureg) return cmd_unireg(unireg_args, n_boot, level);
        if (*pol) return cmd_polish(polish_args);
        if (*simc) return cmd_simulate(sim);
        if (*ver) return check_variant_flags(verify_args), cmd_verify(verify_args, corrupt_tol);
        if (*bench) return check_variant_flags(bench_args), cmd_bench(bench_args);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    }
    return kOk;
}
