#include "unilasso/serialize.hpp"

#include "unilasso/csv.hpp"

#include "json.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

namespace unilasso {

namespace {

using nlohmann::json;

json to_array(const Vector& v) {
    json arr = json::array();
    for (Index k = 0; k < v.size(); ++k) arr.push_back(v(k));
    return arr;
}

Vector from_array(const json& arr, const char* field) {
    if (!arr.is_array()) throw ValidationError(std::string("model field '") + field + "' must be an array");
    Vector v(static_cast<Index>(arr.size()));
    for (std::size_t k = 0; k < arr.size(); ++k) {
        if (!arr[k].is_number()) throw ValidationError(std::string("model field '") + field + "' must hold numbers");
        v(static_cast<Index>(k)) = arr[k].get<double>();
    }
    return v;
}

const json& require(const json& doc, const char* field) {
    if (!doc.contains(field)) throw ValidationError(std::string("model JSON lacks field '") + field + "'");
    return doc.at(field);
}

}  // namespace

std::string model_to_json(const CollapsedModel& model) {
    for (Index j = 0; j < model.p(); ++j) {
        if (!std::isfinite(model.gammas(j))) throw NumericalError("cannot serialize non-finite coefficient");
    }
    json doc;
    doc["family"] = to_string(model.family);
    doc["variant_tag"] = to_string(model.variant);
    doc["gamma0"] = model.gamma0;
    doc["gammas"] = to_array(model.gammas);
    doc["lambda_selected"] = model.lambda_selected;
    doc["feature_names"] = model.feature_names;
    doc["univariate"] = {{"intercepts", to_array(model.univariate.intercepts)},
                         {"slopes", to_array(model.univariate.slopes)}};
    return doc.dump(2) + "\n";
}

CollapsedModel model_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed model JSON: ") + e.what());
    }
    CollapsedModel model;
    try {
        model.family = family_from_string(require(doc, "family").get<std::string>());
        model.variant = variant_from_string(require(doc, "variant_tag").get<std::string>());
        model.gamma0 = require(doc, "gamma0").get<double>();
        model.gammas = from_array(require(doc, "gammas"), "gammas");
        model.lambda_selected = require(doc, "lambda_selected").get<double>();
        model.feature_names = require(doc, "feature_names").get<std::vector<std::string>>();
        const json& uni = require(doc, "univariate");
        model.univariate.family = model.family;
        model.univariate.intercepts = from_array(require(uni, "intercepts"), "univariate.intercepts");
        model.univariate.slopes = from_array(require(uni, "slopes"), "univariate.slopes");
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad model JSON: ") + e.what());
    }
    const Index p = model.gammas.size();
    if (static_cast<Index>(model.feature_names.size()) != p || model.univariate.slopes.size() != p ||
        model.univariate.intercepts.size() != p) {
        throw ValidationError("model JSON arrays disagree in length");
    }
    model.thetas = Vector::Zero(p);
    return model;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("failed writing '" + path + "'");
}

void write_model(const CollapsedModel& model, const std::string& path) { write_text_file(path, model_to_json(model)); }

CollapsedModel read_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_from_json(buf.str());
}

void write_path_csv(std::ostream& out, const CollapsedPath& path, const Vector& objective,
                    const std::vector<std::string>& feature_names, bool with_stage) {
    out << "lambda,df,objective";
    if (with_stage) out << ",stage";
    for (const auto& name : feature_names) out << ',' << name;
    out << '\n';
    for (Index k = 0; k < path.size(); ++k) {
        const auto df = (path.gammas.col(k).array() != 0.0).count();
        out << format_double(path.lambdas(k)) << ',' << df << ',';
        if (k < objective.size()) out << format_double(objective(k));
        if (with_stage) out << ',' << path.stage[static_cast<std::size_t>(k)];
        for (Index j = 0; j < path.gammas.rows(); ++j) out << ',' << format_double(path.gammas(j, k));
        out << '\n';
    }
}

void write_cv_csv(std::ostream& out, const CvResult& cv, const std::vector<Index>& n_active, std::uint64_t seed) {
    out << "# seed=" << seed << " n_folds=" << cv.n_folds << " idx_min=" << cv.idx_min << " idx_1se=" << cv.idx_1se
        << '\n';
    out << "# folds=";
    for (std::size_t i = 0; i < cv.fold_assignment.size(); ++i) {
        if (i) out << ' ';
        out << cv.fold_assignment[i] + 1;
    }
    out << '\n';
    const bool misclass = cv.cv_misclass.size() == cv.lambdas.size() && cv.lambdas.size() > 0;
    out << "lambda,cv_mean,cv_se,n_active";
    if (misclass) out << ",cv_misclass";
    out << '\n';
    for (Index k = 0; k < cv.lambdas.size(); ++k) {
        out << format_double(cv.lambdas(k)) << ',' << format_double(cv.cv_mean(k)) << ','
            << format_double(cv.cv_se(k)) << ',' << n_active[static_cast<std::size_t>(k)];
        if (misclass) out << ',' << format_double(cv.cv_misclass(k));
        out << '\n';
    }
}

}  // namespace unilasso
