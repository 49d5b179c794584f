#pragma once

#include "unilasso/cv.hpp"
#include "unilasso/pipeline.hpp"

#include <iosfwd>
#include <string>

namespace unilasso {

/// Model document: family, variant_tag, gamma0, gammas, lambda_selected,
/// feature_names and univariate {intercepts, slopes}. Doubles are written
/// in shortest round-trip form, so read(write(m)) is bitwise exact.
std::string model_to_json(const CollapsedModel& model);
CollapsedModel model_from_json(const std::string& text);

void write_model(const CollapsedModel& model, const std::string& path);
CollapsedModel read_model(const std::string& path);

/// lambda, df, objective, then one coefficient column per feature. A
/// stitched polish path adds a `stage` column; `objective` may be empty.
void write_path_csv(std::ostream& out, const CollapsedPath& path, const Vector& objective,
                    const std::vector<std::string>& feature_names, bool with_stage = false);

/// lambda, cv_mean, cv_se, n_active (+ cv_misclass for binomial). Header
/// comments record the seed and the fold id of every row.
void write_cv_csv(std::ostream& out, const CvResult& cv, const std::vector<Index>& n_active, std::uint64_t seed);

/// Writes `text` to `path`, throwing IoError on failure.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace unilasso
