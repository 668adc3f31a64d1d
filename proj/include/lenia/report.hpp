#pragma once

// Evaluation reports on disk.

#include "lenia/evaluation.hpp"
#include "lenia/io.hpp"

#include <string>
#include <vector>

namespace lenia {

void to_json(Json& j, const GeneralizationResult& r);
void to_json(Json& j, const EvalReport& r);

/// Header "params_id,family,value,survival,passes,seeds".
std::string generalization_csv_header();
/// One row per cell that ran.
std::string generalization_csv_rows(const std::string& params_id, const std::vector<GeneralizationResult>& results);

}  // namespace lenia
