#include "lenia/report.hpp"

#include <sstream>

namespace lenia {

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

void to_json(Json& j, const GeneralizationResult& r) {
  j = Json{{"family", r.cell.family},
           {"value", r.cell.value},
           {"n_obstacles", r.cell.n_obstacles},
           {"obstacle_radius", r.cell.obstacle_radius},
           {"obstacle_speed", Json{r.cell.obstacle_speed.num, r.cell.obstacle_speed.den}},
           {"perturb", r.cell.perturb},
           {"ran", r.ran},
           {"survival", r.survival},
           {"passes", r.passes},
           {"seeds", r.seeds}};
}

void to_json(Json& j, const EvalReport& r) {
  j = Json{{"id", r.id},
           {"prefilter", r.prefilter},
           {"prefilter_reason", r.prefilter_reason},
           {"agent", r.agent},
           {"agent_reason", r.agent_reason},
           {"moving", r.moving},
           {"speed", optional_number(r.speed)},
           {"speed_obstacles", optional_number(r.speed_obstacles)},
           {"robustness", optional_number(r.robustness)},
           {"generalization", r.generalization}};
}

std::string generalization_csv_header() { return "params_id,family,value,survival,passes,seeds\n"; }

std::string generalization_csv_rows(const std::string& params_id, const std::vector<GeneralizationResult>& results) {
  std::ostringstream out;
  out.precision(10);
  for (const GeneralizationResult& r : results) {
    if (r.ran) {
      out << params_id << ',' << r.cell.family << ',' << r.cell.value << ',' << r.survival << ',' << r.passes << ','
          << r.seeds << '\n';
    }
  }
  return out.str();
}

}  // namespace lenia
