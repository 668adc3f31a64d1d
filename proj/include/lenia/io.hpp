#pragma once

// On-disk formats: parameter files, grid snapshots, obstacle configs and run directories.

#include "lenia/imgep.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace lenia {

inline constexpr int kParamsSchemaVersion = 1;

using Json = nlohmann::json;
namespace fs = std::filesystem;

void to_json(Json& j, const Rule& r);
void from_json(const Json& j, Rule& r);
void to_json(Json& j, const RuleSet& r);
void from_json(const Json& j, RuleSet& r);
void to_json(Json& j, const Disk& d);
void from_json(const Json& j, Disk& d);
void to_json(Json& j, const ObstacleConfig& o);
void from_json(const Json& j, ObstacleConfig& o);
void to_json(Json& j, const ParamRanges& q);
void from_json(const Json& j, ParamRanges& q);
void to_json(Json& j, const SearchConfig& c);
/// Missing keys keep the values already in `c`.
void from_json(const Json& j, SearchConfig& c);
void to_json(Json& j, const RolloutLedger& l);
void to_json(Json& j, const PerturbationSpec& p);

/// Rules plus init pattern, as stored in a parameter file.
struct ParamsFile {
  RuleSet rules;
  InitPattern init;
};

/// Writes `<stem>.params.json`; the init goes to `<stem>.init.bin` when `external_init`, else inline.
fs::path write_params(const fs::path& stem, const RuleSet& rules, const InitPattern& init, bool external_init = true);
/// Accepts inline init data (nested rows) or a path relative to the parameter file.
ParamsFile read_params(const fs::path& path);
Json params_json(const RuleSet& rules, const InitPattern& init);
ParamsFile params_from_json(const Json& j, const fs::path& base_dir = {});

/// Raw little-endian f32, row-major.
void write_f32(const fs::path& path, const std::vector<float>& data);
std::vector<float> read_f32(const fs::path& path, std::size_t expected_count);

/// `<stem>.bin` holding [C,H,W] plus the `<stem>.json` sidecar {shape, dtype, step}.
void write_snapshot(const fs::path& stem, const GridState<float>& state);
GridState<float> read_snapshot(const fs::path& stem);

void write_obstacles(const fs::path& path, const ObstacleConfig& obstacles);
ObstacleConfig read_obstacles(const fs::path& path);

/// One history line: lineage, goal, outcome and the relative pattern path.
Json history_line(const HistoryEntry& e);

/// run.json, history.jsonl and patterns/NNN.params.json + NNN.init.bin.
void write_run(const fs::path& dir, const DiscoveryRun& run);

struct StoredPattern {
  int id = 0;
  double c = 0.0;
  Goal reached;
  ParamsFile params;
};
/// Every pattern listed in a run directory's history, in id order.
std::vector<StoredPattern> read_run_patterns(const fs::path& dir);

Json read_json(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace lenia
