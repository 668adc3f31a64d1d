#include "lenia/io.hpp"

#include "lenia/error.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace lenia {

namespace {

[[noreturn]] void io_error(const std::string& what, const fs::path& path) {
  throw Error(ErrorCode::Io, what + ": " + path.string());
}

template <typename T>
void get_if(const Json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    it->get_to(out);
  }
}

std::string zero_pad(int id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", id);
  return buf;
}

/// NaN and infinities have no JSON spelling; they become null.
Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

void to_json(Json& j, const Rule& r) {
  j = Json{{"r", r.r}, {"b", r.b}, {"w", r.w}, {"a", r.a}, {"mu", r.mu}, {"sigma", r.sigma},
           {"h", r.h}, {"c_src", r.c_src}, {"c_dst", r.c_dst}};
}

void from_json(const Json& j, Rule& r) {
  j.at("r").get_to(r.r);
  j.at("b").get_to(r.b);
  j.at("w").get_to(r.w);
  j.at("a").get_to(r.a);
  j.at("mu").get_to(r.mu);
  j.at("sigma").get_to(r.sigma);
  j.at("h").get_to(r.h);
  r.c_src = j.value("c_src", kLearnableChannel);
  r.c_dst = j.value("c_dst", kLearnableChannel);
}

void to_json(Json& j, const RuleSet& r) { j = Json{{"R", r.R}, {"T", r.T}, {"rules", r.rules}}; }

void from_json(const Json& j, RuleSet& r) {
  j.at("R").get_to(r.R);
  j.at("T").get_to(r.T);
  j.at("rules").get_to(r.rules);
}

void to_json(Json& j, const Disk& d) { j = Json{{"x", d.x}, {"y", d.y}, {"radius", d.radius}}; }

void from_json(const Json& j, Disk& d) {
  j.at("x").get_to(d.x);
  j.at("y").get_to(d.y);
  j.at("radius").get_to(d.radius);
}

void to_json(Json& j, const ObstacleConfig& o) {
  j = Json{{"disks", o.disks}, {"speed_num", o.speed.num}, {"speed_den", o.speed.den}};
}

void from_json(const Json& j, ObstacleConfig& o) {
  j.at("disks").get_to(o.disks);
  o.speed.num = j.value("speed_num", 0);
  o.speed.den = j.value("speed_den", 1);
  if (o.speed.den <= 0) {
    throw Error(ErrorCode::InvalidArgument, "obstacle speed denominator must be positive");
  }
}

void to_json(Json& j, const ParamRanges& q) {
  j = Json{{"r", {q.r_min, q.r_max}},     {"b", {q.b_min, q.b_max}},   {"w", {q.w_min, q.w_max}},
           {"a", {q.a_min, q.a_max}},     {"mu", {q.mu_min, q.mu_max}}, {"sigma", {q.sigma_min, q.sigma_max}},
           {"h", {q.h_min, q.h_max}},     {"R", {q.R_min, q.R_max}},   {"T", {q.T_min, q.T_max}}};
}

void from_json(const Json& j, ParamRanges& q) {
  auto pair = [&](const char* key, auto& lo, auto& hi) {
    if (auto it = j.find(key); it != j.end()) {
      it->at(0).get_to(lo);
      it->at(1).get_to(hi);
    }
  };
  pair("r", q.r_min, q.r_max);
  pair("b", q.b_min, q.b_max);
  pair("w", q.w_min, q.w_max);
  pair("a", q.a_min, q.a_max);
  pair("mu", q.mu_min, q.mu_max);
  pair("sigma", q.sigma_min, q.sigma_max);
  pair("h", q.h_min, q.h_max);
  pair("R", q.R_min, q.R_max);
  pair("T", q.T_min, q.T_max);
}

void to_json(Json& j, const SearchConfig& c) {
  const MutationScales& m = c.mutation;
  j = Json{
      {"n_outer", c.n_outer},
      {"history_size", c.history_size},
      {"shape", {c.shape.rows, c.shape.cols}},
      {"rollout_steps", c.rollout_steps},
      {"n_rules", c.n_rules},
      {"ranges", c.ranges},
      {"init_h_divisor", c.init_h_divisor},
      {"init_size", c.init_size},
      {"init_offset", {c.init_row, c.init_col}},
      {"warmup_steps", c.warmup_steps},
      {"warmup_start", {c.warmup_start.x, c.warmup_start.y}},
      {"warmup_increment", c.warmup_increment},
      {"close_radius", c.close_radius},
      {"very_close_radius", c.very_close_radius},
      {"max_very_close", c.max_very_close},
      {"goal_draw_cap", c.goal_draw_cap},
      {"c_filter", c.c_filter},
      {"c_goal", c.c_goal},
      {"mutation_period", c.mutation_period},
      {"gradient_steps_plain", c.gradient_steps_plain},
      {"gradient_steps_mutated", c.gradient_steps_mutated},
      {"adam", {{"lr_rules", c.adam.lr_rules}, {"lr_init", c.adam.lr_init}, {"beta1", c.adam.beta1},
                {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
      {"checkpoint_every", c.checkpoint_every},
      {"mutation", {{"T", {m.T_std, m.T_gate}}, {"R", {m.R_std, m.R_gate}}, {"r", m.r_std}, {"b", m.b_std},
                    {"w", m.w_std}, {"a", m.a_std}, {"mu", {m.mu_std, m.mu_gate}},
                    {"sigma", {m.sigma_std, m.sigma_gate}}, {"h", {m.h_std, m.h_gate}}}},
      {"mutation_retry_cap", c.mutation_retry_cap},
      {"soft_min_mass", c.soft_min_mass},
      {"soft_max_mse", c.soft_max_mse},
      {"n_obstacles", c.n_obstacles},
      {"obstacle_radius", c.obstacle_radius},
      {"obstacle_x_range", {c.obstacle_x_lo, c.obstacle_x_hi}},
      {"clear_radius", c.clear_radius},
      {"eval_rollouts", c.eval_rollouts},
      {"selection_steps", c.selection_steps},
      {"selection_loss_threshold", c.selection_loss_threshold},
      {"max_restarts", c.max_restarts},
      {"no_obstacles", c.no_obstacles},
      {"no_gradient", c.no_gradient},
      {"uniform_goals", c.uniform_goals},
  };
}

void from_json(const Json& j, SearchConfig& c) {
  get_if(j, "n_outer", c.n_outer);
  get_if(j, "history_size", c.history_size);
  if (auto it = j.find("shape"); it != j.end()) {
    it->at(0).get_to(c.shape.rows);
    it->at(1).get_to(c.shape.cols);
  }
  get_if(j, "rollout_steps", c.rollout_steps);
  get_if(j, "n_rules", c.n_rules);
  if (auto it = j.find("ranges"); it != j.end()) {
    from_json(*it, c.ranges);
  }
  get_if(j, "init_h_divisor", c.init_h_divisor);
  get_if(j, "init_size", c.init_size);
  if (auto it = j.find("init_offset"); it != j.end()) {
    it->at(0).get_to(c.init_row);
    it->at(1).get_to(c.init_col);
  }
  get_if(j, "warmup_steps", c.warmup_steps);
  if (auto it = j.find("warmup_start"); it != j.end()) {
    it->at(0).get_to(c.warmup_start.x);
    it->at(1).get_to(c.warmup_start.y);
  }
  get_if(j, "warmup_increment", c.warmup_increment);
  get_if(j, "close_radius", c.close_radius);
  get_if(j, "very_close_radius", c.very_close_radius);
  get_if(j, "max_very_close", c.max_very_close);
  get_if(j, "goal_draw_cap", c.goal_draw_cap);
  get_if(j, "c_filter", c.c_filter);
  get_if(j, "c_goal", c.c_goal);
  get_if(j, "mutation_period", c.mutation_period);
  get_if(j, "gradient_steps_plain", c.gradient_steps_plain);
  get_if(j, "gradient_steps_mutated", c.gradient_steps_mutated);
  if (auto it = j.find("adam"); it != j.end()) {
    get_if(*it, "lr_rules", c.adam.lr_rules);
    get_if(*it, "lr_init", c.adam.lr_init);
    get_if(*it, "beta1", c.adam.beta1);
    get_if(*it, "beta2", c.adam.beta2);
    get_if(*it, "eps", c.adam.eps);
  }
  get_if(j, "checkpoint_every", c.checkpoint_every);
  if (auto it = j.find("mutation"); it != j.end()) {
    MutationScales& m = c.mutation;
    auto gated = [&](const char* key, double& stddev, double& gate) {
      if (auto g = it->find(key); g != it->end()) {
        g->at(0).get_to(stddev);
        g->at(1).get_to(gate);
      }
    };
    gated("T", m.T_std, m.T_gate);
    gated("R", m.R_std, m.R_gate);
    get_if(*it, "r", m.r_std);
    get_if(*it, "b", m.b_std);
    get_if(*it, "w", m.w_std);
    get_if(*it, "a", m.a_std);
    gated("mu", m.mu_std, m.mu_gate);
    gated("sigma", m.sigma_std, m.sigma_gate);
    gated("h", m.h_std, m.h_gate);
  }
  get_if(j, "mutation_retry_cap", c.mutation_retry_cap);
  get_if(j, "soft_min_mass", c.soft_min_mass);
  get_if(j, "soft_max_mse", c.soft_max_mse);
  get_if(j, "n_obstacles", c.n_obstacles);
  get_if(j, "obstacle_radius", c.obstacle_radius);
  if (auto it = j.find("obstacle_x_range"); it != j.end()) {
    it->at(0).get_to(c.obstacle_x_lo);
    it->at(1).get_to(c.obstacle_x_hi);
  }
  get_if(j, "clear_radius", c.clear_radius);
  get_if(j, "eval_rollouts", c.eval_rollouts);
  get_if(j, "selection_steps", c.selection_steps);
  get_if(j, "selection_loss_threshold", c.selection_loss_threshold);
  get_if(j, "max_restarts", c.max_restarts);
  get_if(j, "no_obstacles", c.no_obstacles);
  get_if(j, "no_gradient", c.no_gradient);
  get_if(j, "uniform_goals", c.uniform_goals);
}

void to_json(Json& j, const RolloutLedger& l) {
  j = Json{{"init_history", l.init_history},
           {"mutation", l.mutation},
           {"optimization", l.optimization},
           {"evaluation", l.evaluation},
           {"restart_discarded", l.restart_discarded},
           {"random_search", l.random_search},
           {"total", l.total}};
}

void to_json(Json& j, const PerturbationSpec& p) {
  j = Json{{"update_mask_rate", p.update_mask_rate}, {"update_noise_rate", p.update_noise_rate},
           {"update_noise_std", p.update_noise_std}, {"init_noise_rate", p.init_noise_rate},
           {"init_noise_std", p.init_noise_std},     {"scale", p.scale}};
}

// Files.

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    io_error("cannot open", path);
  }
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Io, "malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text) || !out.flush()) {
    io_error("cannot write", path);
  }
}

void write_f32(const fs::path& path, const std::vector<float>& data) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out.flush()) {
    io_error("cannot write", path);
  }
}

std::vector<float> read_f32(const fs::path& path, std::size_t expected_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    io_error("cannot open", path);
  }
  std::vector<float> data(expected_count);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(expected_count * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(expected_count * sizeof(float)) || in.peek() != EOF) {
    io_error("size mismatch (expected " + std::to_string(expected_count) + " floats)", path);
  }
  return data;
}

// Parameters.

Json params_json(const RuleSet& rules, const InitPattern& init) {
  Json data = Json::array();
  for (int i = 0; i < init.rows(); ++i) {
    std::vector<double> row(init.values.row(i).begin(), init.values.row(i).end());
    data.push_back(row);
  }
  return Json{{"schema_version", kParamsSchemaVersion},
              {"R", rules.R},
              {"T", rules.T},
              {"rules", rules.rules},
              {"init", {{"shape", {init.rows(), init.cols()}}, {"offset", {init.row, init.col}}, {"data", data}}}};
}

ParamsFile params_from_json(const Json& j, const fs::path& base_dir) {
  const int version = j.value("schema_version", kParamsSchemaVersion);
  if (version != kParamsSchemaVersion) {
    throw Error(ErrorCode::Io, "unsupported params schema_version " + std::to_string(version));
  }
  ParamsFile p;
  try {
    from_json(j, p.rules);
    const Json& init = j.at("init");
    const int rows = init.at("shape").at(0).get<int>();
    const int cols = init.at("shape").at(1).get<int>();
    if (rows < 1 || cols < 1) {
      throw Error(ErrorCode::InvalidArgument, "init shape must be positive");
    }
    if (auto off = init.find("offset"); off != init.end()) {
      off->at(0).get_to(p.init.row);
      off->at(1).get_to(p.init.col);
    }
    p.init.values.resize(rows, cols);
    const Json& data = init.at("data");
    if (data.is_string()) {
      const std::vector<float> raw = read_f32(base_dir / data.get<std::string>(), std::size_t(rows) * cols);
      for (int k = 0; k < rows * cols; ++k) {
        p.init.values.data()[k] = raw[k];
      }
    } else {
      if (data.size() != std::size_t(rows)) {
        throw Error(ErrorCode::Io, "init data has the wrong number of rows");
      }
      for (int i = 0; i < rows; ++i) {
        if (data[i].size() != std::size_t(cols)) {
          throw Error(ErrorCode::Io, "init data has the wrong number of columns");
        }
        for (int c = 0; c < cols; ++c) {
          p.init.values(i, c) = data[i][c].get<double>();
        }
      }
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Io, std::string("malformed params: ") + e.what());
  }
  return p;
}

fs::path write_params(const fs::path& stem, const RuleSet& rules, const InitPattern& init, bool external_init) {
  Json j = params_json(rules, init);
  if (external_init) {
    const fs::path bin = fs::path(stem.string() + ".init.bin");
    std::vector<float> raw(init.values.data(), init.values.data() + init.values.size());
    write_f32(bin, raw);
    j["init"]["data"] = bin.filename().string();
  }
  const fs::path path = fs::path(stem.string() + ".params.json");
  write_text(path, j.dump(2) + "\n");
  return path;
}

ParamsFile read_params(const fs::path& path) { return params_from_json(read_json(path), path.parent_path()); }

// Snapshots.

void write_snapshot(const fs::path& stem, const GridState<float>& state) {
  const GridShape s = state.shape();
  std::vector<float> raw;
  raw.reserve(std::size_t(state.n_channels()) * s.rows * s.cols);
  for (const GridF& ch : state.channels) {
    raw.insert(raw.end(), ch.data(), ch.data() + ch.size());
  }
  write_f32(fs::path(stem.string() + ".bin"), raw);
  const Json sidecar{{"shape", {state.n_channels(), s.rows, s.cols}}, {"dtype", "f32le"}, {"step", state.step}};
  write_text(fs::path(stem.string() + ".json"), sidecar.dump(2) + "\n");
}

GridState<float> read_snapshot(const fs::path& stem) {
  const Json sidecar = read_json(fs::path(stem.string() + ".json"));
  if (sidecar.value("dtype", "") != "f32le") {
    throw Error(ErrorCode::Io, "unsupported snapshot dtype in " + stem.string() + ".json");
  }
  const auto shape = sidecar.at("shape").get<std::array<int, 3>>();
  GridState<float> state(shape[0], {shape[1], shape[2]});
  state.step = sidecar.value("step", std::int64_t{0});
  const std::size_t plane = std::size_t(shape[1]) * shape[2];
  const std::vector<float> raw = read_f32(fs::path(stem.string() + ".bin"), plane * shape[0]);
  for (int c = 0; c < shape[0]; ++c) {
    std::copy_n(raw.begin() + c * plane, plane, state.channels[c].data());
  }
  return state;
}

void write_obstacles(const fs::path& path, const ObstacleConfig& obstacles) {
  write_text(path, Json(obstacles).dump(2) + "\n");
}

ObstacleConfig read_obstacles(const fs::path& path) {
  try {
    return read_json(path).get<ObstacleConfig>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Io, "malformed obstacle config " + path.string() + ": " + e.what());
  }
}

// Run directories.

Json history_line(const HistoryEntry& e) {
  Json j{{"id", e.id},
         {"parent", e.parent},
         {"outer_step", e.outer_step},
         {"kind", e.kind},
         {"goal", e.goal ? Json{e.goal->x, e.goal->y} : Json(nullptr)},
         {"loss", number_or_null(e.loss)},
         {"reached", {e.reached.x, e.reached.y}},
         {"c", number_or_null(e.c)},
         {"params", "patterns/" + zero_pad(e.id) + ".params.json"}};
  return j;
}

void write_run(const fs::path& dir, const DiscoveryRun& run) {
  fs::create_directories(dir / "patterns");
  Json failures = Json::array();
  for (const StepFailure& f : run.failures) {
    failures.push_back({{"outer_step", f.outer_step}, {"code", f.code}, {"message", f.message}});
  }
  const Json meta{{"mode", run.mode},
                  {"seed", run.seed},
                  {"config", run.config},
                  {"ledger", run.ledger},
                  {"restarts", run.restarts},
                  {"selection_accepted", run.selection_accepted},
                  {"stopped_early", run.stopped_early},
                  {"failures", failures},
                  {"entries", run.history.size()}};
  write_text(dir / "run.json", meta.dump(2) + "\n");
  std::ostringstream lines;
  for (const HistoryEntry& e : run.history) {
    lines << history_line(e).dump() << '\n';
    write_params(dir / "patterns" / zero_pad(e.id), e.rules, e.init);
  }
  write_text(dir / "history.jsonl", lines.str());
}

std::vector<StoredPattern> read_run_patterns(const fs::path& dir) {
  std::ifstream in(dir / "history.jsonl");
  if (!in) {
    io_error("cannot open", dir / "history.jsonl");
  }
  std::vector<StoredPattern> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    const Json j = Json::parse(line);
    StoredPattern p;
    p.id = j.at("id").get<int>();
    p.c = j.at("c").is_null() ? 1.0 : j.at("c").get<double>();
    p.reached = {j.at("reached").at(0).get<double>(), j.at("reached").at(1).get<double>()};
    p.params = read_params(dir / j.at("params").get<std::string>());
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace lenia
