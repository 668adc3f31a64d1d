// lenia: discovery, evaluation, rendering and the live session server.

#include "lenia/error.hpp"
#include "lenia/evaluation.hpp"
#include "lenia/imgep.hpp"
#include "lenia/io.hpp"
#include "lenia/render.hpp"
#include "lenia/report.hpp"
#include "lenia/server.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

using namespace lenia;

namespace {

fs::path data_root() {
  const char* env = std::getenv("DATA_DIR");
  return env && *env ? fs::path(env) : fs::path("runs");
}

GridShape parse_shape(const std::vector<int>& v) {
  if (v.size() != 2 || v[0] < 8 || v[1] < 8) {
    throw Error(ErrorCode::InvalidArgument, "--shape takes two sizes >= 8");
  }
  return {v[0], v[1]};
}

SearchConfig load_config(const std::string& path, bool desk) {
  SearchConfig config = desk ? SearchConfig::desk_scale() : SearchConfig{};
  if (!path.empty()) {
    from_json(read_json(path), config);
  }
  return config;
}

struct NamedParams {
  std::string id;
  ParamsFile params;
  std::optional<GridShape> shape;  ///< from run.json when loaded out of a run directory
};

/// A params file, a run directory (run.json + patterns/) or a directory of *.params.json files.
std::vector<NamedParams> load_params(const fs::path& path) {
  std::vector<NamedParams> out;
  if (fs::is_regular_file(path)) {
    out.push_back({path.stem().stem().string(), read_params(path), std::nullopt});
    return out;
  }
  if (!fs::is_directory(path)) {
    throw Error(ErrorCode::Io, "no such params file or directory: " + path.string());
  }
  if (fs::exists(path / "run.json")) {
    SearchConfig config;
    from_json(read_json(path / "run.json").at("config"), config);
    for (StoredPattern& p : read_run_patterns(path)) {
      out.push_back({std::to_string(p.id), std::move(p.params), config.shape});
    }
    return out;
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path)) {
    if (e.path().string().ends_with(".params.json")) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& f : files) {
    out.push_back({f.stem().stem().string(), read_params(f), std::nullopt});
  }
  return out;
}

void summarize(const DiscoveryRun& run, const fs::path& out) {
  std::cout << run.mode << " seed " << run.seed << ": " << run.history.size() << " entries, " << run.ledger.total
            << " rollouts, " << run.failures.size() << " failed steps -> " << out.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lenia agent discovery and evaluation"};
  app.require_subcommand(1);

  // discover
  auto* discover = app.add_subcommand("discover", "goal-conditioned search for moving agents");
  std::string config_path, ablation, out;
  std::uint64_t seed = 0;
  bool desk = false;
  int n_outer = 0;
  discover->add_option("--config", config_path, "search config JSON (missing keys keep defaults)");
  discover->add_option("--seed", seed, "master seed");
  discover->add_option("--out", out, "run directory (default $DATA_DIR/<mode>-<seed>)");
  discover->add_option("--ablation", ablation, "")->check(CLI::IsMember({"no-obstacles", "no-gradient", "uniform-goals"}));
  discover->add_flag("--desk-scale", desk, "128x128 grid and smaller search (defaults before --config)");
  discover->add_option("--n-outer", n_outer, "override the number of outer steps");

  // random-search
  auto* random = app.add_subcommand("random-search", "uniform parameter sampling baseline");
  int budget = 0;
  random->add_option("--budget", budget, "number of samples")->required();
  random->add_option("--seed", seed);
  random->add_option("--out", out);
  random->add_option("--config", config_path);
  random->add_flag("--desk-scale", desk);

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "agency, movement, speed and obstacle robustness");
  std::string params_path, csv_path;
  std::vector<int> shape_arg;
  bool generalization = false;
  int seeds = 10;
  evaluate_cmd->add_option("--params", params_path, "params file, run directory or directory of params")->required();
  evaluate_cmd->add_option("--out", out, "report JSON")->required();
  evaluate_cmd->add_option("--csv", csv_path, "generalization rows as CSV");
  evaluate_cmd->add_option("--seed", seed);
  evaluate_cmd->add_option("--shape", shape_arg, "grid rows cols (default: run config or 256 256)")->expected(2);
  evaluate_cmd->add_flag("--generalization", generalization, "also run the generalization grid on moving agents");
  evaluate_cmd->add_option("--seeds", seeds, "seeds per generalization cell");

  // generalize
  auto* generalize = app.add_subcommand("generalize", "survival over the 9 x 5 perturbation grid");
  generalize->add_option("--params", params_path)->required()->check(CLI::ExistingFile);
  generalize->add_option("--seeds", seeds);
  generalize->add_option("--out", out)->required();
  generalize->add_option("--csv", csv_path);
  generalize->add_option("--seed", seed);
  generalize->add_option("--shape", shape_arg)->expected(2);

  // render
  auto* render = app.add_subcommand("render", "PPM frames and a trajectory overlay");
  int steps = 200, overlay_every = 0;
  std::string pattern_id;
  bool no_frames = false;
  render->add_option("--params", params_path, "params file or run directory")->required();
  render->add_option("--id", pattern_id, "pattern id inside a run directory (default: all)");
  render->add_option("--steps", steps);
  render->add_option("--out", out)->required();
  render->add_option("--overlay-every", overlay_every, "add every n-th state to overlay.ppm (0: none)");
  render->add_flag("--no-frames", no_frames);
  render->add_option("--shape", shape_arg)->expected(2);
  render->add_option("--obstacles", config_path, "obstacle config JSON");

  // serve
  auto* serve = app.add_subcommand("serve", "websocket session server");
  std::string bind = "127.0.0.1:8080", params_dir, assets;
  serve->add_option("--bind", bind, "host:port");
  serve->add_option("--params-dir", params_dir, "directory for params_file lookups");
  serve->add_option("--assets", assets, "static files served over HTTP");

  // attractor-search
  auto* attractor = app.add_subcommand("attractor-search", "random attractor rules for a given agent");
  attractor->add_option("--agent", params_path)->required()->check(CLI::ExistingFile);
  attractor->add_option("--budget", budget)->required();
  attractor->add_option("--seed", seed);
  attractor->add_option("--out", out, "directory for candidate params")->required();
  attractor->add_option("--shape", shape_arg)->expected(2);

  CLI11_PARSE(app, argc, argv);

  try {
    if (discover->parsed()) {
      SearchConfig config = load_config(config_path, desk);
      if (n_outer > 0) {
        config.n_outer = n_outer;
      }
      config.no_obstacles = ablation == "no-obstacles";
      config.no_gradient = ablation == "no-gradient";
      config.uniform_goals = ablation == "uniform-goals";
      const std::string mode = ablation.empty() ? "imgep" : ablation;
      const fs::path dir = out.empty() ? data_root() / (mode + "-" + std::to_string(seed)) : fs::path(out);
      const DiscoveryRun run = run_imgep(config, seed, [](const HistoryEntry& e) {
        std::cerr << "step " << e.outer_step << ": " << e.kind << ", c " << e.c << ", reached (" << e.reached.x
                  << ", " << e.reached.y << ")\n";
        return true;
      });
      write_run(dir, run);
      summarize(run, dir);
    } else if (random->parsed()) {
      const SearchConfig config = load_config(config_path, desk);
      const fs::path dir = out.empty() ? data_root() / ("random-search-" + std::to_string(seed)) : fs::path(out);
      const DiscoveryRun run = run_random_search(config, budget, seed);
      write_run(dir, run);
      summarize(run, dir);
    } else if (evaluate_cmd->parsed()) {
      EvalOptions options;
      options.seed = seed;
      options.generalization = generalization;
      options.generalization_seeds = seeds;
      Json reports = Json::array();
      std::string csv = generalization_csv_header();
      for (const NamedParams& p : load_params(params_path)) {
        options.shape = shape_arg.empty() ? p.shape.value_or(GridShape{}) : parse_shape(shape_arg);
        int id = 0;
        try {
          id = std::stoi(p.id);
        } catch (const std::exception&) {
          id = static_cast<int>(reports.size());
        }
        const EvalReport report = evaluate(p.params.rules, p.params.init, id, options);
        Json j = report;
        j["params"] = p.id;
        reports.push_back(j);
        csv += generalization_csv_rows(p.id, report.generalization);
        std::cerr << p.id << ": " << (report.moving ? "moving agent" : report.agent ? "agent" : "not an agent")
                  << "\n";
      }
      write_text(out, reports.dump(2) + "\n");
      if (!csv_path.empty()) {
        write_text(csv_path, csv);
      }
    } else if (generalize->parsed()) {
      const ParamsFile p = read_params(params_path);
      const GridShape shape = shape_arg.empty() ? GridShape{} : parse_shape(shape_arg);
      const ClassifierConfig cfg;
      Rng rng = derive_rng(seed, "generalize-free-run");
      const TrajectoryStats free_run = test_rollout(p.rules, p.init, {}, {}, shape, cfg.test_steps, rng, cfg);
      const auto results = generalization_battery(p.rules, p.init, shape, free_run, seed, seeds);
      write_text(out, Json(results).dump(2) + "\n");
      if (!csv_path.empty()) {
        write_text(csv_path, generalization_csv_header() + generalization_csv_rows(fs::path(params_path).stem().stem().string(), results));
      }
    } else if (render->parsed()) {
      RenderOptions options;
      options.steps = steps;
      options.overlay_every = overlay_every;
      options.write_frames = !no_frames;
      options.seed = seed;
      if (!config_path.empty()) {
        options.obstacles = read_obstacles(config_path);
      }
      for (const NamedParams& p : load_params(params_path)) {
        if (!pattern_id.empty() && p.id != pattern_id) {
          continue;
        }
        options.shape = shape_arg.empty() ? p.shape.value_or(GridShape{}) : parse_shape(shape_arg);
        const fs::path dir = fs::is_regular_file(params_path) ? fs::path(out) : fs::path(out) / p.id;
        const RenderSummary s = render_rollout(p.params, options, dir);
        std::cout << p.id << ": " << s.frames << " frames" << (s.overlay.empty() ? "" : ", overlay") << " -> "
                  << dir.string() << "\n";
      }
    } else if (serve->parsed()) {
      ServerConfig config;
      parse_bind(bind, config);
      config.params_dir = params_dir;
      config.asset_dir = assets;
      config.handle_signals = true;
      Server server(config);
      std::cout << "serving on " << config.address << ":" << server.port() << std::endl;
      server.run();
    } else if (attractor->parsed()) {
      const ParamsFile agent = read_params(params_path);
      const GridShape shape = shape_arg.empty() ? GridShape{} : parse_shape(shape_arg);
      Rng rng = derive_rng(seed, "attractor-search");
      const AttractorSearch result = search_attractor_rules(agent.rules, agent.init, shape, budget, rng);
      fs::create_directories(out);
      for (std::size_t i = 0; i < result.candidates.size(); ++i) {
        RuleSet rules = agent.rules;
        rules.rules.push_back(result.candidates[i]);
        char stem[32];
        std::snprintf(stem, sizeof stem, "attractor_%03zu", i);
        write_params(fs::path(out) / stem, rules, agent.init);
      }
      std::cout << result.candidates.size() << " of " << result.tried << " candidates kept (" << result.failed
                << " failed) -> " << out << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
