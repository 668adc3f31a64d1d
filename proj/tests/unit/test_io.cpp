#include <doctest.h>

#include "lenia/error.hpp"
#include "lenia/io.hpp"
#include "lenia/render.hpp"
#include "lenia/report.hpp"

#include "support/random_params.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

using namespace lenia;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lenia_io_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RuleSet sample_ruleset(Rng& rng) {
  RuleSet rules;
  rules.R = 13;
  rules.T = 7;
  rules.rules = {testing_support::random_rule(rng), testing_support::random_rule(rng)};
  rules.rules[1].c_src = kAttractorChannel;
  return rules;
}

}  // namespace

TEST_CASE("params: round trip with inline and external init") {
  const fs::path dir = scratch("params");
  Rng rng(1);
  const RuleSet rules = sample_ruleset(rng);
  const InitPattern init{testing_support::random_grid(rng, 6, 5), 12, 34};
  for (bool external : {false, true}) {
    const fs::path path = write_params(dir / (external ? "ext" : "inl"), rules, init, external);
    CHECK(fs::exists(dir / "ext.init.bin") == external);
    const ParamsFile back = read_params(path);
    CHECK(back.rules == rules);
    CHECK(back.init.row == 12);
    CHECK(back.init.col == 34);
    REQUIRE(back.init.rows() == 6);
    REQUIRE(back.init.cols() == 5);
    // External data is stored as f32.
    const double tol = external ? 1e-7 : 0.0;
    CHECK((back.init.values - init.values).abs().maxCoeff() <= tol);
  }
  const Json j = read_json(dir / "inl.params.json");
  CHECK(j.at("schema_version") == kParamsSchemaVersion);
  CHECK(j.at("init").at("shape") == Json{6, 5});
}

TEST_CASE("params: malformed and mismatched files are reported") {
  const fs::path dir = scratch("bad");
  write_text(dir / "broken.json", "{ not json");
  CHECK_THROWS_AS(read_params(dir / "broken.json"), Error);
  Json j = params_json(RuleSet{15, 10, {Rule{}}}, InitPattern{GridD::Zero(2, 2), 0, 0});
  j["schema_version"] = 99;
  write_text(dir / "v99.json", j.dump());
  CHECK_THROWS_AS(read_params(dir / "v99.json"), Error);
  j["schema_version"] = kParamsSchemaVersion;
  j["init"]["data"] = "missing.bin";
  write_text(dir / "missing.json", j.dump());
  CHECK_THROWS_AS(read_params(dir / "missing.json"), Error);
  write_f32(dir / "short.bin", {1.0f, 2.0f, 3.0f});
  j["init"]["data"] = "short.bin";
  write_text(dir / "short.json", j.dump());
  CHECK_THROWS_AS(read_params(dir / "short.json"), Error);
}

TEST_CASE("snapshot: f32le [C,H,W] with sidecar") {
  const fs::path dir = scratch("snap");
  GridState<float> s(3, {4, 5});
  Rng rng(2);
  for (auto& ch : s.channels) {
    ch = testing_support::random_grid(rng, 4, 5).cast<float>();
  }
  s.step = 42;
  write_snapshot(dir / "frame", s);
  CHECK(fs::file_size(dir / "frame.bin") == 3 * 4 * 5 * sizeof(float));
  const Json side = read_json(dir / "frame.json");
  CHECK(side.at("dtype") == "f32le");
  CHECK(side.at("shape") == Json{3, 4, 5});
  CHECK(side.at("step") == 42);
  const GridState<float> back = read_snapshot(dir / "frame");
  CHECK(back.step == 42);
  for (int c = 0; c < 3; ++c) {
    CHECK((back.channels[c] == s.channels[c]).all());
  }
  // Channel-major layout: the first float of channel 1 sits after H*W floats.
  const std::vector<float> raw = read_f32(dir / "frame.bin", 60);
  CHECK(raw[20] == s.channels[1](0, 0));
  CHECK(raw[20 + 5 * 2 + 3] == s.channels[1](2, 3));
}

TEST_CASE("obstacles: disks and speed round trip") {
  const fs::path dir = scratch("obs");
  ObstacleConfig o{{{1.5, 2.5, 10.0}, {100.0, 3.0, 4.0}}, {1, 3}};
  write_obstacles(dir / "obstacles.json", o);
  const ObstacleConfig back = read_obstacles(dir / "obstacles.json");
  CHECK(back.disks == o.disks);
  CHECK(back.speed.num == 1);
  CHECK(back.speed.den == 3);
  write_text(dir / "bad.json", R"({"disks": [], "speed_num": 1, "speed_den": 0})");
  CHECK_THROWS_AS(read_obstacles(dir / "bad.json"), Error);
}

TEST_CASE("search config: JSON round trip keeps every field") {
  SearchConfig c = SearchConfig::desk_scale();
  c.no_gradient = true;
  c.mutation.sigma_gate = 0.3;
  c.adam.lr_init = 0.5;
  c.ranges.R_min = 9;
  const Json j = c;
  SearchConfig back;
  from_json(j, back);
  CHECK(Json(back) == j);
}

TEST_CASE("run directory: layout and byte-identical history for identical seeds") {
  SearchConfig config;
  config.shape = {40, 40};
  config.n_outer = 3;
  config.history_size = 3;
  config.rollout_steps = 4;
  config.n_rules = 1;
  config.ranges.R_min = 3;
  config.ranges.R_max = 5;
  config.init_size = 8;
  config.init_row = 8;
  config.init_col = 16;
  config.gradient_steps_plain = 1;
  config.gradient_steps_mutated = 1;
  config.mutation_retry_cap = 2;
  config.n_obstacles = 1;
  config.obstacle_radius = 3.0;
  config.clear_radius = 2.0;
  config.eval_rollouts = 2;
  config.max_restarts = 1;
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  write_run(a, run_imgep(config, 5));
  write_run(b, run_imgep(config, 5));
  CHECK(slurp(a / "history.jsonl") == slurp(b / "history.jsonl"));
  CHECK(slurp(a / "run.json") == slurp(b / "run.json"));
  const Json meta = read_json(a / "run.json");
  CHECK(meta.at("seed") == 5);
  CHECK(meta.at("ledger").at("total") == meta.at("ledger").at("init_history").get<int>() +
                                             meta.at("ledger").at("mutation").get<int>() +
                                             meta.at("ledger").at("optimization").get<int>() +
                                             meta.at("ledger").at("evaluation").get<int>() +
                                             meta.at("ledger").at("restart_discarded").get<int>());
  const auto patterns = read_run_patterns(a);
  REQUIRE(patterns.size() == 6);
  CHECK(fs::exists(a / "patterns" / "000.params.json"));
  CHECK(fs::exists(a / "patterns" / "005.init.bin"));
  for (int i = 0; i < 6; ++i) {
    CHECK(patterns[i].id == i);
    CHECK(patterns[i].params.init.rows() == 8);
  }
}

// Rendering and reports.

TEST_CASE("render: fixed colormap, golden pixels and PPM bytes") {
  CHECK(colormap(0.0) == Rgb{0, 0, 4});
  CHECK(colormap(0.125) == Rgb{44, 8, 57});
  CHECK(colormap(0.6) == Rgb{212, 90, 54});
  CHECK(colormap(1.0) == Rgb{252, 255, 164});
  CHECK(colormap(7.0) == colormap(1.0));
  CHECK(colormap(-1.0) == colormap(0.0));

  GridState<float> s(3, {2, 2});
  s.learnable() << 0.0f, 1.0f, 0.6f, 0.0f;
  s.channels[kObstacleChannel](1, 1) = 1.0f;
  s.channels[kAttractorChannel](0, 0) = 1.0f;
  const Image img = render_state(s);
  CHECK(img.at(0, 1) == Rgb{252, 255, 164});
  CHECK(img.at(1, 0) == Rgb{212, 90, 54});
  CHECK(img.at(1, 1) == Rgb{40, 120, 255});
  CHECK(img.at(0, 0) == Rgb{0, 100, 42});  // halfway from (0,0,4) to the attractor color

  const fs::path dir = scratch("ppm");
  write_ppm(dir / "a.ppm", img);
  const std::string bytes = slurp(dir / "a.ppm");
  CHECK(bytes.substr(0, 11) == "P6\n2 2\n255\n");
  CHECK(bytes.size() == 11 + 12);
  CHECK(static_cast<unsigned char>(bytes[11 + 3]) == 252);
  CHECK(read_ppm(dir / "a.ppm").rgb == img.rgb);
}

TEST_CASE("render: one step gives one frame; overlay opacity grows with time") {
  const fs::path dir = scratch("render");
  Rng rng(4);
  Rule rule;
  rule.mu = 0.2;
  rule.sigma = 0.06;
  const ParamsFile params{RuleSet{5, 10, {rule}}, InitPattern{testing_support::random_grid(rng, 8, 8), 10, 10}};
  RenderOptions options;
  options.shape = {32, 32};
  options.steps = 1;
  CHECK(render_rollout(params, options, dir).frames == 1);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    files += e.path().extension() == ".ppm";
  }
  CHECK(files == 1);

  const std::vector<double> alpha = overlay_alphas(4);
  REQUIRE(alpha.size() == 4);
  CHECK(std::is_sorted(alpha.begin(), alpha.end()));
  CHECK(alpha.front() < alpha.back());
  CHECK(alpha.back() == 1.0);

  // A cell lit only in the first layer is fainter than one lit only in the last.
  GridF early = GridF::Zero(1, 2), late = GridF::Zero(1, 2);
  early(0, 0) = 1.0f;
  late(0, 1) = 1.0f;
  const Image o = trajectory_overlay({early, GridF::Zero(1, 2), late});
  CHECK(o.at(0, 0)[0] < o.at(0, 1)[0]);
  CHECK(o.at(0, 1) == colormap(1.0));
}

TEST_CASE("report: JSON fields and CSV rows") {
  EvalReport r;
  r.id = 3;
  r.prefilter = r.agent = r.moving = true;
  r.speed = 0.5;
  GeneralizationResult g;
  g.cell = generalization_plan()[2];
  g.ran = true;
  g.passes = 7;
  g.seeds = 10;
  g.survival = 0.7;
  r.generalization = {g, GeneralizationResult{}};
  const Json j = r;
  CHECK(j.at("speed") == 0.5);
  CHECK(j.at("robustness").is_null());
  CHECK(j.at("generalization").size() == 2);
  const std::string csv = generalization_csv_rows("p3", r.generalization);
  CHECK(generalization_csv_header() == "params_id,family,value,survival,passes,seeds\n");
  CHECK(csv == "p3," + g.cell.family + "," + [&] {
          std::ostringstream v;
          v.precision(10);
          v << g.cell.value;
          return v.str();
        }() + ",0.7,7,10\n");
}
