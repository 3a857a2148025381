#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "lcl/container.hpp"
#include "lcl/digest.hpp"
#include "lcl/errors.hpp"
#include "lcl/evalviz.hpp"

using namespace lcl;

namespace {

void zero_all(ParamSet& p) {
  for (auto& e : p) std::fill(e.value.data.begin(), e.value.data.end(), 0.0);
}

Dataset small_real_set() {
  CollectOptions o;
  o.stride = 4;
  return limit_steps(collect_trajectories(WorldKind::real, 4, 200, 3, o), 150);
}

EvalReport fake_report(const std::string& method, std::vector<double> odo, std::vector<std::uint64_t> seeds) {
  EvalReport r;
  r.method = method;
  r.seeds = std::move(seeds);
  r.odometers = std::move(odo);
  r.crashed.assign(r.odometers.size(), true);
  r.mean_distance = std::accumulate(r.odometers.begin(), r.odometers.end(), 0.0) / static_cast<double>(r.odometers.size());
  r.crash_rate = 1.0;
  return r;
}

std::vector<RolloutStep> short_trace(std::size_t n) {
  const WorldSpec w = spawn_real_world(4, 0.4, false);
  EvalOptions o;
  o.max_steps = n;
  const auto r = run_pipeline_episode(Pipeline::zero, {}, w, o);
  return r.trace;
}

}  // namespace

TEST(Eval, ZeroPipelineHovers) {
  EvalOptions o;
  o.max_steps = 50;
  const auto r = eval_mean_distance(Pipeline::zero, {}, seed_suite(10, 5), o);
  EXPECT_EQ(r.episodes(), 5u);
  EXPECT_EQ(r.mean_distance, 0.0);
  EXPECT_EQ(r.crash_rate, 0.0);
  for (double d : r.odometers) EXPECT_EQ(d, 0.0);
}

TEST(Eval, StraightFlightStopsAtTheWall) {
  // Forward-only probe at 1 m/s; the wall is 10 m ahead of the start.
  WorldSpec w;
  w.kind = WorldKind::real;
  w.bounds = {-5, -5, 10, 5};
  w.start.position = {0, 0, 1.5};
  EvalOptions o;
  o.sim.omega_max = 0.0;
  o.v_nom = 1.0;
  o.max_steps = 1000;
  const auto r = run_pipeline_episode(Pipeline::random, {}, w, o);
  ASSERT_TRUE(r.crashed());
  EXPECT_NEAR(r.odometer(), 10.0 - o.sim.collision_radius, 0.05);
}

TEST(Eval, MeanMatchesOdometersAndRunsRepeat) {
  EvalOptions o;
  o.max_steps = 300;
  const auto seeds = seed_suite(100, 6);
  const auto a = eval_mean_distance(Pipeline::random, {}, seeds, o);
  const auto b = eval_mean_distance(Pipeline::random, {}, seeds, o);
  EXPECT_EQ(a.odometers, b.odometers);
  EXPECT_EQ(a.seeds, seeds);
  const double mean = std::accumulate(a.odometers.begin(), a.odometers.end(), 0.0) / 6.0;
  EXPECT_NEAR(a.mean_distance, mean, 1e-12);
  const double crashes = static_cast<double>(std::count(a.crashed.begin(), a.crashed.end(), true));
  EXPECT_EQ(a.crash_rate, crashes / 6.0);
  EXPECT_GT(a.mean_distance, 0.0);
}

TEST(Eval, ContractErrors) {
  EvalOptions o;
  EXPECT_THROW(eval_mean_distance(Pipeline::zero, {}, {}, o), ContractError);
  EXPECT_THROW(eval_mean_distance(Pipeline::cheat, {}, {1}, o), ContractError);
  EXPECT_THROW(eval_mean_distance(Pipeline::baseline, {}, {1}, o), ContractError);
  EXPECT_THROW(run_pipeline_episode(Pipeline::zero, {}, spawn_fake_world(1, 3), o), ContractError);
  EXPECT_THROW(parse_pipeline("teleport"), ConfigError);
  for (Pipeline p : {Pipeline::cheat, Pipeline::baseline, Pipeline::random, Pipeline::zero}) {
    EXPECT_EQ(parse_pipeline(to_string(p)), p);
  }
}

TEST(Eval, SeedSuiteIsConsecutive) {
  EXPECT_EQ(seed_suite(7, 3), (std::vector<std::uint64_t>{7, 8, 9}));
}

TEST(Report, SingleRow) {
  const auto t = comparison_report({fake_report("cheat", {1.0, 2.0}, {1, 2})});
  EXPECT_EQ(t.csv, "method,mean_distance_m,crash_rate,episodes\ncheat,1.5,1,2\n");
  const auto rows = parse_report_csv(t.csv);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].mean_distance_m, 1.5);
}

TEST(Report, RowsSortedByMethod) {
  const auto t = comparison_report({fake_report("zero", {0}, {1}), fake_report("baseline", {3}, {1}),
                                    fake_report("cheat", {2}, {1})});
  const auto rows = parse_report_csv(t.csv);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].method, "baseline");
  EXPECT_EQ(rows[1].method, "cheat");
  EXPECT_EQ(rows[2].method, "zero");
  EXPECT_LT(t.text.find("baseline"), t.text.find("cheat"));
}

TEST(Report, CsvKeepsFullPrecision) {
  const auto rep = fake_report("random", {0.1, 1.0 / 3.0, 2.718281828459045}, {4, 5, 6});
  const auto rows = parse_report_csv(comparison_report({rep}).csv);
  EXPECT_EQ(rows[0].mean_distance_m, rep.mean_distance);
  EXPECT_EQ(rows[0].crash_rate, rep.crash_rate);
  EXPECT_EQ(rows[0].episodes, 3u);
}

TEST(Report, MismatchedSeedListsRejected) {
  try {
    comparison_report({fake_report("cheat", {1}, {1}), fake_report("baseline", {1}, {2})});
    FAIL() << "expected a ContractError";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("baseline"), std::string::npos);
  }
  EXPECT_THROW(comparison_report({}), ContractError);
  EXPECT_THROW(parse_report_csv("method,mean\n"), FormatError);
  EXPECT_THROW(parse_report_csv("method,mean_distance_m,crash_rate,episodes\ncheat,x,1,2\n"), FormatError);
}

TEST(Baseline, ZeroEpochsReturnsInit) {
  BaselineTrainConfig c;
  c.epochs = 0;
  c.hidden = {16};
  c.seed = 3;
  const auto r = train_baseline(small_real_set(), c);
  EXPECT_TRUE(bit_equal(r.params.params, baseline_init(64, {16}, 3).params));
}

TEST(Baseline, DeterministicAndLearns) {
  BaselineTrainConfig c;
  c.epochs = 30;
  c.hidden = {32};
  const Dataset d = small_real_set();
  const auto a = train_baseline(d, c);
  const auto b = train_baseline(d, c);
  EXPECT_TRUE(bit_equal(a.params.params, b.params.params));
  EXPECT_LT(a.loss_history.back(), 0.5 * a.loss_history.front());
}

TEST(Baseline, RejectsWrongData) {
  CollectOptions o;
  o.stride = 4;
  const Dataset fake = limit_steps(collect_trajectories(WorldKind::fake, 1, 100, 1, o), 20);
  EXPECT_THROW(train_baseline(fake, {}), ContractError);
  Dataset empty;
  empty.world_kind = WorldKind::real;
  EXPECT_THROW(train_baseline(empty, {}), ContractError);
}

TEST(Baseline, ActionsAreClamped) {
  BaselineParams p = baseline_init(64, {8}, 0);
  p.params.at("baseline.1.bias")[0] = 50.0;
  p.params.at("baseline.1.bias")[3] = -50.0;
  const auto trace = short_trace(1);
  const Action a = baseline_act(p, trace[0].observation);
  EXPECT_EQ(a.vx, 2.0);
  EXPECT_EQ(a.yaw_rate, -1.5);
}

TEST(Strip, GrayLevels) {
  EXPECT_EQ(cell_gray(Cell::free, 0.7), 0);
  EXPECT_EQ(cell_gray(Cell::gate, 1.0), 255);
  EXPECT_EQ(cell_gray(Cell::wall, 0.5), 70);
  EXPECT_EQ(cell_gray(Cell::gate, 2.0), 255);
}

TEST(Strip, SingleStepShape) {
  const VaeParams vae = vae_init(64, 8, {16}, 0);
  const CheatEncoderParams cheat = cheat_init(64, 8, {16}, 0);
  const auto img = parse_pgm(belief_strip_pgm(short_trace(1), cheat, vae, 5, 12));
  EXPECT_EQ(img.width, 64u);
  EXPECT_EQ(img.height, 24u);
  EXPECT_NE(img.comment.find("belief strip"), std::string::npos);
}

TEST(Strip, TopBandIsTheRealObservation) {
  const VaeParams vae = vae_init(64, 8, {16}, 0);
  const CheatEncoderParams cheat = cheat_init(64, 8, {16}, 0);
  const auto trace = short_trace(9);
  const auto img = parse_pgm(belief_strip_pgm(trace, cheat, vae, 4, 3));
  ASSERT_EQ(img.width, 3u * 64);  // steps 0, 4, 8
  for (std::size_t t = 0; t < 3; ++t) {
    const Observation& o = trace[4 * t].observation;
    for (std::size_t j = 0; j < 64; ++j) {
      for (std::size_t r = 0; r < 3; ++r) ASSERT_EQ(img.pixels[r * img.width + t * 64 + j], cell_gray(o.cls[j], o.depth[j]));
    }
  }
}

TEST(Strip, ByteIdenticalAndParametersUntouched) {
  const VaeParams vae = vae_init(64, 8, {16}, 1);
  const CheatEncoderParams cheat = cheat_init(64, 8, {16}, 2);
  const auto trace = short_trace(30);
  const std::string before = params_digest(vae.params) + params_digest(cheat.params);
  const auto dir = std::filesystem::temp_directory_path() / "lcl_strip_test";
  std::filesystem::create_directories(dir);
  const auto g1 = render_belief_strip(trace, cheat, vae, 7, dir / "a.pgm");
  const auto g2 = render_belief_strip(trace, cheat, vae, 7, dir / "b.pgm");
  EXPECT_EQ(read_file(dir / "a.pgm"), read_file(dir / "b.pgm"));
  EXPECT_EQ(g1.tiles, 5u);
  EXPECT_EQ(g1.width, 5u * 64);
  EXPECT_EQ(g1.height, 32u);
  EXPECT_EQ(g2.width, g1.width);
  const auto img = parse_pgm(read_file(dir / "a.pgm"));
  EXPECT_EQ(img.width, g1.width);
  EXPECT_EQ(img.height, g1.height);
  EXPECT_EQ(params_digest(vae.params) + params_digest(cheat.params), before);
  std::filesystem::remove_all(dir);
}

TEST(Strip, ZeroEncoderGivesAConstantBelief) {
  const VaeParams vae = vae_init(64, 8, {16}, 1);
  CheatEncoderParams cheat = cheat_init(64, 8, {16}, 2);
  zero_all(cheat.params);
  const auto img = parse_pgm(belief_strip_pgm(short_trace(40), cheat, vae, 10, 2));
  ASSERT_EQ(img.width, 4u * 64);
  for (std::size_t r = 2; r < 4; ++r) {
    for (std::size_t t = 1; t < 4; ++t) {
      for (std::size_t j = 0; j < 64; ++j) {
        ASSERT_EQ(img.pixels[r * img.width + t * 64 + j], img.pixels[2 * img.width + j]);
      }
    }
  }
}

TEST(Strip, BadInputs) {
  const VaeParams vae = vae_init(64, 8, {16}, 1);
  const CheatEncoderParams cheat = cheat_init(64, 8, {16}, 2);
  EXPECT_THROW(belief_strip_pgm({}, cheat, vae, 1), ContractError);
  EXPECT_THROW(belief_strip_pgm(short_trace(2), cheat, vae, 0), ContractError);
  // A regular file where the parent directory should be.
  const auto blocker = std::filesystem::temp_directory_path() / "lcl_strip_blocker";
  write_file(blocker, "x");
  EXPECT_THROW(render_belief_strip(short_trace(2), cheat, vae, 1, blocker / "x.pgm"), IoError);
  std::filesystem::remove(blocker);
  EXPECT_THROW(parse_pgm("P6\n1 1\n255\n\x01"), FormatError);
  EXPECT_THROW(parse_pgm("P5\n2 2\n255\n\x01"), FormatError);
}
