#pragma once

// Transfer evaluation (mean distance before crash on gate-free real worlds),
// the direct observation->action regression baseline, comparison tables and
// belief-strip images.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lcl/cheat.hpp"
#include "lcl/expert.hpp"
#include "lcl/policy.hpp"

namespace lcl {

struct BaselineParams {
  std::size_t width = 0;
  std::vector<std::size_t> hidden;
  ParamSet params;

  DenseStack stack() const;  // "baseline": 2W -> hidden... -> 4
};

BaselineParams baseline_init(std::size_t width, const std::vector<std::size_t>& hidden, std::uint64_t seed);
Action baseline_act(const BaselineParams& p, const Observation& obs, const SimParams& sim = {});

struct BaselineTrainConfig {
  std::size_t epochs = 200;
  std::size_t batch = 32;
  double lr = 1e-3;
  std::vector<std::size_t> hidden = {128, 64};
  std::uint64_t seed = 0;
};

struct BaselineTrainResult {
  BaselineParams params;
  std::vector<double> loss_history;  // mean action MSE per epoch
};

BaselineTrainResult train_baseline(const Dataset& real, const BaselineTrainConfig& cfg);

enum class Pipeline { cheat, baseline, random, zero };
Pipeline parse_pipeline(const std::string& text);
std::string to_string(Pipeline p);

struct EvalModels {
  const CheatEncoderParams* cheat = nullptr;
  const ControllerParams* controller = nullptr;
  const BaselineParams* baseline = nullptr;
};

struct EvalOptions {
  SimParams sim;
  double clutter_density = 0.4;
  std::size_t max_steps = 2000;
  double v_nom = 1.5;  // forward speed of the random policy
};

struct EvalReport {
  std::string method;
  std::vector<std::uint64_t> seeds;
  std::vector<double> odometers;
  std::vector<bool> crashed;
  double mean_distance = 0.0;
  double crash_rate = 0.0;
  nlohmann::json config;

  std::size_t episodes() const { return odometers.size(); }
};

/// One gate-free real world per seed; odometer at crash or at max_steps.
EvalReport eval_mean_distance(Pipeline pipeline, const EvalModels& models, const std::vector<std::uint64_t>& seeds,
                              const EvalOptions& opts);

/// Closed loop of one pipeline in one world (trace included).
RolloutResult run_pipeline_episode(Pipeline pipeline, const EvalModels& models, const WorldSpec& world,
                                   const EvalOptions& opts);

std::vector<std::uint64_t> seed_suite(std::uint64_t base, std::size_t n);

struct ComparisonTable {
  std::string text;
  std::string csv;  // method,mean_distance_m,crash_rate,episodes
};

ComparisonTable comparison_report(const std::vector<EvalReport>& reports);

struct ReportRow {
  std::string method;
  double mean_distance_m = 0.0;
  double crash_rate = 0.0;
  std::size_t episodes = 0;
};

std::vector<ReportRow> parse_report_csv(const std::string& csv);

struct StripGeometry {
  std::size_t width = 0;   // pixels: W * tiles
  std::size_t height = 0;  // pixels: 2 * band_height
  std::size_t tiles = 0;
};

/// Gray level of one scanline cell: round(depth * L[class]), L = {0, 255, 140}.
std::uint8_t cell_gray(Cell cls, double depth);

/// Binary PGM: for every stride-th step a tile of W columns; the top band is
/// the real observation, the bottom band decode(cheat_encode(real)).
std::string belief_strip_pgm(const std::vector<RolloutStep>& trace, const CheatEncoderParams& cheat,
                             const VaeParams& vae, std::size_t stride, std::size_t band_height = 16);
StripGeometry render_belief_strip(const std::vector<RolloutStep>& trace, const CheatEncoderParams& cheat,
                                  const VaeParams& vae, std::size_t stride, const std::filesystem::path& path,
                                  std::size_t band_height = 16);

struct PgmImage {
  std::size_t width = 0, height = 0;
  std::string comment;
  std::vector<std::uint8_t> pixels;
};

PgmImage parse_pgm(std::string_view bytes);

}  // namespace lcl
