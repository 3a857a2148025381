#pragma once

// Stage runner. Each stage reads its prerequisites from the output directory,
// writes its artifact(s) there, and leaves a <stage>.json summary holding
// input/output file digests and headline metrics.

#include <ostream>
#include <string>
#include <vector>

#include "lcl/config.hpp"
#include "lcl/world.hpp"

namespace lcl {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitDependency = 2, kExitRuntime = 3 };

/// Stage names in pipeline order.
const std::vector<std::string>& stage_names();

namespace artifact {
inline constexpr const char* fake_data = "fake_data.lcl";
inline constexpr const char* vae = "vae.ckpt";
inline constexpr const char* expert_data = "expert_data.lcl";
inline constexpr const char* controller = "controller.ckpt";
inline constexpr const char* evolution = "evolution.csv";
inline constexpr const char* pairs = "pairs.lcl";
inline constexpr const char* cheat = "cheat.ckpt";
inline constexpr const char* real_data = "real_data.lcl";
inline constexpr const char* baseline = "baseline.ckpt";
inline constexpr const char* eval_csv = "eval.csv";
inline constexpr const char* eval_txt = "eval.txt";
inline constexpr const char* belief_strip = "belief_strip.pgm";
}  // namespace artifact

SimParams sim_params(const RunConfig& cfg);

/// Runs one stage (or "pipeline" for all of them); throws on failure.
void run_stage(const std::string& name, const RunConfig& cfg, std::ostream& log);

/// run_stage with errors mapped to exit codes and reported on `err` as
/// "<stage>: <message>".
int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log, std::ostream& err);

}  // namespace lcl
