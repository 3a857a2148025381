#pragma once

// Independent oracles shared by the unit tests and the acceptance runner:
// central finite differences for tape gradients, and brute-force audits of
// the simulator and the expert.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lcl/autodiff.hpp"
#include "lcl/expert.hpp"
#include "lcl/rng.hpp"

namespace lcl::oracle {

/// Builds a scalar loss on `tape` from the leaves in `params`.
using LossBuilder = std::function<Var(Tape&, const ParamSet&)>;

struct GradCase {
  std::string name;
  /// Fresh random parameters and a loss over them for one seed.
  std::function<std::pair<ParamSet, LossBuilder>(Rng&)> make;
};

/// Every primitive (each activation separately) plus a few composites.
const std::vector<GradCase>& gradient_cases();

/// max over parameters of ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-8).
double gradient_rel_error(const ParamSet& params, const LossBuilder& loss, double h = 1e-5);

double case_rel_error(const GradCase& c, std::uint64_t seed);

/// Point-vs-geometry test written independently of the simulator: rounded
/// rectangles for inflated obstacles, rotated local offsets for gate posts.
bool oracle_in_collision(const WorldSpec& world, double x, double y, const SimParams& sim);

struct SimAudit {
  std::size_t steps = 0;
  std::size_t renders = 0;
  std::size_t crashes = 0;
  std::vector<std::string> violations;  // first few only
  std::size_t violation_count = 0;
};

/// Random walks with random commands through random fake and real worlds,
/// checking every step against oracle_in_collision and the odometer, and
/// every render against the observation invariants.
SimAudit simulator_audit(std::size_t n_steps, std::size_t n_renders, std::uint64_t seed,
                         const SimParams& sim = {});

struct ExpertSweep {
  std::size_t worlds = 0;
  std::size_t crashes = 0;
  std::size_t min_gates = 0;
  double mean_gates = 0.0;
};

/// The expert flown directly (no dataset machinery) for max_steps in each of
/// n_worlds fake worlds seeded seed_base + i.
ExpertSweep expert_sweep(std::size_t n_worlds, std::uint64_t seed_base, std::size_t n_gates, std::size_t max_steps,
                         const SimParams& sim = {}, const ExpertParams& ex = {});

}  // namespace lcl::oracle
