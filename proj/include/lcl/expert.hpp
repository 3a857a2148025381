#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "lcl/world.hpp"

namespace lcl {

/// Pure-pursuit pilot gains.
struct ExpertParams {
  double k_omega = 2.0;
  double v_nom = 1.5;
};

/// Index of the first gate whose plane the drone has not crossed yet, or
/// gates.size() when every gate is behind it.
std::size_t next_gate_index(const WorldSpec& world, const Vec3& position);

/// Pure pursuit toward `target`: yaw_rate = K*wrap(bearing - yaw),
/// vx = v_nom*max(0, cos(bearing - yaw)), clamped.
Action pursue(const DroneState& s, const Vec3& target, const SimParams& sim, const ExpertParams& ex);

/// Scripted oracle. Fake worlds: pursue the next gate centre (hover once all
/// gates are behind). Real worlds: pursue the virtual gate, or rotate in
/// place when there is none.
Action expert_action(const WorldSpec& world, const DroneState& s, const SimParams& sim = {},
                     const ExpertParams& ex = {});

struct TrajectoryStep {
  Observation observation;
  Action expert_action;
  DroneState state;
};

using Episode = std::vector<TrajectoryStep>;

struct DatasetManifest {
  std::size_t episodes = 0;
  std::size_t steps = 0;
  std::size_t crashed_episodes = 0;
  std::size_t rejected_episodes = 0;
  nlohmann::json config = nlohmann::json::object();
};

struct Dataset {
  std::vector<Episode> episodes;
  WorldKind world_kind = WorldKind::fake;
  std::uint64_t generator_seed = 0;
  DatasetManifest manifest;

  std::size_t total_steps() const;
};

struct CollectOptions {
  SimParams sim;
  ExpertParams expert;
  std::size_t n_gates = 5;
  double clutter_density = 0.4;
  /// Record every stride-th control step (the simulation always runs at dt).
  std::size_t stride = 1;
  /// Exploration: the executed yaw rate is the expert's plus AR(1) noise of
  /// this stationary std (rad/s). Recorded labels stay the clean expert action.
  double yaw_noise = 0.0;
  double noise_correlation = 0.95;
};

/// Expert rollouts, one seed-derived world per episode. Episodes end at a
/// crash, at max_steps, or (fake worlds) once every gate is passed.
/// Crashed fake-world episodes are rejected and respawned, up to
/// 10 * n_episodes rejections.
Dataset collect_trajectories(WorldKind kind, std::size_t n_episodes, std::size_t max_steps,
                             std::uint64_t seed, const CollectOptions& opts = {});

/// Rebuilds the manifest counts from the episode list.
void refresh_manifest(Dataset& d);

/// Keeps the first n observations (in episode order); trims the last episode.
Dataset limit_steps(const Dataset& d, std::size_t n);

inline constexpr int kDatasetFormatVersion = 1;

void write_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

std::string encode_dataset(const Dataset& d);
Dataset decode_dataset(std::string_view bytes);

bool datasets_equal(const Dataset& a, const Dataset& b);

}  // namespace lcl
