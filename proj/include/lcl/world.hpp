#pragma once

// Planar-with-altitude drone world: procedural gate corridors ("fake") and
// cluttered rooms ("real"), kinematic stepping, collision checks, and a
// segmented raycast scanline camera.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace lcl {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

/// Two vertical posts of diameter frame_thickness flank a clear aperture of
/// width 2*half_width. yaw is the direction of the aperture normal; a gate is
/// passed by crossing its plane along that normal inside the aperture.
struct Gate {
  Vec3 center;
  double yaw = 0.0;
  double half_width = 1.0;
  double frame_thickness = 0.4;
};

/// Axis-aligned box in x-y, infinite in z.
struct Obstacle {
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
};

struct Bounds {
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
};

enum class WorldKind { fake, real };

std::string to_string(WorldKind kind);
WorldKind parse_world_kind(const std::string& text);

struct Pose {
  Vec3 position;
  double yaw = 0.0;
};

struct WorldSpec {
  WorldKind kind = WorldKind::fake;
  Bounds bounds;
  std::vector<Obstacle> obstacles;
  std::vector<Gate> gates;
  std::uint64_t seed = 0;
  Pose start;
};

struct DroneState {
  Vec3 position;
  double yaw = 0.0;
  double odometer = 0.0;
  bool crashed = false;
};

struct Action {
  double vx = 0.0, vy = 0.0, vz = 0.0, yaw_rate = 0.0;
};

enum class Cell : std::uint8_t { free = 0, gate = 1, wall = 2 };

/// One scanline: column 0 is the leftmost ray.
struct Observation {
  std::vector<Cell> cls;
  std::vector<double> depth;

  std::size_t width() const { return cls.size(); }
};

/// Simulator and world-generation constants. Defaults are the documented
/// desk-scale values.
struct SimParams {
  std::size_t width = 64;
  double fov_deg = 90.0;
  double d_max = 20.0;
  double dt = 0.05;
  double v_max = 2.0;
  double omega_max = 1.5;
  double collision_radius = 0.3;
  double z_min = 0.5;
  double z_max = 2.5;
  double cruise_altitude = 1.5;

  // fake corridor
  double gate_half_width = 1.0;
  double frame_thickness = 0.4;
  double gate_spacing_min = 5.0;
  double gate_spacing_max = 7.0;
  double offset_max = 1.0;
  double gate_yaw_max_deg = 30.0;
  double corridor_half_width = 15.0;
  double corridor_end_margin = 22.0;  // free run beyond the last gate

  // real room
  double room_size = 24.0;
  std::size_t max_obstacles = 40;
  double obstacle_min_size = 0.5;
  double obstacle_max_size = 2.5;
  double start_clearance = 1.5;

  // virtual gates
  double d_gate = 3.0;
  std::size_t gap_rays = 181;
};

WorldSpec spawn_fake_world(std::uint64_t seed, std::size_t n_gates, const SimParams& sim = {});
WorldSpec spawn_real_world(std::uint64_t seed, double clutter_density, bool with_gates,
                           const SimParams& sim = {}, std::size_t max_gates = 5);

DroneState initial_state(const WorldSpec& world);

Action clamp_action(const Action& a, const SimParams& sim = {});

/// True when a disc of the collision radius at (x, y) touches any obstacle,
/// gate post or boundary wall.
bool in_collision(const WorldSpec& world, double x, double y, const SimParams& sim = {});

DroneState step_dynamics(const WorldSpec& world, const DroneState& s, const Action& a, double dt,
                         const SimParams& sim = {});

/// Flattened 2W network input: class channel rescaled to {0, 0.5, 1},
/// followed by the depth channel.
std::vector<double> observation_features(const Observation& obs);

Observation render_observation(const WorldSpec& world, const DroneState& s, const SimParams& sim = {});

/// Angle (relative to yaw) of scanline column j.
double column_angle(std::size_t j, const SimParams& sim = {});

/// Widest collision-free forward gap within d_gate, as a gate facing away
/// from the drone. Only valid on real worlds.
std::optional<Gate> virtual_gate(const WorldSpec& world, const DroneState& s,
                                 const SimParams& sim = {});

/// Per-ray free/blocked scan used by virtual_gate: angles span [-90, 90] deg
/// relative to yaw; a ray is free when nothing (inflated by the collision
/// radius) is hit within d_gate.
std::vector<bool> forward_free_rays(const WorldSpec& world, const DroneState& s,
                                    const SimParams& sim = {});

/// Tracks progress through an ordered gate list.
struct GateProgress {
  std::size_t next = 0;    // index of the next gate whose plane is not yet crossed
  std::size_t passed = 0;  // crossings inside the aperture
};

/// Advances progress for a move from `before` to `after`. Returns true when
/// the next gate's plane was crossed during the move.
bool update_gate_progress(const WorldSpec& world, GateProgress& progress, const Vec3& before,
                          const Vec3& after);

double wrap_angle(double a);

void to_json(nlohmann::json& j, const WorldSpec& w);
void from_json(const nlohmann::json& j, WorldSpec& w);
std::string world_to_json(const WorldSpec& w);
WorldSpec world_from_json(const std::string& text);

/// Checks the structural invariants of a spawned world; returns a list of
/// violated invariants (empty when valid).
std::vector<std::string> validate_world(const WorldSpec& world, const SimParams& sim = {});

}  // namespace lcl
