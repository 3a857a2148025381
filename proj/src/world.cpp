#include "lcl/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "lcl/errors.hpp"
#include "lcl/rng.hpp"

namespace lcl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

double deg2rad(double d) { return d * kPi / 180.0; }

struct Ray {
  double ox, oy, dx, dy;
};

struct Circle {
  double cx, cy, r;
};

// Distance along the ray to the inside of the bounds' boundary.
double ray_exit_bounds(const Ray& ray, const Bounds& b) {
  double t = kInf;
  if (ray.dx > 0) t = std::min(t, (b.max_x - ray.ox) / ray.dx);
  if (ray.dx < 0) t = std::min(t, (b.min_x - ray.ox) / ray.dx);
  if (ray.dy > 0) t = std::min(t, (b.max_y - ray.oy) / ray.dy);
  if (ray.dy < 0) t = std::min(t, (b.min_y - ray.oy) / ray.dy);
  return std::max(t, 0.0);
}

// Slab test; returns +inf on a miss and 0 when the origin is inside.
double ray_box(const Ray& ray, double min_x, double min_y, double max_x, double max_y) {
  double t0 = 0.0, t1 = kInf;
  const double o[2] = {ray.ox, ray.oy};
  const double d[2] = {ray.dx, ray.dy};
  const double lo[2] = {min_x, min_y};
  const double hi[2] = {max_x, max_y};
  for (int a = 0; a < 2; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return kInf;
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a];
    double tb = (hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return kInf;
  }
  return t0;
}

double ray_circle(const Ray& ray, const Circle& c) {
  const double fx = ray.ox - c.cx, fy = ray.oy - c.cy;
  const double b = fx * ray.dx + fy * ray.dy;
  const double cc = fx * fx + fy * fy - c.r * c.r;
  if (cc <= 0.0) return 0.0;
  const double disc = b * b - cc;
  if (disc < 0.0) return kInf;
  const double t = -b - std::sqrt(disc);
  return t >= 0.0 ? t : kInf;
}

void gate_posts(const Gate& g, Circle out[2]) {
  const double r = 0.5 * g.frame_thickness;
  const double off = g.half_width + r;
  const double tx = -std::sin(g.yaw), ty = std::cos(g.yaw);
  out[0] = {g.center.x + off * tx, g.center.y + off * ty, r};
  out[1] = {g.center.x - off * tx, g.center.y - off * ty, r};
}

struct Hit {
  double t = kInf;
  Cell cls = Cell::free;
};

// Nearest hit with every solid grown by `inflate` metres.
Hit cast(const WorldSpec& w, const Ray& ray, double inflate) {
  Hit best;
  const Bounds shrunk{w.bounds.min_x + inflate, w.bounds.min_y + inflate, w.bounds.max_x - inflate,
                      w.bounds.max_y - inflate};
  best.t = ray_exit_bounds(ray, shrunk);
  best.cls = Cell::wall;
  for (const auto& o : w.obstacles) {
    const double t = ray_box(ray, o.min_x - inflate, o.min_y - inflate, o.max_x + inflate,
                             o.max_y + inflate);
    if (t < best.t) best = {t, Cell::wall};
  }
  for (const auto& g : w.gates) {
    Circle posts[2];
    gate_posts(g, posts);
    for (auto& p : posts) {
      p.r += inflate;
      const double t = ray_circle(ray, p);
      if (t < best.t) best = {t, Cell::gate};
    }
  }
  return best;
}

double point_box_distance(double x, double y, const Obstacle& o) {
  const double dx = std::max({o.min_x - x, 0.0, x - o.max_x});
  const double dy = std::max({o.min_y - y, 0.0, y - o.max_y});
  return std::hypot(dx, dy);
}

}  // namespace

std::string to_string(WorldKind kind) { return kind == WorldKind::fake ? "fake" : "real"; }

WorldKind parse_world_kind(const std::string& text) {
  if (text == "fake") return WorldKind::fake;
  if (text == "real") return WorldKind::real;
  throw FormatError("unknown world kind '" + text + "'");
}

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

WorldSpec spawn_fake_world(std::uint64_t seed, std::size_t n_gates, const SimParams& sim) {
  if (n_gates < 1) throw ContractError("spawn_fake_world: n_gates must be >= 1");
  Rng rng = make_rng(seed, {0xfa4e});
  WorldSpec w;
  w.kind = WorldKind::fake;
  w.seed = seed;
  w.start = {{1.0, 0.0, sim.cruise_altitude}, 0.0};
  const double yaw_max = deg2rad(sim.gate_yaw_max_deg);
  double x = w.start.position.x;
  for (std::size_t i = 0; i < n_gates; ++i) {
    x += uniform(rng, sim.gate_spacing_min, sim.gate_spacing_max);
    Gate g;
    g.center = {x, uniform(rng, -sim.offset_max, sim.offset_max), sim.cruise_altitude};
    g.yaw = uniform(rng, -yaw_max, yaw_max);
    g.half_width = sim.gate_half_width;
    g.frame_thickness = sim.frame_thickness;
    w.gates.push_back(g);
  }
  w.bounds = {0.0, -sim.corridor_half_width, x + sim.corridor_end_margin, sim.corridor_half_width};
  return w;
}

WorldSpec spawn_real_world(std::uint64_t seed, double clutter_density, bool with_gates,
                           const SimParams& sim, std::size_t max_gates) {
  if (!(clutter_density >= 0.0 && clutter_density <= 1.0)) {
    throw ContractError("spawn_real_world: clutter density must lie in [0, 1]");
  }
  Rng rng = make_rng(seed, {0x4ea1});
  WorldSpec w;
  w.kind = WorldKind::real;
  w.seed = seed;
  const double S = sim.room_size;
  w.bounds = {0.0, 0.0, S, S};
  w.start = {{2.0, 0.5 * S, sim.cruise_altitude}, 0.0};
  const double sx = w.start.position.x, sy = w.start.position.y;
  // Kept clear: a disc around the start and a 2 m wide lane straight ahead.
  const Obstacle lane{sx, sy - 1.0, sx + sim.d_gate + 1.0, sy + 1.0};

  const auto n = static_cast<std::size_t>(std::lround(clutter_density * static_cast<double>(sim.max_obstacles)));
  for (std::size_t i = 0; i < n; ++i) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double ww = uniform(rng, sim.obstacle_min_size, sim.obstacle_max_size);
      const double hh = uniform(rng, sim.obstacle_min_size, sim.obstacle_max_size);
      const double cx = uniform(rng, 0.5 * ww, S - 0.5 * ww);
      const double cy = uniform(rng, 0.5 * hh, S - 0.5 * hh);
      const Obstacle o{cx - 0.5 * ww, cy - 0.5 * hh, cx + 0.5 * ww, cy + 0.5 * hh};
      if (point_box_distance(sx, sy, o) <= sim.start_clearance) continue;
      const bool overlaps_lane = o.min_x < lane.max_x && o.max_x > lane.min_x &&
                                 o.min_y < lane.max_y && o.max_y > lane.min_y;
      if (overlaps_lane) continue;
      w.obstacles.push_back(o);
      break;
    }
  }

  if (with_gates) {
    DroneState probe = initial_state(w);
    for (std::size_t i = 0; i < max_gates; ++i) {
      auto g = virtual_gate(w, probe, sim);
      if (!g) break;
      w.gates.push_back(*g);
      probe.position = g->center;
      probe.yaw = g->yaw;
    }
  }
  return w;
}

DroneState initial_state(const WorldSpec& world) {
  DroneState s;
  s.position = world.start.position;
  s.yaw = world.start.yaw;
  return s;
}

Action clamp_action(const Action& a, const SimParams& sim) {
  auto c = [](double v, double m) { return std::clamp(v, -m, m); };
  return {c(a.vx, sim.v_max), c(a.vy, sim.v_max), c(a.vz, sim.v_max), c(a.yaw_rate, sim.omega_max)};
}

bool in_collision(const WorldSpec& world, double x, double y, const SimParams& sim) {
  const double r = sim.collision_radius;
  const Bounds& b = world.bounds;
  if (x - r < b.min_x || x + r > b.max_x || y - r < b.min_y || y + r > b.max_y) return true;
  for (const auto& o : world.obstacles) {
    if (point_box_distance(x, y, o) < r) return true;
  }
  for (const auto& g : world.gates) {
    Circle posts[2];
    gate_posts(g, posts);
    for (const auto& p : posts) {
      if (std::hypot(x - p.cx, y - p.cy) < r + p.r) return true;
    }
  }
  return false;
}

DroneState step_dynamics(const WorldSpec& world, const DroneState& s, const Action& a, double dt,
                         const SimParams& sim) {
  if (s.crashed) throw ContractError("step_dynamics: state is crashed (terminal)");
  if (!(dt > 0.0 && dt <= 0.2)) throw ContractError("step_dynamics: dt must lie in (0, 0.2]");
  const Action c = clamp_action(a, sim);
  DroneState n = s;
  n.yaw = wrap_angle(s.yaw + dt * c.yaw_rate);
  const double cy = std::cos(n.yaw), sy = std::sin(n.yaw);
  const double dx = dt * (cy * c.vx - sy * c.vy);
  const double dy = dt * (sy * c.vx + cy * c.vy);
  n.position.x += dx;
  n.position.y += dy;
  n.position.z = std::clamp(s.position.z + dt * c.vz, sim.z_min, sim.z_max);
  n.odometer += std::hypot(dx, dy);
  n.crashed = in_collision(world, n.position.x, n.position.y, sim);
  return n;
}

double column_angle(std::size_t j, const SimParams& sim) {
  const double step = deg2rad(sim.fov_deg) / static_cast<double>(sim.width);
  return (0.5 * static_cast<double>(sim.width) - static_cast<double>(j)) * step;
}

Observation render_observation(const WorldSpec& world, const DroneState& s, const SimParams& sim) {
  Observation obs;
  obs.cls.assign(sim.width, Cell::free);
  obs.depth.assign(sim.width, 0.0);
  for (std::size_t j = 0; j < sim.width; ++j) {
    const double ang = s.yaw + column_angle(j, sim);
    const Ray ray{s.position.x, s.position.y, std::cos(ang), std::sin(ang)};
    const Hit hit = cast(world, ray, 0.0);
    if (hit.t < sim.d_max) {
      obs.cls[j] = hit.cls;
      obs.depth[j] = std::clamp(1.0 - hit.t / sim.d_max, 0.0, 1.0);
      if (obs.depth[j] == 0.0) obs.cls[j] = Cell::free;
    }
  }
  return obs;
}

std::vector<double> observation_features(const Observation& obs) {
  const std::size_t w = obs.width();
  std::vector<double> f(2 * w);
  for (std::size_t j = 0; j < w; ++j) {
    f[j] = 0.5 * static_cast<double>(obs.cls[j]);
    f[w + j] = obs.depth[j];
  }
  return f;
}

std::vector<bool> forward_free_rays(const WorldSpec& world, const DroneState& s,
                                    const SimParams& sim) {
  const std::size_t n = std::max<std::size_t>(sim.gap_rays, 2);
  const double step = kPi / static_cast<double>(n - 1);
  std::vector<bool> free(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ang = s.yaw - 0.5 * kPi + static_cast<double>(i) * step;
    const Ray ray{s.position.x, s.position.y, std::cos(ang), std::sin(ang)};
    free[i] = cast(world, ray, sim.collision_radius).t > sim.d_gate;
  }
  return free;
}

std::optional<Gate> virtual_gate(const WorldSpec& world, const DroneState& s, const SimParams& sim) {
  if (world.kind != WorldKind::real) throw ContractError("virtual_gate: only defined on real worlds");
  const auto free = forward_free_rays(world, s, sim);
  const std::size_t n = free.size();
  const double step = kPi / static_cast<double>(n - 1);

  std::size_t best_len = 0;
  double best_center = 0.0;
  for (std::size_t i = 0; i < n;) {
    if (!free[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && free[j]) ++j;
    const std::size_t len = j - i;
    const double center = -0.5 * kPi + 0.5 * static_cast<double>(i + j - 1) * step;
    if (len > best_len || (len == best_len && std::abs(center) < std::abs(best_center))) {
      best_len = len;
      best_center = center;
    }
    i = j;
  }
  if (best_len == 0) return std::nullopt;
  const double width = std::min(static_cast<double>(best_len) * step, kPi);
  if (2.0 * sim.d_gate * std::sin(0.5 * width) < 2.0 * sim.collision_radius) return std::nullopt;

  Gate g;
  g.yaw = wrap_angle(s.yaw + best_center);
  g.center = {s.position.x + sim.d_gate * std::cos(g.yaw), s.position.y + sim.d_gate * std::sin(g.yaw),
              s.position.z};
  g.half_width = sim.gate_half_width;
  g.frame_thickness = sim.frame_thickness;
  return g;
}

bool update_gate_progress(const WorldSpec& world, GateProgress& progress, const Vec3& before,
                          const Vec3& after) {
  if (progress.next >= world.gates.size()) return false;
  const Gate& g = world.gates[progress.next];
  const double nx = std::cos(g.yaw), ny = std::sin(g.yaw);
  const double s0 = (before.x - g.center.x) * nx + (before.y - g.center.y) * ny;
  const double s1 = (after.x - g.center.x) * nx + (after.y - g.center.y) * ny;
  if (!(s0 < 0.0 && s1 >= 0.0)) return false;
  const double f = -s0 / (s1 - s0);
  const double px = before.x + f * (after.x - before.x);
  const double py = before.y + f * (after.y - before.y);
  const double lateral = -(px - g.center.x) * ny + (py - g.center.y) * nx;
  if (std::abs(lateral) <= g.half_width) ++progress.passed;
  ++progress.next;
  return true;
}

void to_json(nlohmann::json& j, const WorldSpec& w) {
  auto vec = [](const Vec3& v) { return nlohmann::json{{"x", v.x}, {"y", v.y}, {"z", v.z}}; };
  j = nlohmann::json::object();
  j["kind"] = to_string(w.kind);
  j["bounds"] = {{"min_x", w.bounds.min_x}, {"min_y", w.bounds.min_y}, {"max_x", w.bounds.max_x},
                 {"max_y", w.bounds.max_y}};
  j["obstacles"] = nlohmann::json::array();
  for (const auto& o : w.obstacles) {
    j["obstacles"].push_back({{"min_x", o.min_x}, {"min_y", o.min_y}, {"max_x", o.max_x}, {"max_y", o.max_y}});
  }
  j["gates"] = nlohmann::json::array();
  for (const auto& g : w.gates) {
    j["gates"].push_back({{"center", vec(g.center)},
                          {"yaw", g.yaw},
                          {"half_width", g.half_width},
                          {"frame_thickness", g.frame_thickness}});
  }
  j["seed"] = w.seed;
  j["start"] = {{"position", vec(w.start.position)}, {"yaw", w.start.yaw}};
}

void from_json(const nlohmann::json& j, WorldSpec& w) {
  auto vec = [](const nlohmann::json& v) {
    return Vec3{v.at("x").get<double>(), v.at("y").get<double>(), v.at("z").get<double>()};
  };
  w = WorldSpec{};
  w.kind = parse_world_kind(j.at("kind").get<std::string>());
  const auto& b = j.at("bounds");
  w.bounds = {b.at("min_x").get<double>(), b.at("min_y").get<double>(), b.at("max_x").get<double>(),
              b.at("max_y").get<double>()};
  for (const auto& o : j.at("obstacles")) {
    w.obstacles.push_back({o.at("min_x").get<double>(), o.at("min_y").get<double>(),
                           o.at("max_x").get<double>(), o.at("max_y").get<double>()});
  }
  for (const auto& g : j.at("gates")) {
    w.gates.push_back({vec(g.at("center")), g.at("yaw").get<double>(), g.at("half_width").get<double>(),
                       g.at("frame_thickness").get<double>()});
  }
  w.seed = j.at("seed").get<std::uint64_t>();
  w.start = {vec(j.at("start").at("position")), j.at("start").at("yaw").get<double>()};
}

std::string world_to_json(const WorldSpec& w) {
  nlohmann::json j = w;
  return j.dump(2);
}

WorldSpec world_from_json(const std::string& text) {
  try {
    return nlohmann::json::parse(text).get<WorldSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("world json: ") + e.what());
  }
}

std::vector<std::string> validate_world(const WorldSpec& world, const SimParams& sim) {
  std::vector<std::string> bad;
  const Bounds& b = world.bounds;
  if (!(b.min_x < b.max_x && b.min_y < b.max_y)) bad.push_back("bounds degenerate");
  auto inside = [&](double x, double y) {
    return x >= b.min_x && x <= b.max_x && y >= b.min_y && y <= b.max_y;
  };
  for (std::size_t i = 0; i < world.obstacles.size(); ++i) {
    const auto& o = world.obstacles[i];
    if (!(o.min_x < o.max_x && o.min_y < o.max_y)) bad.push_back("obstacle " + std::to_string(i) + " degenerate");
    if (!inside(o.min_x, o.min_y) || !inside(o.max_x, o.max_y)) {
      bad.push_back("obstacle " + std::to_string(i) + " outside bounds");
    }
  }
  for (std::size_t i = 0; i < world.gates.size(); ++i) {
    const auto& g = world.gates[i];
    if (!(g.half_width > sim.collision_radius)) bad.push_back("gate " + std::to_string(i) + " not passable");
    if (!(g.frame_thickness > 0.0)) bad.push_back("gate " + std::to_string(i) + " has no frame");
    if (!inside(g.center.x, g.center.y)) bad.push_back("gate " + std::to_string(i) + " outside bounds");
  }
  if (world.kind == WorldKind::fake) {
    if (world.gates.empty()) bad.push_back("fake world without gates");
    for (std::size_t i = 1; i < world.gates.size(); ++i) {
      const auto& p = world.gates[i - 1].center;
      const auto& c = world.gates[i].center;
      if (!(c.x > p.x)) bad.push_back("gate " + std::to_string(i) + " out of corridor order");
      if (std::hypot(c.x - p.x, c.y - p.y) < 4.0) bad.push_back("gate " + std::to_string(i) + " closer than 4 m");
    }
  }
  const auto& sp = world.start.position;
  if (in_collision(world, sp.x, sp.y, sim)) bad.push_back("start pose in collision");
  const auto rays = forward_free_rays(world, initial_state(world), sim);
  if (std::none_of(rays.begin(), rays.end(), [](bool f) { return f; })) {
    bad.push_back("no free direction from start");
  }
  return bad;
}

}  // namespace lcl
