#include "lcl/expert.hpp"

#include <cmath>
#include <cstring>

#include "lcl/container.hpp"
#include "lcl/errors.hpp"
#include "lcl/rng.hpp"

namespace lcl {

std::size_t next_gate_index(const WorldSpec& world, const Vec3& p) {
  for (std::size_t i = 0; i < world.gates.size(); ++i) {
    const Gate& g = world.gates[i];
    const double s = (p.x - g.center.x) * std::cos(g.yaw) + (p.y - g.center.y) * std::sin(g.yaw);
    if (s < 0.0) return i;
  }
  return world.gates.size();
}

Action pursue(const DroneState& s, const Vec3& target, const SimParams& sim, const ExpertParams& ex) {
  const double bearing = std::atan2(target.y - s.position.y, target.x - s.position.x);
  const double err = wrap_angle(bearing - s.yaw);
  Action a;
  a.yaw_rate = ex.k_omega * err;
  a.vx = ex.v_nom * std::max(0.0, std::cos(err));
  return clamp_action(a, sim);
}

Action expert_action(const WorldSpec& world, const DroneState& s, const SimParams& sim,
                     const ExpertParams& ex) {
  if (s.crashed) throw ContractError("expert_action: state is crashed");
  if (world.kind == WorldKind::fake) {
    const std::size_t i = next_gate_index(world, s.position);
    if (i == world.gates.size()) return Action{};
    return pursue(s, world.gates[i].center, sim, ex);
  }
  if (auto g = virtual_gate(world, s, sim)) return pursue(s, g->center, sim, ex);
  Action spin;
  spin.yaw_rate = sim.omega_max;
  return spin;
}

std::size_t Dataset::total_steps() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.size();
  return n;
}

void refresh_manifest(Dataset& d) {
  d.manifest.episodes = d.episodes.size();
  d.manifest.steps = d.total_steps();
}

namespace {

struct EpisodeResult {
  Episode steps;
  bool crashed = false;
};

EpisodeResult run_expert_episode(const WorldSpec& world, std::size_t max_steps, const CollectOptions& o) {
  EpisodeResult r;
  DroneState s = initial_state(world);
  Rng rng = make_rng(world.seed, {0x9015e});
  const double rho = o.noise_correlation;
  const double innovation = o.yaw_noise * std::sqrt(1.0 - rho * rho);
  double noise = o.yaw_noise > 0.0 ? gaussian(rng, o.yaw_noise) : 0.0;
  for (std::size_t t = 0; t < max_steps; ++t) {
    if (world.kind == WorldKind::fake && next_gate_index(world, s.position) == world.gates.size()) break;
    const Action a = expert_action(world, s, o.sim, o.expert);
    if (t % o.stride == 0) r.steps.push_back({render_observation(world, s, o.sim), a, s});
    Action executed = a;
    if (o.yaw_noise > 0.0) {
      executed.yaw_rate += noise;
      executed = clamp_action(executed, o.sim);
      noise = rho * noise + gaussian(rng, innovation);
    }
    s = step_dynamics(world, s, executed, o.sim.dt, o.sim);
    if (s.crashed) {
      r.crashed = true;
      break;
    }
  }
  return r;
}

}  // namespace

Dataset collect_trajectories(WorldKind kind, std::size_t n_episodes, std::size_t max_steps,
                             std::uint64_t seed, const CollectOptions& opts) {
  if (n_episodes < 1) throw ContractError("collect_trajectories: n_episodes must be >= 1");
  if (max_steps < 1) throw ContractError("collect_trajectories: max_steps must be >= 1");
  if (opts.stride < 1) throw ContractError("collect_trajectories: stride must be >= 1");
  if (!(opts.yaw_noise >= 0.0)) throw ContractError("collect_trajectories: yaw_noise must be >= 0");
  if (!(opts.noise_correlation >= 0.0 && opts.noise_correlation < 1.0)) {
    throw ContractError("collect_trajectories: noise_correlation must be in [0, 1)");
  }
  Dataset d;
  d.world_kind = kind;
  d.generator_seed = seed;
  const std::size_t cap = 10 * n_episodes;
  std::size_t rejected = 0;
  for (std::size_t e = 0; e < n_episodes; ++e) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      const std::uint64_t world_seed = derive_seed(seed, {e, attempt});
      const WorldSpec world = kind == WorldKind::fake
                                  ? spawn_fake_world(world_seed, opts.n_gates, opts.sim)
                                  : spawn_real_world(world_seed, opts.clutter_density, false, opts.sim);
      EpisodeResult r = run_expert_episode(world, max_steps, opts);
      if (kind == WorldKind::fake && r.crashed) {
        if (++rejected > cap) {
          throw GenerationError("collect_trajectories: more than " + std::to_string(cap) +
                                " crashed fake-world episodes rejected");
        }
        continue;
      }
      if (r.crashed) ++d.manifest.crashed_episodes;
      d.episodes.push_back(std::move(r.steps));
      break;
    }
  }
  d.manifest.rejected_episodes = rejected;
  d.manifest.config = {{"kind", to_string(kind)},
                       {"n_episodes", n_episodes},
                       {"max_steps", max_steps},
                       {"stride", opts.stride},
                       {"n_gates", opts.n_gates},
                       {"clutter_density", opts.clutter_density},
                       {"k_omega", opts.expert.k_omega},
                       {"v_nom", opts.expert.v_nom},
                       {"yaw_noise", opts.yaw_noise},
                       {"noise_correlation", opts.noise_correlation},
                       {"width", opts.sim.width},
                       {"dt", opts.sim.dt}};
  refresh_manifest(d);
  return d;
}

Dataset limit_steps(const Dataset& d, std::size_t n) {
  Dataset out = d;
  out.episodes.clear();
  std::size_t left = n;
  for (const auto& ep : d.episodes) {
    if (left == 0) break;
    const std::size_t take = std::min(left, ep.size());
    out.episodes.emplace_back(ep.begin(), ep.begin() + static_cast<std::ptrdiff_t>(take));
    left -= take;
  }
  refresh_manifest(out);
  return out;
}

// Records: episode_lengths [E], obs.class [N x W], obs.depth [N x W],
// actions [N x 4] (vx, vy, vz, yaw_rate), states [N x 6]
// (x, y, z, yaw, odometer, crashed). The manifest is the metadata object.
std::string encode_dataset(const Dataset& d) {
  const std::size_t n = d.total_steps();
  const std::size_t w = n ? d.episodes.front().front().observation.width() : 0;
  Tensor lengths = Tensor::zeros({d.episodes.size()});
  Tensor cls = Tensor::zeros({n, w}), depth = Tensor::zeros({n, w});
  Tensor actions = Tensor::zeros({n, 4}), states = Tensor::zeros({n, 6});
  std::size_t row = 0;
  for (std::size_t e = 0; e < d.episodes.size(); ++e) {
    lengths[e] = static_cast<double>(d.episodes[e].size());
    for (const auto& st : d.episodes[e]) {
      if (st.observation.width() != w) throw ContractError("write_dataset: mixed observation widths");
      for (std::size_t j = 0; j < w; ++j) {
        cls[row * w + j] = static_cast<double>(st.observation.cls[j]);
        depth[row * w + j] = st.observation.depth[j];
      }
      const Action& a = st.expert_action;
      const double av[4] = {a.vx, a.vy, a.vz, a.yaw_rate};
      std::memcpy(&actions.data[row * 4], av, sizeof av);
      const DroneState& s = st.state;
      const double sv[6] = {s.position.x, s.position.y, s.position.z, s.yaw, s.odometer, s.crashed ? 1.0 : 0.0};
      std::memcpy(&states.data[row * 6], sv, sizeof sv);
      ++row;
    }
  }
  Container c;
  c.records = {{"episode_lengths", std::move(lengths)},
               {"obs.class", std::move(cls)},
               {"obs.depth", std::move(depth)},
               {"actions", std::move(actions)},
               {"states", std::move(states)}};
  c.metadata = {{"format", "lcl-dataset"},
                {"dataset_version", kDatasetFormatVersion},
                {"world_kind", to_string(d.world_kind)},
                {"generator_seed", d.generator_seed},
                {"episodes", d.manifest.episodes},
                {"steps", d.manifest.steps},
                {"width", w},
                {"crashed_episodes", d.manifest.crashed_episodes},
                {"rejected_episodes", d.manifest.rejected_episodes},
                {"config", d.manifest.config}};
  return encode_container(c);
}

Dataset decode_dataset(std::string_view bytes) {
  const Container c = decode_container(bytes);
  const auto& m = c.metadata;
  Dataset d;
  std::size_t w = 0;
  try {
    if (m.at("format").get<std::string>() != "lcl-dataset") throw FormatError("manifest: not a dataset container");
    if (m.at("dataset_version").get<int>() != kDatasetFormatVersion) {
      throw FormatError("manifest: unsupported dataset version " + m.at("dataset_version").dump());
    }
    d.world_kind = parse_world_kind(m.at("world_kind").get<std::string>());
    d.generator_seed = m.at("generator_seed").get<std::uint64_t>();
    d.manifest.episodes = m.at("episodes").get<std::size_t>();
    d.manifest.steps = m.at("steps").get<std::size_t>();
    d.manifest.crashed_episodes = m.at("crashed_episodes").get<std::size_t>();
    d.manifest.rejected_episodes = m.at("rejected_episodes").get<std::size_t>();
    d.manifest.config = m.at("config");
    w = m.at("width").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  const Tensor& lengths = c.record("episode_lengths");
  const Tensor& cls = c.record("obs.class");
  const Tensor& depth = c.record("obs.depth");
  const Tensor& actions = c.record("actions");
  const Tensor& states = c.record("states");
  if (lengths.rank() != 1 || lengths.size() != d.manifest.episodes) {
    throw IntegrityError("episode_lengths: manifest declares " + std::to_string(d.manifest.episodes) +
                         " episodes, file holds " + std::to_string(lengths.size()));
  }
  std::size_t n = 0;
  for (double v : lengths.data) {
    if (!(v >= 1.0) || v != std::floor(v)) throw IntegrityError("episode_lengths: invalid episode length");
    n += static_cast<std::size_t>(v);
  }
  if (n != d.manifest.steps) {
    throw IntegrityError("episode_lengths: manifest declares " + std::to_string(d.manifest.steps) +
                         " steps, episodes sum to " + std::to_string(n));
  }
  auto check = [&](const Tensor& t, std::size_t cols, const char* name) {
    if (t.dims != Shape{n, cols}) {
      throw IntegrityError(std::string(name) + ": shape " + shape_string(t.dims) + " disagrees with manifest");
    }
  };
  check(cls, w, "obs.class");
  check(depth, w, "obs.depth");
  check(actions, 4, "actions");
  check(states, 6, "states");

  std::size_t row = 0;
  for (double len : lengths.data) {
    Episode ep;
    for (std::size_t t = 0; t < static_cast<std::size_t>(len); ++t, ++row) {
      TrajectoryStep st;
      st.observation.cls.resize(w);
      st.observation.depth.resize(w);
      for (std::size_t j = 0; j < w; ++j) {
        const double c = cls[row * w + j];
        if (c != 0.0 && c != 1.0 && c != 2.0) throw IntegrityError("obs.class: invalid class value");
        st.observation.cls[j] = static_cast<Cell>(static_cast<int>(c));
        st.observation.depth[j] = depth[row * w + j];
      }
      const double* a = &actions.data[row * 4];
      st.expert_action = {a[0], a[1], a[2], a[3]};
      const double* s = &states.data[row * 6];
      st.state.position = {s[0], s[1], s[2]};
      st.state.yaw = s[3];
      st.state.odometer = s[4];
      st.state.crashed = s[5] != 0.0;
      ep.push_back(std::move(st));
    }
    d.episodes.push_back(std::move(ep));
  }
  return d;
}

void write_dataset(const Dataset& d, const std::filesystem::path& path) { write_file(path, encode_dataset(d)); }

Dataset read_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

bool datasets_equal(const Dataset& a, const Dataset& b) {
  return encode_dataset(a) == encode_dataset(b);
}

}  // namespace lcl
