#include "lcl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>

#include "lcl/cheat.hpp"
#include "lcl/errors.hpp"
#include "lcl/rng.hpp"

namespace lcl {

namespace {

constexpr const char* kGates = "ifog";

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Dense y = W x + b over a row-major block starting at w; returns the
// pointer just past the bias.
const double* dense(const double* w, std::size_t out, std::size_t in, const double* x, double* y) {
  const double* b = w + out * in;
  for (std::size_t i = 0; i < out; ++i) {
    const double* row = w + i * in;
    double acc = b[i];
    for (std::size_t j = 0; j < in; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return b + out;
}

}  // namespace

DenseStack ControllerShape::mlp() const {
  return DenseStack{"mlp", {k + h_dim, m1, m2, 4}, Activation::tanh, Activation::identity};
}

std::size_t ControllerShape::parameter_count() const {
  const std::size_t in = k + h_dim;
  return 4 * h_dim * (k + h_dim + 1) + (in * m1 + m1) + (m1 * m2 + m2) + (m2 * 4 + 4);
}

ControllerParams controller_zero(const ControllerShape& shape) {
  if (shape.k < 1 || shape.h_dim < 1 || shape.m1 < 1 || shape.m2 < 1) {
    throw ConfigError("controller: k, h_dim and MLP sizes must be >= 1");
  }
  ControllerParams p{shape, {}};
  const std::size_t h = shape.h_dim;
  for (const char* q = kGates; *q; ++q) p.params.add(std::string("lstm.W_") + *q, Tensor::zeros({h, shape.k}));
  for (const char* q = kGates; *q; ++q) p.params.add(std::string("lstm.U_") + *q, Tensor::zeros({h, h}));
  for (const char* q = kGates; *q; ++q) p.params.add(std::string("lstm.b_") + *q, Tensor::zeros({h}));
  const DenseStack mlp = shape.mlp();
  for (std::size_t l = 0; l < mlp.layers(); ++l) {
    p.params.add(mlp.weight_name(l), Tensor::zeros({mlp.sizes[l + 1], mlp.sizes[l]}));
    p.params.add(mlp.bias_name(l), Tensor::zeros({mlp.sizes[l + 1]}));
  }
  return p;
}

Genome flatten(const ControllerParams& p) {
  Genome g;
  g.reserve(p.params.total_values());
  for (const auto& e : p.params) g.insert(g.end(), e.value.data.begin(), e.value.data.end());
  return g;
}

ControllerParams unflatten(const ControllerShape& shape, std::span<const double> genome) {
  ControllerParams p = controller_zero(shape);
  if (genome.size() != p.params.total_values()) {
    throw ContractError("unflatten: genome length " + std::to_string(genome.size()) + ", controller needs " +
                        std::to_string(p.params.total_values()));
  }
  std::size_t off = 0;
  for (auto& e : p.params) {
    std::copy_n(genome.begin() + static_cast<std::ptrdiff_t>(off), e.value.size(), e.value.data.begin());
    off += e.value.size();
  }
  return p;
}

Action controller_step_flat(const ControllerShape& shape, const double* genome, std::span<const double> z,
                            LstmState& st) {
  const std::size_t k = shape.k, h = shape.h_dim;
  if (z.size() != k) {
    throw DimensionError("controller_step: latent of length " + std::to_string(z.size()) + ", controller expects " +
                         std::to_string(k));
  }
  if (st.h.size() != h || st.c.size() != h) throw DimensionError("controller_step: LSTM state size mismatch");

  thread_local std::vector<double> pre, x, l1, l2;
  pre.assign(4 * h, 0.0);
  const double* W = genome;
  const double* U = W + 4 * h * k;
  const double* b = U + 4 * h * h;
  for (std::size_t q = 0; q < 4; ++q) {
    for (std::size_t r = 0; r < h; ++r) {
      const double* wr = W + (q * h + r) * k;
      const double* ur = U + (q * h + r) * h;
      double acc = b[q * h + r];
      for (std::size_t j = 0; j < k; ++j) acc += wr[j] * z[j];
      for (std::size_t j = 0; j < h; ++j) acc += ur[j] * st.h[j];
      pre[q * h + r] = acc;
    }
  }
  for (std::size_t r = 0; r < h; ++r) {
    const double i = sigmoid(pre[r]), f = sigmoid(pre[h + r]), o = sigmoid(pre[2 * h + r]);
    const double g = std::tanh(pre[3 * h + r]);
    st.c[r] = f * st.c[r] + i * g;
    st.h[r] = o * std::tanh(st.c[r]);
  }

  x.assign(z.begin(), z.end());
  x.insert(x.end(), st.h.begin(), st.h.end());
  l1.resize(shape.m1);
  l2.resize(shape.m2);
  const double* w = b + 4 * h;
  w = dense(w, shape.m1, k + h, x.data(), l1.data());
  for (auto& v : l1) v = std::tanh(v);
  w = dense(w, shape.m2, shape.m1, l1.data(), l2.data());
  for (auto& v : l2) v = std::tanh(v);
  double out[4];
  dense(w, 4, shape.m2, l2.data(), out);

  SimParams bounds;
  bounds.v_max = shape.v_max;
  bounds.omega_max = shape.omega_max;
  return clamp_action({shape.v_max * out[0], shape.v_max * out[1], shape.v_max * out[2], shape.omega_max * out[3]},
                      bounds);
}

std::pair<Action, LstmState> controller_step(const ControllerParams& p, std::span<const double> z,
                                             const LstmState& st) {
  const Genome g = flatten(p);
  if (g.size() != p.shape.parameter_count()) throw DimensionError("controller_step: parameters do not match shape");
  LstmState next = st;
  const Action a = controller_step_flat(p.shape, g.data(), z, next);
  return {a, std::move(next)};
}

ImitationSet prepare_imitation(const VaeParams& vae, const Dataset& data) {
  if (data.world_kind != WorldKind::fake) throw ContractError("imitation fitness needs a fake-world dataset");
  if (data.total_steps() == 0) throw ContractError("imitation fitness: empty dataset");
  ImitationSet set;
  set.k = vae.k;
  set.latents.reserve(data.total_steps() * vae.k);
  for (const auto& ep : data.episodes) {
    set.episode_lengths.push_back(ep.size());
    for (const auto& st : ep) {
      const auto code = encode(vae, st.observation);
      set.latents.insert(set.latents.end(), code.mu.begin(), code.mu.end());
      set.targets.push_back(st.expert_action);
    }
  }
  return set;
}

double fitness_imitation(const ControllerShape& shape, std::span<const double> genome, const ImitationSet& set) {
  if (set.steps() == 0) throw ContractError("imitation fitness: empty dataset");
  if (genome.size() != shape.parameter_count()) {
    throw ContractError("imitation fitness: genome length " + std::to_string(genome.size()) + ", controller needs " +
                        std::to_string(shape.parameter_count()));
  }
  if (set.k != shape.k) throw DimensionError("imitation fitness: latent size differs from controller k");
  double err = 0.0;
  std::size_t row = 0;
  LstmState st = LstmState::zeros(shape.h_dim);
  for (std::size_t len : set.episode_lengths) {
    std::fill(st.h.begin(), st.h.end(), 0.0);
    std::fill(st.c.begin(), st.c.end(), 0.0);
    for (std::size_t t = 0; t < len; ++t, ++row) {
      const std::span<const double> z(set.latents.data() + row * set.k, set.k);
      const Action a = controller_step_flat(shape, genome.data(), z, st);
      const Action& e = set.targets[row];
      err += (a.vx - e.vx) * (a.vx - e.vx) + (a.vy - e.vy) * (a.vy - e.vy) + (a.vz - e.vz) * (a.vz - e.vz) +
             (a.yaw_rate - e.yaw_rate) * (a.yaw_rate - e.yaw_rate);
    }
  }
  return -err / static_cast<double>(4 * set.steps());
}

double fitness_imitation(const ControllerShape& shape, std::span<const double> genome, const VaeParams& vae,
                         const Dataset& data) {
  return fitness_imitation(shape, genome, prepare_imitation(vae, data));
}

double fitness_reward(const ControllerShape& shape, std::span<const double> genome, const VaeParams& vae,
                      const std::vector<std::uint64_t>& seeds, const RewardOptions& opts) {
  if (seeds.empty()) throw ContractError("reward fitness: empty seed list");
  const ControllerParams ctrl = unflatten(shape, genome);
  double total = 0.0;
  for (std::uint64_t seed : seeds) {
    const WorldSpec world = spawn_fake_world(seed, opts.n_gates, opts.sim);
    const RolloutResult r = rollout(world, vae, ctrl, opts.max_steps, opts.sim);
    total += r.odometer() + opts.gate_bonus * static_cast<double>(r.gates_passed);
  }
  return total / static_cast<double>(seeds.size());
}

FitnessKind parse_fitness_kind(const std::string& text) {
  if (text == "imitation") return FitnessKind::imitation;
  if (text == "reward") return FitnessKind::reward;
  throw ConfigError("unknown fitness kind '" + text + "' (expected imitation or reward)");
}

std::string to_string(FitnessKind kind) { return kind == FitnessKind::imitation ? "imitation" : "reward"; }

void validate(const EvolutionConfig& cfg) {
  if (cfg.population < 2) throw ConfigError("evolution: population must be >= 2");
  if (cfg.elites < 1 || cfg.elites >= cfg.population) throw ConfigError("evolution: need 1 <= elites < population");
  if (!(cfg.mutation_sigma > 0.0)) throw ConfigError("evolution: mutation_sigma must be > 0");
  if (!(cfg.init_sigma >= 0.0)) throw ConfigError("evolution: init_sigma must be >= 0");
  if (cfg.generations < 1) throw ConfigError("evolution: generations must be >= 1");
}

EvolutionResult evolve(const EvolutionConfig& cfg, std::size_t dim, const FitnessFn& fitness) {
  validate(cfg);
  std::vector<Genome> pop(cfg.population, Genome(dim));
  std::vector<std::optional<double>> fit(cfg.population);
  {
    Rng rng = make_rng(cfg.seed, {0x1417});
    for (auto& g : pop) {
      for (auto& v : g) v = gaussian(rng, cfg.init_sigma);
    }
  }
  EvolutionResult res;
  std::vector<std::size_t> order(cfg.population);
  for (std::size_t gen = 0; gen < cfg.generations; ++gen) {
    double sum = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      if (!fit[i]) {
        const double f = fitness(pop[i], gen, i);
        if (!std::isfinite(f)) {
          throw EvolutionError("evolve: non-finite fitness for genome " + std::to_string(i) + " of generation " +
                               std::to_string(gen));
        }
        fit[i] = f;
      }
      sum += *fit[i];
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return *fit[a] > *fit[b]; });
    if (gen == 0 || *fit[order[0]] > res.best_fitness) {
      res.best = pop[order[0]];
      res.best_fitness = *fit[order[0]];
    }
    res.history.push_back({res.best_fitness, sum / static_cast<double>(pop.size())});
    if (gen + 1 == cfg.generations) break;

    std::vector<Genome> next;
    std::vector<std::optional<double>> next_fit;
    next.reserve(cfg.population);
    for (std::size_t e = 0; e < cfg.elites; ++e) {
      next.push_back(pop[order[e]]);
      next_fit.push_back(fit[order[e]]);
    }
    Rng rng = make_rng(cfg.seed, {0x3a7e, gen});
    std::uniform_int_distribution<std::size_t> pick(0, cfg.elites - 1);
    while (next.size() < cfg.population) {
      Genome child = next[pick(rng)];
      for (auto& v : child) v += gaussian(rng, cfg.mutation_sigma);
      next.push_back(std::move(child));
      next_fit.emplace_back();
    }
    pop.swap(next);
    fit.swap(next_fit);
  }
  return res;
}

std::string history_csv(const std::vector<GenerationStats>& history) {
  std::string out = "generation,best,mean\n";
  char line[96];
  for (std::size_t g = 0; g < history.size(); ++g) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", g, history[g].best, history[g].mean);
    out += line;
  }
  return out;
}

namespace {

template <class Perceive>
RolloutResult closed_loop(const WorldSpec& world, const ControllerParams& ctrl, std::size_t max_steps,
                          const SimParams& sim, Perceive&& perceive) {
  const Genome g = flatten(ctrl);
  if (g.size() != ctrl.shape.parameter_count()) throw DimensionError("rollout: parameters do not match shape");
  RolloutResult r;
  DroneState s = initial_state(world);
  LstmState st = LstmState::zeros(ctrl.shape.h_dim);
  GateProgress progress;
  for (std::size_t t = 0; t < max_steps && !s.crashed; ++t) {
    RolloutStep step{s, render_observation(world, s, sim), {}, {}};
    step.z = perceive(step.observation);
    step.action = controller_step_flat(ctrl.shape, g.data(), step.z, st);
    const DroneState next = step_dynamics(world, s, step.action, sim.dt, sim);
    update_gate_progress(world, progress, s.position, next.position);
    r.trace.push_back(std::move(step));
    s = next;
  }
  r.final_state = s;
  r.gates_passed = progress.passed;
  return r;
}

}  // namespace

RolloutResult rollout(const WorldSpec& world, const VaeParams& vae, const ControllerParams& ctrl,
                      std::size_t max_steps, const SimParams& sim) {
  if (world.kind != WorldKind::fake) throw ContractError("rollout: VAE perception runs in fake worlds only");
  return closed_loop(world, ctrl, max_steps, sim, [&](const Observation& o) { return encode(vae, o).mu; });
}

RolloutResult rollout(const WorldSpec& world, const CheatEncoderParams& cheat, const ControllerParams& ctrl,
                      std::size_t max_steps, const SimParams& sim) {
  if (world.kind != WorldKind::real) throw ContractError("rollout: cheat perception runs in real worlds only");
  return closed_loop(world, ctrl, max_steps, sim, [&](const Observation& o) { return cheat_encode(cheat, o); });
}

}  // namespace lcl
