#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "lcl/errors.hpp"
#include "lcl/policy.hpp"

using namespace lcl;

namespace {

ControllerShape tiny_shape() {
  ControllerShape s;
  s.k = 1;
  s.h_dim = 1;
  s.m1 = 1;
  s.m2 = 1;
  return s;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

ControllerParams random_controller(const ControllerShape& shape, std::uint64_t seed, double sigma = 0.5) {
  ControllerParams p = controller_zero(shape);
  auto rng = make_rng(seed);
  for (auto& e : p.params) {
    for (auto& v : e.value.data) v = gaussian(rng, sigma);
  }
  return p;
}

// Reference cell written directly from the tensor names, one gate at a time.
Action reference_step(const ControllerParams& p, const std::vector<double>& z, LstmState& st) {
  const std::size_t h = p.shape.h_dim, k = p.shape.k;
  auto gate = [&](char q, std::size_t r) {
    const Tensor& W = p.params.at(std::string("lstm.W_") + q);
    const Tensor& U = p.params.at(std::string("lstm.U_") + q);
    double a = p.params.at(std::string("lstm.b_") + q)[r];
    for (std::size_t j = 0; j < k; ++j) a += W[r * k + j] * z[j];
    for (std::size_t j = 0; j < h; ++j) a += U[r * h + j] * st.h[j];
    return a;
  };
  std::vector<double> h_new(h), c_new(h);
  for (std::size_t r = 0; r < h; ++r) {
    const double i = sig(gate('i', r)), f = sig(gate('f', r)), o = sig(gate('o', r)), g = std::tanh(gate('g', r));
    c_new[r] = f * st.c[r] + i * g;
    h_new[r] = o * std::tanh(c_new[r]);
  }
  st.h = h_new;
  st.c = c_new;
  std::vector<double> x = z;
  x.insert(x.end(), h_new.begin(), h_new.end());
  for (std::size_t l = 0; l < 3; ++l) {
    const Tensor& W = p.params.at("mlp." + std::to_string(l) + ".weight");
    const Tensor& b = p.params.at("mlp." + std::to_string(l) + ".bias");
    std::vector<double> y(W.dims[0]);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = b[i];
      for (std::size_t j = 0; j < x.size(); ++j) y[i] += W[i * x.size() + j] * x[j];
      if (l < 2) y[i] = std::tanh(y[i]);
    }
    x = y;
  }
  auto c = [](double v, double m) { return std::max(-m, std::min(m, v)); };
  const double vm = p.shape.v_max, om = p.shape.omega_max;
  return {c(vm * x[0], vm), c(vm * x[1], vm), c(vm * x[2], vm), c(om * x[3], om)};
}

ImitationSet synthetic_set(std::size_t k, const std::vector<std::size_t>& lengths, std::uint64_t seed) {
  ImitationSet s;
  s.k = k;
  s.episode_lengths = lengths;
  auto rng = make_rng(seed);
  for (std::size_t len : lengths) {
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t j = 0; j < k; ++j) s.latents.push_back(gaussian(rng));
      s.targets.push_back({uniform(rng, 0, 2), 0, 0, uniform(rng, -1.5, 1.5)});
    }
  }
  return s;
}

}  // namespace

TEST(Controller, ParameterCountMatchesTheFormula) {
  const ControllerShape s;
  EXPECT_EQ(s.parameter_count(), 4u * 16 * (8 + 16 + 1) + (24 * 32 + 32) + (32 * 16 + 16) + (16 * 4 + 4));
  EXPECT_EQ(s.parameter_count(), 2996u);
  EXPECT_EQ(flatten(controller_zero(s)).size(), s.parameter_count());
  EXPECT_EQ(tiny_shape().parameter_count(), 25u);
}

TEST(Controller, ZeroParametersHover) {
  const ControllerParams p = controller_zero({});
  const std::vector<double> z = {1, -2, 3, 0.5, 0, 0, 7, -1};
  const auto [a, st] = controller_step(p, z, LstmState::zeros(16));
  EXPECT_EQ(a.vx, 0.0);
  EXPECT_EQ(a.vy, 0.0);
  EXPECT_EQ(a.vz, 0.0);
  EXPECT_EQ(a.yaw_rate, 0.0);
  for (double v : st.h) EXPECT_EQ(v, 0.0);
}

TEST(Controller, PureAndRepeatable) {
  const ControllerParams p = random_controller({}, 3);
  const std::vector<double> z = {0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8};
  LstmState st = LstmState::zeros(16);
  st.h[0] = 0.3;
  const auto a = controller_step(p, z, st);
  const auto b = controller_step(p, z, st);
  EXPECT_EQ(a.first.vx, b.first.vx);
  EXPECT_EQ(a.first.yaw_rate, b.first.yaw_rate);
  EXPECT_EQ(a.second.h, b.second.h);
  EXPECT_EQ(st.h[0], 0.3);  // input state untouched
}

TEST(Controller, HandComputedSingleUnitCell) {
  const ControllerShape shape = tiny_shape();
  // W_{i,f,o,g}, U_{i,f,o,g}, b_{i,f,o,g}, mlp.0 (w0, w1, b), mlp.1 (w, b), mlp.2 (4 w, 4 b)
  const Genome g = {0.3, -0.2, 0.5, 0.8,  0.1, 0.4, -0.3, 0.2,  0.05, 0.1, -0.05, 0.0,
                    0.7, -0.4, 0.1,       1.2, -0.05,
                    0.5, 0.1, -0.3, 0.9,  0.2, 0.0, 0.0, -0.1};
  const double z = 0.5, h0 = 0.2, c0 = -0.1;
  const double i = sig(0.3 * z + 0.1 * h0 + 0.05);
  const double f = sig(-0.2 * z + 0.4 * h0 + 0.1);
  const double o = sig(0.5 * z - 0.3 * h0 - 0.05);
  const double gg = std::tanh(0.8 * z + 0.2 * h0 + 0.0);
  const double c1 = f * c0 + i * gg;
  const double h1 = o * std::tanh(c1);
  const double l1 = std::tanh(0.7 * z - 0.4 * h1 + 0.1);
  const double l2 = std::tanh(1.2 * l1 - 0.05);
  const double out[4] = {0.5 * l2 + 0.2, 0.1 * l2, -0.3 * l2, 0.9 * l2 - 0.1};

  LstmState st{{h0}, {c0}};
  const auto [a, next] = controller_step(unflatten(shape, g), std::vector<double>{z}, st);
  EXPECT_NEAR(next.c[0], c1, 1e-15);
  EXPECT_NEAR(next.h[0], h1, 1e-15);
  EXPECT_NEAR(a.vx, 2.0 * out[0], 1e-15);
  EXPECT_NEAR(a.vy, 2.0 * out[1], 1e-15);
  EXPECT_NEAR(a.vz, 2.0 * out[2], 1e-15);
  EXPECT_NEAR(a.yaw_rate, 1.5 * out[3], 1e-15);
}

TEST(Controller, MatchesTheReferenceCellOnRandomWeights) {
  const ControllerShape shape;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ControllerParams p = random_controller(shape, seed);
    LstmState a = LstmState::zeros(16), b = LstmState::zeros(16);
    auto rng = make_rng(seed, {1});
    for (int t = 0; t < 20; ++t) {
      std::vector<double> z(8);
      for (auto& v : z) v = gaussian(rng);
      const auto [act, next] = controller_step(p, z, a);
      a = next;
      const Action want = reference_step(p, z, b);
      ASSERT_NEAR(act.vx, want.vx, 1e-12);
      ASSERT_NEAR(act.vy, want.vy, 1e-12);
      ASSERT_NEAR(act.vz, want.vz, 1e-12);
      ASSERT_NEAR(act.yaw_rate, want.yaw_rate, 1e-12);
      for (std::size_t r = 0; r < 16; ++r) ASSERT_NEAR(a.h[r], b.h[r], 1e-12);
    }
  }
}

TEST(Controller, OutputsStayWithinBounds) {
  const ControllerParams p = random_controller({}, 8, 3.0);
  LstmState st = LstmState::zeros(16);
  auto rng = make_rng(2);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> z(8);
    for (auto& v : z) v = gaussian(rng, 5.0);
    const auto [a, next] = controller_step(p, z, st);
    st = next;
    ASSERT_LE(std::abs(a.vx), 2.0);
    ASSERT_LE(std::abs(a.vy), 2.0);
    ASSERT_LE(std::abs(a.vz), 2.0);
    ASSERT_LE(std::abs(a.yaw_rate), 1.5);
  }
}

TEST(Controller, WrongLatentSizeIsADimensionError) {
  EXPECT_THROW(controller_step(controller_zero({}), std::vector<double>(7), LstmState::zeros(16)), DimensionError);
}

TEST(Genome, RoundTripIsBitExact) {
  const ControllerParams p = random_controller({}, 5);
  EXPECT_TRUE(bit_equal(unflatten(p.shape, flatten(p)).params, p.params));
  EXPECT_THROW(unflatten(p.shape, Genome(10)), ContractError);
}

TEST(Genome, EveryIndexMapsToExactlyOneEntry) {
  const ControllerShape shape = tiny_shape();
  const std::size_t n = shape.parameter_count();
  std::vector<int> hits(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    Genome g(n, 0.0);
    g[j] = 1.0;
    const ControllerParams p = unflatten(shape, g);
    std::size_t changed = 0, flat = 0;
    for (const auto& e : p.params) {
      for (double v : e.value.data) {
        if (v != 0.0) {
          ++changed;
          ++hits[flat];
        }
        ++flat;
      }
    }
    EXPECT_EQ(changed, 1u) << j;
  }
  for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(hits[j], 1) << j;
}

TEST(Imitation, ZeroGenomeOnZeroActionsScoresZero) {
  ImitationSet s = synthetic_set(8, {5, 3}, 1);
  for (auto& a : s.targets) a = {};
  EXPECT_EQ(fitness_imitation(ControllerShape{}, Genome(2996, 0.0), s), 0.0);
}

TEST(Imitation, ZeroGenomeScoresMinusMeanSquaredTarget) {
  const ImitationSet s = synthetic_set(8, {4, 6}, 2);
  double acc = 0;
  for (const auto& a : s.targets) acc += a.vx * a.vx + a.yaw_rate * a.yaw_rate;
  EXPECT_NEAR(fitness_imitation(ControllerShape{}, Genome(2996, 0.0), s), -acc / (4.0 * 10), 1e-15);
}

TEST(Imitation, TinyEpisodeMatchesHandRolledForwardPass) {
  const ControllerShape shape;
  const ControllerParams p = random_controller(shape, 4);
  const ImitationSet s = synthetic_set(8, {3}, 7);
  LstmState st = LstmState::zeros(16);
  double err = 0;
  for (std::size_t t = 0; t < 3; ++t) {
    const std::vector<double> z(s.latents.begin() + static_cast<long>(t * 8), s.latents.begin() + static_cast<long>(t * 8 + 8));
    const Action a = reference_step(p, z, st);
    const Action& e = s.targets[t];
    err += (a.vx - e.vx) * (a.vx - e.vx) + a.vy * a.vy + a.vz * a.vz + (a.yaw_rate - e.yaw_rate) * (a.yaw_rate - e.yaw_rate);
  }
  EXPECT_NEAR(fitness_imitation(shape, flatten(p), s), -err / 12.0, 1e-14);
}

TEST(Imitation, InvariantToEpisodeOrder) {
  const ControllerShape shape;
  const Genome g = flatten(random_controller(shape, 6));
  const ImitationSet s = synthetic_set(8, {4, 7, 2}, 3);
  // Reverse the episode order.
  ImitationSet r;
  r.k = 8;
  std::vector<std::size_t> starts;
  std::size_t acc = 0;
  for (std::size_t len : s.episode_lengths) {
    starts.push_back(acc);
    acc += len;
  }
  for (std::size_t e = s.episode_lengths.size(); e-- > 0;) {
    r.episode_lengths.push_back(s.episode_lengths[e]);
    for (std::size_t t = 0; t < s.episode_lengths[e]; ++t) {
      const std::size_t row = starts[e] + t;
      r.latents.insert(r.latents.end(), s.latents.begin() + static_cast<long>(row * 8),
                       s.latents.begin() + static_cast<long>(row * 8 + 8));
      r.targets.push_back(s.targets[row]);
    }
  }
  EXPECT_NEAR(fitness_imitation(shape, g, s), fitness_imitation(shape, g, r), 1e-15);
}

TEST(Imitation, EmptyOrMismatchedInputsRejected) {
  ImitationSet empty;
  empty.k = 8;
  EXPECT_THROW(fitness_imitation(ControllerShape{}, Genome(2996), empty), ContractError);
  EXPECT_THROW(fitness_imitation(ControllerShape{}, Genome(5), synthetic_set(8, {2}, 0)), ContractError);
  const VaeParams vae = vae_init(64, 8, {16}, 0);
  Dataset d;
  EXPECT_THROW(fitness_imitation(ControllerShape{}, Genome(2996), vae, d), ContractError);
}

TEST(Reward, ZeroGenomeHovers) {
  const VaeParams vae = vae_init(64, 8, {16}, 0);
  RewardOptions o;
  o.max_steps = 50;
  EXPECT_EQ(fitness_reward(ControllerShape{}, Genome(2996, 0.0), vae, {1, 2}, o), 0.0);
}

TEST(Reward, DuplicatedSeedsDoNotChangeTheMean) {
  const VaeParams vae = vae_init(64, 8, {16}, 0);
  const Genome g = flatten(random_controller({}, 1, 0.3));
  RewardOptions o;
  o.max_steps = 100;
  EXPECT_DOUBLE_EQ(fitness_reward(ControllerShape{}, g, vae, {5}, o), fitness_reward(ControllerShape{}, g, vae, {5, 5}, o));
  EXPECT_THROW(fitness_reward(ControllerShape{}, g, vae, {}, o), ContractError);
}

TEST(Reward, ForwardFlyingControllerBeatsHovering) {
  // Output bias alone: vx = v_max * tanh-free 0.75 = 1.5 m/s straight ahead.
  const ControllerShape shape;
  ControllerParams p = controller_zero(shape);
  p.params.at("mlp.2.bias")[0] = 0.75;
  const VaeParams vae = vae_init(64, 8, {16}, 0);
  RewardOptions o;
  o.max_steps = 200;
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 10; ++s) seeds.push_back(s);
  EXPECT_GT(fitness_reward(shape, flatten(p), vae, seeds, o), fitness_reward(shape, Genome(2996, 0.0), vae, seeds, o));
}

TEST(Evolve, ConfigValidation) {
  EvolutionConfig c;
  c.population = 1;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.elites = c.population;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.mutation_sigma = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.generations = 0;
  EXPECT_THROW(validate(c), ConfigError);
  EXPECT_NO_THROW(validate(EvolutionConfig{}));
}

TEST(Evolve, SingleGenerationReturnsTheBetterInitialGenome) {
  EvolutionConfig c;
  c.population = 2;
  c.elites = 1;
  c.generations = 1;
  c.seed = 4;
  std::vector<std::pair<double, Genome>> seen;
  const auto r = evolve(c, 5, [&](std::span<const double> g, std::size_t, std::size_t) {
    const double f = g[0] + g[1];
    seen.push_back({f, Genome(g.begin(), g.end())});
    return f;
  });
  ASSERT_EQ(seen.size(), 2u);
  const auto& best = seen[0].first >= seen[1].first ? seen[0] : seen[1];
  EXPECT_EQ(r.best_fitness, best.first);
  EXPECT_EQ(r.best, best.second);
}

TEST(Evolve, TiesGoToTheLowerIndex) {
  EvolutionConfig c;
  c.population = 6;
  c.elites = 2;
  c.generations = 3;
  Genome first;
  const auto r = evolve(c, 4, [&](std::span<const double> g, std::size_t gen, std::size_t idx) {
    if (gen == 0 && idx == 0) first.assign(g.begin(), g.end());
    return 1.0;
  });
  EXPECT_EQ(r.best, first);
}

TEST(Evolve, BestSoFarNeverDecreasesAndRunsAreReproducible) {
  EvolutionConfig c;
  c.population = 16;
  c.elites = 4;
  c.generations = 40;
  c.seed = 9;
  auto f = [](std::span<const double> g, std::size_t, std::size_t) {
    double acc = 0;
    for (std::size_t i = 0; i < g.size(); ++i) acc -= std::pow(g[i] - std::sin(static_cast<double>(i)), 2);
    return acc;
  };
  const auto a = evolve(c, 12, f);
  const auto b = evolve(c, 12, f);
  ASSERT_EQ(a.history.size(), 40u);
  for (std::size_t g = 1; g < a.history.size(); ++g) EXPECT_GE(a.history[g].best, a.history[g - 1].best);
  EXPECT_EQ(a.best, b.best);
  EXPECT_GT(a.history.back().best, a.history.front().best);
}

TEST(Evolve, SphereObjectiveConverges) {
  // Init ~ N(0, 0.1^2) per coordinate, so the initial best is near -dim * 0.01.
  EvolutionConfig c;
  c.generations = 50;
  const std::size_t dim = 10;
  const auto r = evolve(c, dim, [](std::span<const double> g, std::size_t, std::size_t) {
    double acc = 0;
    for (double v : g) acc -= v * v;
    return acc;
  });
  EXPECT_LT(r.history.front().best, -0.01);
  EXPECT_GT(r.best_fitness, -0.01);
}

TEST(Evolve, NonFiniteFitnessNamesTheGenome) {
  EvolutionConfig c;
  c.population = 4;
  c.elites = 1;
  try {
    evolve(c, 3, [](std::span<const double>, std::size_t gen, std::size_t idx) {
      return gen == 1 && idx == 2 ? std::nan("") : 0.0;
    });
    FAIL() << "expected an EvolutionError";
  } catch (const EvolutionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("genome 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("generation 1"), std::string::npos) << msg;
  }
}

TEST(Evolve, HistoryCsvHasOneRowPerGeneration) {
  const std::string csv = history_csv({{-1.0, -2.0}, {-0.5, -1.5}});
  EXPECT_EQ(csv, "generation,best,mean\n0,-1,-2\n1,-0.5,-1.5\n");
}

TEST(Rollout, ZeroControllerHoversUntilTheCap) {
  const VaeParams vae = vae_init(64, 8, {16}, 0);
  const auto r = rollout(spawn_fake_world(2, 3), vae, controller_zero({}), 40);
  EXPECT_EQ(r.trace.size(), 40u);
  EXPECT_EQ(r.odometer(), 0.0);
  EXPECT_FALSE(r.crashed());
}

TEST(Rollout, DeterministicTraces) {
  const VaeParams vae = vae_init(64, 8, {16}, 1);
  const ControllerParams p = random_controller({}, 2, 0.3);
  const WorldSpec w = spawn_fake_world(3, 5);
  const auto a = rollout(w, vae, p, 300);
  const auto b = rollout(w, vae, p, 300);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t t = 0; t < a.trace.size(); ++t) {
    ASSERT_EQ(a.trace[t].state.position.x, b.trace[t].state.position.x);
    ASSERT_EQ(a.trace[t].action.yaw_rate, b.trace[t].action.yaw_rate);
  }
  EXPECT_EQ(a.odometer(), b.odometer());
}

TEST(Rollout, WorldKindMustMatchThePerception) {
  const VaeParams vae = vae_init(64, 8, {16}, 1);
  EXPECT_THROW(rollout(spawn_real_world(0, 0.2, false), vae, controller_zero({}), 5), ContractError);
}
