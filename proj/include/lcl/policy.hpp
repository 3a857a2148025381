#pragma once

// Recurrent controller: a single LSTM cell over the latent code z, and a
// 3-layer MLP over [z; h] producing the (vx, vy, vz, yaw_rate) command.
// Trained without gradients by an elitist genetic algorithm.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lcl/expert.hpp"
#include "lcl/nn.hpp"
#include "lcl/vae.hpp"
#include "lcl/world.hpp"

namespace lcl {

struct ControllerShape {
  std::size_t k = 8;
  std::size_t h_dim = 16;
  std::size_t m1 = 32;
  std::size_t m2 = 16;
  double v_max = 2.0;
  double omega_max = 1.5;

  DenseStack mlp() const;
  /// Analytic parameter count: 4 h (k + h + 1) + MLP weights and biases.
  std::size_t parameter_count() const;
};

/// Tensors, in genome order: lstm.W_{i,f,o,g} [h x k], lstm.U_{i,f,o,g}
/// [h x h], lstm.b_{i,f,o,g} [h], then mlp.{0,1,2}.{weight,bias}.
struct ControllerParams {
  ControllerShape shape;
  ParamSet params;
};

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;

  static LstmState zeros(std::size_t h_dim) { return {std::vector<double>(h_dim), std::vector<double>(h_dim)}; }
};

ControllerParams controller_zero(const ControllerShape& shape);

/// Pure: returns the clamped command and the next recurrent state.
std::pair<Action, LstmState> controller_step(const ControllerParams& p, std::span<const double> z,
                                             const LstmState& st);

/// Same computation directly over a flat genome (no allocation beyond `st`).
Action controller_step_flat(const ControllerShape& shape, const double* genome, std::span<const double> z,
                            LstmState& st);

using Genome = std::vector<double>;

Genome flatten(const ControllerParams& p);
ControllerParams unflatten(const ControllerShape& shape, std::span<const double> genome);

/// Encoder means and expert targets laid out for repeated fitness calls.
struct ImitationSet {
  std::size_t k = 0;
  std::vector<double> latents;  // steps x k
  std::vector<Action> targets;
  std::vector<std::size_t> episode_lengths;

  std::size_t steps() const { return targets.size(); }
};

ImitationSet prepare_imitation(const VaeParams& vae, const Dataset& data);

/// -(mean squared action error over steps and the 4 components); teacher
/// forced, LSTM state reset at every episode start.
double fitness_imitation(const ControllerShape& shape, std::span<const double> genome, const ImitationSet& set);
double fitness_imitation(const ControllerShape& shape, std::span<const double> genome, const VaeParams& vae,
                         const Dataset& data);

struct RewardOptions {
  SimParams sim;
  std::size_t n_gates = 5;
  std::size_t max_steps = 600;
  double gate_bonus = 5.0;
};

/// Mean over fake worlds of (odometer + gate_bonus * gates passed).
double fitness_reward(const ControllerShape& shape, std::span<const double> genome, const VaeParams& vae,
                      const std::vector<std::uint64_t>& seeds, const RewardOptions& opts);

enum class FitnessKind { imitation, reward };
FitnessKind parse_fitness_kind(const std::string& text);
std::string to_string(FitnessKind kind);

struct EvolutionConfig {
  std::size_t population = 64;
  std::size_t elites = 8;
  double mutation_sigma = 0.02;
  double init_sigma = 0.1;
  std::size_t generations = 150;
  std::uint64_t seed = 0;
  FitnessKind fitness_kind = FitnessKind::imitation;
};

void validate(const EvolutionConfig& cfg);

/// (genome, generation, index within the generation) -> fitness, larger is better.
using FitnessFn = std::function<double(std::span<const double>, std::size_t, std::size_t)>;

struct GenerationStats {
  double best = 0.0;  // best so far
  double mean = 0.0;  // mean over the evaluated population
};

struct EvolutionResult {
  Genome best;
  double best_fitness = 0.0;
  std::vector<GenerationStats> history;
};

EvolutionResult evolve(const EvolutionConfig& cfg, std::size_t dim, const FitnessFn& fitness);

/// Evolution history as "generation,best,mean" CSV.
std::string history_csv(const std::vector<GenerationStats>& history);

struct CheatEncoderParams;

struct RolloutStep {
  DroneState state;  // before acting
  Observation observation;
  std::vector<double> z;
  Action action;
};

struct RolloutResult {
  std::vector<RolloutStep> trace;
  DroneState final_state;
  std::size_t gates_passed = 0;

  double odometer() const { return final_state.odometer; }
  bool crashed() const { return final_state.crashed; }
};

/// Closed loop in a fake world, perceiving through the VAE encoder mean.
RolloutResult rollout(const WorldSpec& world, const VaeParams& vae, const ControllerParams& ctrl,
                      std::size_t max_steps, const SimParams& sim = {});
/// Closed loop in a real world, perceiving through the cheat encoder.
RolloutResult rollout(const WorldSpec& world, const CheatEncoderParams& cheat, const ControllerParams& ctrl,
                      std::size_t max_steps, const SimParams& sim = {});

}  // namespace lcl
