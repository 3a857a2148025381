#pragma once

// Perception swap: a fresh encoder learns to map real-world observations to
// the latent codes the frozen VAE would produce for a matched minimal fake
// scene, so the frozen controller keeps "seeing" gates.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lcl/nn.hpp"
#include "lcl/vae.hpp"
#include "lcl/world.hpp"

namespace lcl {

struct CheatEncoderParams {
  std::size_t width = 0;
  std::size_t k = 0;
  std::vector<std::size_t> hidden;
  ParamSet params;

  DenseStack stack() const;  // "cheat": 2W -> hidden... -> k
};

CheatEncoderParams cheat_init(std::size_t width, std::size_t k, const std::vector<std::size_t>& hidden,
                              std::uint64_t seed);

std::vector<double> cheat_encode(const CheatEncoderParams& p, const Observation& obs);

enum class PairMode { gates_visible, virtual_gate };
PairMode parse_pair_mode(const std::string& text);
std::string to_string(PairMode mode);

struct PairedSample {
  Observation real_obs;
  std::vector<double> target_mu;
};

struct PairOptions {
  SimParams sim;
  double clutter_density = 0.4;
};

/// The minimal fake scene for a pose: only `gate`, no walls within view.
WorldSpec matched_fake_scene(const Gate& gate, const DroneState& pose);

/// n_poses collision-free random poses in seeded real worlds, each paired
/// with the frozen-VAE mean of its matched fake scene.
std::vector<PairedSample> build_pairs(std::uint64_t real_seed, std::size_t n_poses, const VaeParams& vae,
                                      PairMode mode, const PairOptions& opts = {});

struct CheatTrainConfig {
  std::size_t epochs = 200;
  std::size_t batch = 32;
  double lr = 1e-3;
  std::vector<std::size_t> hidden = {128, 64};
  std::uint64_t seed = 0;
};

struct CheatTrainResult {
  CheatEncoderParams params;
  std::vector<double> loss_history;
  std::string vae_digest_before, vae_digest_after;
  std::string controller_digest_before, controller_digest_after;
};

/// Minibatch Adam on mean ||cheat_encode(real_obs) - target_mu||^2. The
/// frozen sets are only digested, before and after.
CheatTrainResult train_cheat(const std::vector<PairedSample>& pairs, const ParamSet& frozen_vae,
                             const ParamSet& frozen_controller, const CheatTrainConfig& cfg);

/// Mean squared latent error per pair (sum over k, mean over pairs).
double cheat_loss(const CheatEncoderParams& p, const std::vector<PairedSample>& pairs);

std::string encode_pairs(const std::vector<PairedSample>& pairs, const nlohmann::json& meta);
std::vector<PairedSample> decode_pairs(std::string_view bytes, nlohmann::json* meta = nullptr);

}  // namespace lcl
