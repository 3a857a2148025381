#pragma once

#include <cstdint>
#include <vector>

#include "lcl/autodiff.hpp"
#include "lcl/expert.hpp"
#include "lcl/nn.hpp"
#include "lcl/world.hpp"

namespace lcl {

/// Dense variational autoencoder over scanline observations.
/// Encoder: 2W -> hidden... -> 2k (mu, logvar). Decoder: k -> reversed
/// hidden... -> 2W through a sigmoid (class channel, then depth channel).
struct VaeParams {
  ParamSet params;
  std::size_t width = 0;
  std::size_t k = 0;
  std::vector<std::size_t> hidden;

  DenseStack encoder() const;
  DenseStack decoder() const;
};

struct LatentCode {
  std::vector<double> mu;
  std::vector<double> logvar;
  std::vector<double> z;
};

/// Real-valued reconstruction; both channels lie in (0, 1).
struct Reconstruction {
  std::vector<double> cls;
  std::vector<double> depth;
};

VaeParams vae_init(std::size_t width, std::size_t k, const std::vector<std::size_t>& hidden,
                   std::uint64_t seed);

LatentCode encode(const VaeParams& p, const Observation& obs);
LatentCode encode_features(const VaeParams& p, std::span<const double> features);

/// z = mu + exp(logvar / 2) * eps.
std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> logvar,
                                   std::span<const double> eps);
Var reparameterize(Tape& tape, Var mu, Var logvar, Var eps);

Reconstruction decode(const VaeParams& p, std::span<const double> z);

/// Reconstruction MSE over both channels plus beta * KL, recorded on `tape`.
Var elbo_loss(Tape& tape, const VaeParams& p, const Observation& obs, std::span<const double> eps,
              double beta);
Var elbo_loss_features(Tape& tape, const VaeParams& p, std::span<const double> features,
                       std::span<const double> eps, double beta);

struct VaeTrainConfig {
  std::size_t epochs = 200;
  std::size_t batch = 32;
  double lr = 1e-3;
  double beta = 0.002;
  std::size_t k = 8;
  std::vector<std::size_t> hidden = {128, 64};
  std::uint64_t seed = 0;
};

struct VaeTrainResult {
  VaeParams params;
  std::vector<double> loss_history;  // mean training loss per epoch
};

VaeTrainResult train_vae(const Dataset& data, const VaeTrainConfig& cfg);

/// Mean reconstruction MSE on the depth channel, decoding the encoder mean.
double depth_reconstruction_mse(const VaeParams& p, const std::vector<Observation>& observations);

/// Spearman rank correlation (average ranks for ties). Needs >= 2 points;
/// returns 0 when either side is constant.
double spearman(std::span<const double> a, std::span<const double> b);

/// Smoothness proxy: over n_pairs random observation pairs, Spearman rho
/// between latent-mean distance and feature-space L2 distance.
double latent_smoothness(const VaeParams& p, const std::vector<Observation>& observations, std::size_t n_pairs,
                         std::uint64_t seed);

}  // namespace lcl
