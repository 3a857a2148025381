#include "lcl/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lcl/errors.hpp"
#include "lcl/rng.hpp"

namespace lcl {

DenseStack VaeParams::encoder() const {
  DenseStack s{"enc", {2 * width}, Activation::tanh, Activation::identity};
  s.sizes.insert(s.sizes.end(), hidden.begin(), hidden.end());
  s.sizes.push_back(2 * k);
  return s;
}

DenseStack VaeParams::decoder() const {
  DenseStack s{"dec", {k}, Activation::tanh, Activation::sigmoid};
  s.sizes.insert(s.sizes.end(), hidden.rbegin(), hidden.rend());
  s.sizes.push_back(2 * width);
  return s;
}

VaeParams vae_init(std::size_t width, std::size_t k, const std::vector<std::size_t>& hidden,
                   std::uint64_t seed) {
  if (k < 1) throw ConfigError("vae: latent dimension k must be >= 1");
  if (width < 1) throw ConfigError("vae: observation width must be >= 1");
  VaeParams p;
  p.width = width;
  p.k = k;
  p.hidden = hidden;
  Rng rng = make_rng(seed, {0x7ae});
  init_dense(p.params, p.encoder(), rng);
  init_dense(p.params, p.decoder(), rng);
  return p;
}

LatentCode encode_features(const VaeParams& p, std::span<const double> features) {
  if (features.size() != 2 * p.width) {
    throw DimensionError("encode: observation features of length " + std::to_string(features.size()) +
                         ", model expects " + std::to_string(2 * p.width));
  }
  const auto out = dense_eval(p.params, p.encoder(), features);
  LatentCode c;
  c.mu.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(p.k));
  c.logvar.assign(out.begin() + static_cast<std::ptrdiff_t>(p.k), out.end());
  c.z = c.mu;
  return c;
}

LatentCode encode(const VaeParams& p, const Observation& obs) {
  if (obs.width() != p.width) {
    throw DimensionError("encode: observation width " + std::to_string(obs.width()) +
                         ", model expects " + std::to_string(p.width));
  }
  return encode_features(p, observation_features(obs));
}

std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> logvar,
                                   std::span<const double> eps) {
  if (mu.size() != logvar.size() || mu.size() != eps.size()) {
    throw DimensionError("reparameterize: mu, logvar and eps lengths " + std::to_string(mu.size()) + ", " +
                         std::to_string(logvar.size()) + ", " + std::to_string(eps.size()) + " differ");
  }
  std::vector<double> z(mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = mu[i] + std::exp(0.5 * logvar[i]) * eps[i];
  return z;
}

Var reparameterize(Tape& tape, Var mu, Var logvar, Var eps) {
  const std::size_t n = tape.value(mu).size();
  if (tape.value(logvar).size() != n || tape.value(eps).size() != n) {
    throw DimensionError("reparameterize: mu, logvar and eps lengths differ");
  }
  const Var sigma = tape.activation(Activation::exp, tape.scale(logvar, 0.5));
  return tape.add(mu, tape.mul(sigma, eps));
}

Reconstruction decode(const VaeParams& p, std::span<const double> z) {
  if (z.size() != p.k) {
    throw DimensionError("decode: latent of length " + std::to_string(z.size()) + ", model expects " +
                         std::to_string(p.k));
  }
  const auto out = dense_eval(p.params, p.decoder(), z);
  Reconstruction r;
  r.cls.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(p.width));
  r.depth.assign(out.begin() + static_cast<std::ptrdiff_t>(p.width), out.end());
  return r;
}

Var elbo_loss_features(Tape& tape, const VaeParams& p, std::span<const double> features,
                       std::span<const double> eps, double beta) {
  if (features.size() != 2 * p.width) throw DimensionError("elbo_loss: observation width mismatch");
  if (eps.size() != p.k) throw DimensionError("elbo_loss: eps length mismatch");
  if (!(beta >= 0.0)) throw ContractError("elbo_loss: beta must be >= 0");
  const Var x = tape.constant(Tensor::vector({features.begin(), features.end()}));
  const Var stats = dense_forward(tape, p.params, p.encoder(), x);
  const Var mu = tape.slice(stats, 0, p.k);
  const Var logvar = tape.slice(stats, p.k, p.k);
  const Var z = reparameterize(tape, mu, logvar, tape.constant(Tensor::vector({eps.begin(), eps.end()})));
  const Var recon = dense_forward(tape, p.params, p.decoder(), z);
  const Var rec_loss = tape.mse(recon, x);
  if (beta == 0.0) return rec_loss;
  return tape.add(rec_loss, tape.scale(tape.gaussian_kl(mu, logvar), beta));
}

Var elbo_loss(Tape& tape, const VaeParams& p, const Observation& obs, std::span<const double> eps,
              double beta) {
  if (obs.width() != p.width) throw DimensionError("elbo_loss: observation width mismatch");
  const auto f = observation_features(obs);
  return elbo_loss_features(tape, p, f, eps, beta);
}

VaeTrainResult train_vae(const Dataset& data, const VaeTrainConfig& cfg) {
  if (data.world_kind != WorldKind::fake) throw ContractError("train_vae: the VAE trains on fake-world data only");
  if (data.total_steps() == 0) throw ContractError("train_vae: empty dataset");
  if (cfg.batch < 1) throw ConfigError("train_vae: batch must be >= 1");

  std::vector<std::vector<double>> features;
  features.reserve(data.total_steps());
  for (const auto& ep : data.episodes) {
    for (const auto& st : ep) features.push_back(observation_features(st.observation));
  }
  const std::size_t width = data.episodes.front().front().observation.width();
  VaeTrainResult r{vae_init(width, cfg.k, cfg.hidden, cfg.seed), {}};

  const AdamConfig adam{cfg.lr};
  AdamState state;
  std::size_t t = 0;
  std::vector<std::size_t> order(features.size());
  std::vector<double> eps(cfg.k);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = make_rng(cfg.seed, {0xe90c, epoch});
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch);
      GradMap grads;
      for (std::size_t i = b0; i < b1; ++i) {
        for (auto& e : eps) e = gaussian(rng);
        Tape tape;
        const Var loss = elbo_loss_features(tape, r.params, features[order[i]], eps, cfg.beta);
        epoch_loss += tape.value(loss)[0];
        tape.backward_into(loss, grads);
      }
      scale(grads, 1.0 / static_cast<double>(b1 - b0));
      adam_step(r.params.params, grads, adam, state, ++t);
    }
    r.loss_history.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return r;
}

double depth_reconstruction_mse(const VaeParams& p, const std::vector<Observation>& observations) {
  if (observations.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& obs : observations) {
    const auto code = encode(p, obs);
    const auto rec = decode(p, code.mu);
    for (std::size_t j = 0; j < p.width; ++j) {
      const double d = rec.depth[j] - obs.depth[j];
      acc += d * d;
    }
  }
  return acc / static_cast<double>(observations.size() * p.width);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = mean_rank;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("spearman: lengths differ");
  if (a.size() < 2) throw ContractError("spearman: needs at least two points");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double latent_smoothness(const VaeParams& p, const std::vector<Observation>& observations, std::size_t n_pairs,
                         std::uint64_t seed) {
  if (observations.size() < 2) throw ContractError("latent_smoothness: needs at least two observations");
  auto rng = make_rng(seed, {0x5300});
  std::uniform_int_distribution<std::size_t> pick(0, observations.size() - 1);
  std::vector<double> dx, dz;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    while (b == a) b = pick(rng);
    const auto fa = observation_features(observations[a]), fb = observation_features(observations[b]);
    const auto ma = encode(p, observations[a]).mu, mb = encode(p, observations[b]).mu;
    double sx = 0.0, sz = 0.0;
    for (std::size_t j = 0; j < fa.size(); ++j) sx += (fa[j] - fb[j]) * (fa[j] - fb[j]);
    for (std::size_t j = 0; j < ma.size(); ++j) sz += (ma[j] - mb[j]) * (ma[j] - mb[j]);
    dx.push_back(std::sqrt(sx));
    dz.push_back(std::sqrt(sz));
  }
  return spearman(dz, dx);
}

}  // namespace lcl
