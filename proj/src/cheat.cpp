#include "lcl/cheat.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "lcl/container.hpp"
#include "lcl/digest.hpp"
#include "lcl/errors.hpp"
#include "lcl/rng.hpp"

namespace lcl {

DenseStack CheatEncoderParams::stack() const {
  DenseStack s{"cheat", {2 * width}, Activation::tanh, Activation::identity};
  s.sizes.insert(s.sizes.end(), hidden.begin(), hidden.end());
  s.sizes.push_back(k);
  return s;
}

CheatEncoderParams cheat_init(std::size_t width, std::size_t k, const std::vector<std::size_t>& hidden,
                              std::uint64_t seed) {
  if (width < 1 || k < 1) throw ConfigError("cheat encoder: width and k must be >= 1");
  CheatEncoderParams p{width, k, hidden, {}};
  Rng rng = make_rng(seed, {0xc4ea7});
  init_dense(p.params, p.stack(), rng);
  return p;
}

std::vector<double> cheat_encode(const CheatEncoderParams& p, const Observation& obs) {
  if (obs.width() != p.width) {
    throw DimensionError("cheat_encode: observation width " + std::to_string(obs.width()) + ", encoder expects " +
                         std::to_string(p.width));
  }
  return dense_eval(p.params, p.stack(), observation_features(obs));
}

PairMode parse_pair_mode(const std::string& text) {
  if (text == "gates_visible") return PairMode::gates_visible;
  if (text == "virtual_gate") return PairMode::virtual_gate;
  throw ConfigError("unknown pair mode '" + text + "' (expected gates_visible or virtual_gate)");
}

std::string to_string(PairMode mode) { return mode == PairMode::gates_visible ? "gates_visible" : "virtual_gate"; }

WorldSpec matched_fake_scene(const Gate& gate, const DroneState& pose) {
  // Walls far beyond any sensing range, so only the gate is visible.
  constexpr double kFar = 1000.0;
  WorldSpec w;
  w.kind = WorldKind::fake;
  w.bounds = {pose.position.x - kFar, pose.position.y - kFar, pose.position.x + kFar, pose.position.y + kFar};
  w.gates = {gate};
  w.start = {pose.position, pose.yaw};
  return w;
}

std::vector<PairedSample> build_pairs(std::uint64_t real_seed, std::size_t n_poses, const VaeParams& vae,
                                      PairMode mode, const PairOptions& opts) {
  if (n_poses < 1) throw ContractError("build_pairs: n_poses must be >= 1");
  const SimParams& sim = opts.sim;
  const std::size_t cap = 10 * n_poses;
  std::size_t rejected = 0;
  std::vector<PairedSample> pairs;
  pairs.reserve(n_poses);
  for (std::size_t i = 0; i < n_poses; ++i) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      Rng rng = make_rng(real_seed, {i, attempt});
      WorldSpec world = spawn_real_world(rng(), opts.clutter_density, false, sim);
      const double m = sim.collision_radius + 0.1;
      DroneState s;
      s.position = {uniform(rng, world.bounds.min_x + m, world.bounds.max_x - m),
                    uniform(rng, world.bounds.min_y + m, world.bounds.max_y - m), sim.cruise_altitude};
      s.yaw = uniform(rng, -std::numbers::pi, std::numbers::pi);
      std::optional<Gate> gate;
      if (!in_collision(world, s.position.x, s.position.y, sim)) gate = virtual_gate(world, s, sim);
      if (!gate) {
        if (++rejected > cap) {
          throw GenerationError("build_pairs: more than " + std::to_string(cap) + " poses without a reachable gate");
        }
        continue;
      }
      if (mode == PairMode::gates_visible) world.gates = {*gate};
      const WorldSpec fake = matched_fake_scene(*gate, s);
      pairs.push_back({render_observation(world, s, sim), encode(vae, render_observation(fake, s, sim)).mu});
      break;
    }
  }
  return pairs;
}

double cheat_loss(const CheatEncoderParams& p, const std::vector<PairedSample>& pairs) {
  if (pairs.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& pr : pairs) {
    const auto y = cheat_encode(p, pr.real_obs);
    for (std::size_t i = 0; i < y.size(); ++i) acc += (y[i] - pr.target_mu[i]) * (y[i] - pr.target_mu[i]);
  }
  return acc / static_cast<double>(pairs.size());
}

CheatTrainResult train_cheat(const std::vector<PairedSample>& pairs, const ParamSet& frozen_vae,
                             const ParamSet& frozen_controller, const CheatTrainConfig& cfg) {
  if (pairs.empty()) throw ContractError("train_cheat: no training pairs");
  if (cfg.batch < 1) throw ConfigError("train_cheat: batch must be >= 1");
  CheatTrainResult r;
  r.vae_digest_before = params_digest(frozen_vae);
  r.controller_digest_before = params_digest(frozen_controller);

  const std::size_t k = pairs.front().target_mu.size();
  const std::size_t width = pairs.front().real_obs.width();
  std::vector<std::vector<double>> features;
  features.reserve(pairs.size());
  for (const auto& pr : pairs) {
    if (pr.target_mu.size() != k || pr.real_obs.width() != width) {
      throw DimensionError("train_cheat: pairs disagree on width or latent size");
    }
    features.push_back(observation_features(pr.real_obs));
  }
  r.params = cheat_init(width, k, cfg.hidden, cfg.seed);
  const DenseStack stack = r.params.stack();

  const AdamConfig adam{cfg.lr};
  AdamState state;
  std::size_t t = 0;
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = make_rng(cfg.seed, {0x5c0f, epoch});
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch);
      GradMap grads;
      for (std::size_t i = b0; i < b1; ++i) {
        const auto& f = features[order[i]];
        Tape tape;
        const Var x = tape.constant(Tensor::vector(f));
        const Var y = dense_forward(tape, r.params.params, stack, x);
        const Var loss =
            tape.scale(tape.mse(y, tape.constant(Tensor::vector(pairs[order[i]].target_mu))), static_cast<double>(k));
        epoch_loss += tape.value(loss)[0];
        tape.backward_into(loss, grads);
      }
      scale(grads, 1.0 / static_cast<double>(b1 - b0));
      adam_step(r.params.params, grads, adam, state, ++t);
    }
    r.loss_history.push_back(epoch_loss / static_cast<double>(order.size()));
  }

  r.vae_digest_after = params_digest(frozen_vae);
  r.controller_digest_after = params_digest(frozen_controller);
  if (r.vae_digest_after != r.vae_digest_before || r.controller_digest_after != r.controller_digest_before) {
    throw FrozenViolationError("train_cheat: frozen VAE or controller parameters changed during training");
  }
  return r;
}

// Records: real.class [N x W], real.depth [N x W], target_mu [N x k].
std::string encode_pairs(const std::vector<PairedSample>& pairs, const nlohmann::json& meta) {
  const std::size_t n = pairs.size();
  const std::size_t w = n ? pairs.front().real_obs.width() : 0;
  const std::size_t k = n ? pairs.front().target_mu.size() : 0;
  Tensor cls = Tensor::zeros({n, w}), depth = Tensor::zeros({n, w}), mu = Tensor::zeros({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pr = pairs[i];
    if (pr.real_obs.width() != w || pr.target_mu.size() != k) throw ContractError("encode_pairs: ragged pairs");
    for (std::size_t j = 0; j < w; ++j) {
      cls[i * w + j] = static_cast<double>(pr.real_obs.cls[j]);
      depth[i * w + j] = pr.real_obs.depth[j];
    }
    std::copy(pr.target_mu.begin(), pr.target_mu.end(), mu.data.begin() + static_cast<std::ptrdiff_t>(i * k));
  }
  Container c;
  c.records = {{"real.class", std::move(cls)}, {"real.depth", std::move(depth)}, {"target_mu", std::move(mu)}};
  c.metadata = meta;
  c.metadata["format"] = "lcl-pairs";
  c.metadata["pairs_version"] = 1;
  c.metadata["pairs"] = n;
  c.metadata["width"] = w;
  c.metadata["k"] = k;
  return encode_container(c);
}

std::vector<PairedSample> decode_pairs(std::string_view bytes, nlohmann::json* meta) {
  const Container c = decode_container(bytes);
  std::size_t n = 0, w = 0, k = 0;
  try {
    if (c.metadata.at("format").get<std::string>() != "lcl-pairs") throw FormatError("manifest: not a pairs container");
    if (c.metadata.at("pairs_version").get<int>() != 1) throw FormatError("manifest: unsupported pairs version");
    n = c.metadata.at("pairs").get<std::size_t>();
    w = c.metadata.at("width").get<std::size_t>();
    k = c.metadata.at("k").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  const Tensor& cls = c.record("real.class");
  const Tensor& depth = c.record("real.depth");
  const Tensor& mu = c.record("target_mu");
  if (cls.dims != Shape{n, w} || depth.dims != Shape{n, w} || mu.dims != Shape{n, k}) {
    throw IntegrityError("pairs: record shapes disagree with manifest");
  }
  std::vector<PairedSample> pairs(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& pr = pairs[i];
    pr.real_obs.cls.resize(w);
    pr.real_obs.depth.resize(w);
    for (std::size_t j = 0; j < w; ++j) {
      const double v = cls[i * w + j];
      if (v != 0.0 && v != 1.0 && v != 2.0) throw IntegrityError("real.class: invalid class value");
      pr.real_obs.cls[j] = static_cast<Cell>(static_cast<int>(v));
      pr.real_obs.depth[j] = depth[i * w + j];
    }
    pr.target_mu.assign(mu.data.begin() + static_cast<std::ptrdiff_t>(i * k),
                        mu.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
  }
  if (meta) *meta = c.metadata;
  return pairs;
}

}  // namespace lcl
