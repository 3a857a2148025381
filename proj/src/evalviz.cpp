#include "lcl/evalviz.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "lcl/container.hpp"
#include "lcl/errors.hpp"
#include "lcl/rng.hpp"

namespace lcl {

DenseStack BaselineParams::stack() const {
  DenseStack s{"baseline", {2 * width}, Activation::tanh, Activation::identity};
  s.sizes.insert(s.sizes.end(), hidden.begin(), hidden.end());
  s.sizes.push_back(4);
  return s;
}

BaselineParams baseline_init(std::size_t width, const std::vector<std::size_t>& hidden, std::uint64_t seed) {
  if (width < 1) throw ConfigError("baseline: width must be >= 1");
  BaselineParams p{width, hidden, {}};
  Rng rng = make_rng(seed, {0xba5e});
  init_dense(p.params, p.stack(), rng);
  return p;
}

Action baseline_act(const BaselineParams& p, const Observation& obs, const SimParams& sim) {
  if (obs.width() != p.width) throw DimensionError("baseline: observation width mismatch");
  const auto y = dense_eval(p.params, p.stack(), observation_features(obs));
  return clamp_action({y[0], y[1], y[2], y[3]}, sim);
}

BaselineTrainResult train_baseline(const Dataset& real, const BaselineTrainConfig& cfg) {
  if (real.world_kind != WorldKind::real) throw ContractError("train_baseline: needs a real-world dataset");
  if (real.total_steps() == 0) throw ContractError("train_baseline: empty dataset");
  if (cfg.batch < 1) throw ConfigError("train_baseline: batch must be >= 1");
  std::vector<std::vector<double>> x;
  std::vector<std::vector<double>> y;
  for (const auto& ep : real.episodes) {
    for (const auto& st : ep) {
      x.push_back(observation_features(st.observation));
      const Action& a = st.expert_action;
      y.push_back({a.vx, a.vy, a.vz, a.yaw_rate});
    }
  }
  const std::size_t width = real.episodes.front().front().observation.width();
  BaselineTrainResult r{baseline_init(width, cfg.hidden, cfg.seed), {}};
  const DenseStack stack = r.params.stack();
  const AdamConfig adam{cfg.lr};
  AdamState state;
  std::size_t t = 0;
  std::vector<std::size_t> order(x.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = make_rng(cfg.seed, {0xb7a1, epoch});
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch);
      GradMap grads;
      for (std::size_t i = b0; i < b1; ++i) {
        Tape tape;
        const Var out = dense_forward(tape, r.params.params, stack, tape.constant(Tensor::vector(x[order[i]])));
        const Var loss = tape.mse(out, tape.constant(Tensor::vector(y[order[i]])));
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

Pipeline parse_pipeline(const std::string& text) {
  if (text == "cheat") return Pipeline::cheat;
  if (text == "baseline") return Pipeline::baseline;
  if (text == "random") return Pipeline::random;
  if (text == "zero") return Pipeline::zero;
  throw ConfigError("unknown pipeline '" + text + "' (expected cheat, baseline, random or zero)");
}

std::string to_string(Pipeline p) {
  switch (p) {
    case Pipeline::cheat: return "cheat";
    case Pipeline::baseline: return "baseline";
    case Pipeline::random: return "random";
    case Pipeline::zero: return "zero";
  }
  return "?";
}

namespace {

void require_models(Pipeline pipeline, const EvalModels& m) {
  if (pipeline == Pipeline::cheat && (!m.cheat || !m.controller)) {
    throw ContractError("eval: the cheat pipeline needs a cheat encoder and a controller");
  }
  if (pipeline == Pipeline::baseline && !m.baseline) throw ContractError("eval: the baseline pipeline needs a baseline");
}

template <class Act>
RolloutResult reactive_loop(const WorldSpec& world, const EvalOptions& opts, Act&& act) {
  RolloutResult r;
  DroneState s = initial_state(world);
  for (std::size_t t = 0; t < opts.max_steps && !s.crashed; ++t) {
    RolloutStep step{s, render_observation(world, s, opts.sim), {}, {}};
    step.action = act(step.observation);
    s = step_dynamics(world, s, step.action, opts.sim.dt, opts.sim);
    r.trace.push_back(std::move(step));
  }
  r.final_state = s;
  return r;
}

}  // namespace

RolloutResult run_pipeline_episode(Pipeline pipeline, const EvalModels& models, const WorldSpec& world,
                                   const EvalOptions& opts) {
  require_models(pipeline, models);
  if (world.kind != WorldKind::real) throw ContractError("eval: episodes run in real worlds");
  switch (pipeline) {
    case Pipeline::cheat:
      return rollout(world, *models.cheat, *models.controller, opts.max_steps, opts.sim);
    case Pipeline::baseline:
      return reactive_loop(world, opts, [&](const Observation& o) { return baseline_act(*models.baseline, o, opts.sim); });
    case Pipeline::random: {
      Rng rng = make_rng(world.seed, {0x4a4d});
      return reactive_loop(world, opts, [&](const Observation&) {
        Action a;
        a.vx = opts.v_nom;
        a.yaw_rate = uniform(rng, -opts.sim.omega_max, opts.sim.omega_max);
        return clamp_action(a, opts.sim);
      });
    }
    case Pipeline::zero:
      return reactive_loop(world, opts, [](const Observation&) { return Action{}; });
  }
  throw ContractError("eval: unknown pipeline");
}

std::vector<std::uint64_t> seed_suite(std::uint64_t base, std::size_t n) {
  std::vector<std::uint64_t> seeds(n);
  for (std::size_t i = 0; i < n; ++i) seeds[i] = base + i;
  return seeds;
}

EvalReport eval_mean_distance(Pipeline pipeline, const EvalModels& models, const std::vector<std::uint64_t>& seeds,
                              const EvalOptions& opts) {
  if (seeds.empty()) throw ContractError("eval: empty seed list");
  require_models(pipeline, models);
  EvalReport rep;
  rep.method = to_string(pipeline);
  rep.seeds = seeds;
  std::size_t crashes = 0;
  for (std::uint64_t seed : seeds) {
    const WorldSpec world = spawn_real_world(seed, opts.clutter_density, false, opts.sim);
    const RolloutResult r = run_pipeline_episode(pipeline, models, world, opts);
    rep.odometers.push_back(r.odometer());
    rep.crashed.push_back(r.crashed());
    crashes += r.crashed() ? 1 : 0;
  }
  rep.mean_distance =
      std::accumulate(rep.odometers.begin(), rep.odometers.end(), 0.0) / static_cast<double>(rep.odometers.size());
  rep.crash_rate = static_cast<double>(crashes) / static_cast<double>(seeds.size());
  rep.config = {{"clutter_density", opts.clutter_density}, {"max_steps", opts.max_steps}, {"dt", opts.sim.dt}};
  return rep;
}

ComparisonTable comparison_report(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ContractError("comparison_report: no reports");
  for (const auto& r : reports) {
    if (r.seeds != reports.front().seeds) {
      throw ContractError("comparison_report: method '" + r.method + "' was evaluated on a different seed list than '" +
                          reports.front().method + "'");
    }
  }
  std::vector<const EvalReport*> rows;
  for (const auto& r : reports) rows.push_back(&r);
  std::stable_sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->method < b->method; });

  ComparisonTable t;
  t.csv = "method,mean_distance_m,crash_rate,episodes\n";
  t.text = "method      mean distance before crash (m)  crash rate  episodes\n";
  char line[256];
  for (const auto* r : rows) {
    std::snprintf(line, sizeof line, "%s,%.17g,%.17g,%zu\n", r->method.c_str(), r->mean_distance, r->crash_rate,
                  r->episodes());
    t.csv += line;
    std::snprintf(line, sizeof line, "%-10s  %30.2f  %10.2f  %8zu\n", r->method.c_str(), r->mean_distance,
                  r->crash_rate, r->episodes());
    t.text += line;
  }
  return t;
}

std::vector<ReportRow> parse_report_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "method,mean_distance_m,crash_rate,episodes") {
    throw FormatError("report csv: unexpected header");
  }
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 4) throw FormatError("report csv: expected 4 fields in '" + line + "'");
    try {
      std::size_t used = 0;
      ReportRow r;
      r.method = f[0];
      r.mean_distance_m = std::stod(f[1], &used);
      if (used != f[1].size()) throw std::invalid_argument(f[1]);
      r.crash_rate = std::stod(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument(f[2]);
      r.episodes = std::stoul(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument(f[3]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw FormatError("report csv: malformed number in '" + line + "'");
    }
  }
  return rows;
}

std::uint8_t cell_gray(Cell cls, double depth) {
  static constexpr double kLevel[3] = {0.0, 255.0, 140.0};
  const double d = std::clamp(depth, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(d * kLevel[static_cast<int>(cls)]));
}

std::string belief_strip_pgm(const std::vector<RolloutStep>& trace, const CheatEncoderParams& cheat,
                             const VaeParams& vae, std::size_t stride, std::size_t band_height) {
  if (stride < 1) throw ContractError("belief strip: stride must be >= 1");
  if (band_height < 1) throw ContractError("belief strip: band height must be >= 1");
  if (trace.empty()) throw ContractError("belief strip: empty trace");
  const std::size_t w = trace.front().observation.width();
  const std::size_t tiles = (trace.size() + stride - 1) / stride;
  const std::size_t width = w * tiles, height = 2 * band_height;
  std::vector<std::uint8_t> px(width * height, 0);
  for (std::size_t t = 0; t < tiles; ++t) {
    const Observation& real = trace[t * stride].observation;
    if (real.width() != w) throw DimensionError("belief strip: mixed observation widths");
    const Reconstruction belief = decode(vae, cheat_encode(cheat, real));
    for (std::size_t j = 0; j < w; ++j) {
      const std::uint8_t top = cell_gray(real.cls[j], real.depth[j]);
      const auto level = static_cast<int>(std::lround(std::clamp(belief.cls[j], 0.0, 1.0) * 2.0));
      const std::uint8_t bottom = cell_gray(static_cast<Cell>(level), belief.depth[j]);
      for (std::size_t r = 0; r < band_height; ++r) {
        px[r * width + t * w + j] = top;
        px[(band_height + r) * width + t * w + j] = bottom;
      }
    }
  }
  char header[512];
  std::snprintf(header, sizeof header,
                "P5\n# belief strip: %zu tiles of %zu columns (every %zu steps); top %zu rows real observation, "
                "bottom %zu rows decoded belief; gray = round(depth * L[class]), L = {free 0, gate 255, wall 140}\n"
                "%zu %zu\n255\n",
                tiles, w, stride, band_height, band_height, width, height);
  std::string out(header);
  out.append(reinterpret_cast<const char*>(px.data()), px.size());
  return out;
}

StripGeometry render_belief_strip(const std::vector<RolloutStep>& trace, const CheatEncoderParams& cheat,
                                  const VaeParams& vae, std::size_t stride, const std::filesystem::path& path,
                                  std::size_t band_height) {
  const std::string bytes = belief_strip_pgm(trace, cheat, vae, stride, band_height);
  write_file(path, bytes);
  const std::size_t w = trace.front().observation.width();
  const std::size_t tiles = (trace.size() + stride - 1) / stride;
  return {w * tiles, 2 * band_height, tiles};
}

PgmImage parse_pgm(std::string_view bytes) {
  PgmImage img;
  std::size_t pos = 0;
  auto fail = [](const char* what) { throw FormatError(std::string("pgm: ") + what); };
  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        const std::size_t eol = bytes.find('\n', pos);
        if (eol == std::string_view::npos) fail("unterminated comment");
        if (!img.comment.empty()) img.comment += '\n';
        img.comment += std::string(bytes.substr(pos + 1, eol - pos - 1));
        pos = eol + 1;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> std::size_t {
    skip_space_and_comments();
    std::size_t v = 0, digits = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos++] - '0');
      ++digits;
    }
    if (digits == 0) fail("expected a number");
    return v;
  };
  if (bytes.substr(0, 2) != "P5") fail("missing P5 magic");
  pos = 2;
  img.width = number();
  img.height = number();
  if (number() != 255) fail("max value must be 255");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) fail("missing raster separator");
  ++pos;
  if (bytes.size() - pos != img.width * img.height) fail("raster size disagrees with header");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

}  // namespace lcl
