#include "lcl/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <map>

#include "lcl/checkpoint.hpp"
#include "lcl/cheat.hpp"
#include "lcl/container.hpp"
#include "lcl/digest.hpp"
#include "lcl/errors.hpp"
#include "lcl/evalviz.hpp"
#include "lcl/expert.hpp"
#include "lcl/policy.hpp"
#include "lcl/rng.hpp"
#include "lcl/vae.hpp"

namespace lcl {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"gen-fake-data", "train-vae",   "gen-expert",     "train-policy",
                                                 "build-pairs",   "train-cheat", "gen-real-data",  "train-baseline",
                                                 "eval",          "viz"};
  return names;
}

SimParams sim_params(const RunConfig& cfg) {
  SimParams s;
  s.width = cfg.size("world.width");
  s.fov_deg = cfg.real("world.fov_deg");
  s.d_max = cfg.real("world.d_max");
  s.dt = cfg.real("world.dt");
  s.v_max = cfg.real("world.v_max");
  s.omega_max = cfg.real("world.omega_max");
  s.collision_radius = cfg.real("world.collision_radius");
  s.gate_half_width = cfg.real("world.gate_half_width");
  s.frame_thickness = cfg.real("world.frame_thickness");
  s.gate_spacing_min = cfg.real("world.gate_spacing_min");
  s.gate_spacing_max = cfg.real("world.gate_spacing_max");
  s.offset_max = cfg.real("world.gate_offset_max");
  s.gate_yaw_max_deg = cfg.real("world.gate_yaw_max_deg");
  s.corridor_half_width = cfg.real("world.corridor_half_width");
  s.corridor_end_margin = cfg.real("world.corridor_end_margin");
  s.room_size = cfg.real("world.room_size");
  s.d_gate = cfg.real("world.d_gate");
  return s;
}

namespace {

// Stream tags for per-stage seeds.
enum : std::uint64_t { kFakeData = 1, kVae, kExpert, kPolicy, kPairs, kCheat, kRealData, kBaseline };

struct Stage {
  const RunConfig& cfg;
  std::ostream& log;
  fs::path dir;
  std::string name;
  json inputs = json::object();
  json outputs = json::object();
  json metrics = json::object();

  std::uint64_t seed(std::uint64_t tag) const { return derive_seed(cfg.u64("seed"), {tag}); }

  fs::path input(const char* file, const char* producer) {
    const fs::path p = dir / file;
    if (!fs::exists(p)) {
      throw DependencyError("missing prerequisite '" + std::string(file) + "' (produced by '" + producer + "')");
    }
    inputs[file] = file_digest(p);
    return p;
  }

  fs::path output(const char* file) const { return dir / file; }

  void produced(const char* file) { outputs[file] = file_digest(dir / file); }

  void finish(const std::vector<std::string>& config_prefixes) {
    json summary = {{"stage", name},
                    {"inputs", inputs},
                    {"outputs", outputs},
                    {"metrics", metrics},
                    {"config", cfg.echo(config_prefixes)}};
    write_file(dir / (name + ".json"), summary.dump(2) + "\n");
    log << name << ": done";
    for (const auto& [k, v] : outputs.items()) log << "  " << k;
    log << std::endl;
  }
};

CollectOptions collect_options(const RunConfig& cfg) {
  CollectOptions o;
  o.sim = sim_params(cfg);
  o.expert.k_omega = cfg.real("expert.k_omega");
  o.expert.v_nom = cfg.real("expert.v_nom");
  o.n_gates = cfg.size("world.n_gates");
  o.clutter_density = cfg.real("world.clutter_density");
  o.yaw_noise = cfg.real("expert.yaw_noise");
  o.noise_correlation = cfg.real("expert.noise_correlation");
  return o;
}

ControllerShape controller_shape(const RunConfig& cfg, std::size_t k) {
  const auto mlp = cfg.sizes("policy.mlp");
  ControllerShape s;
  s.k = k;
  s.h_dim = cfg.size("policy.h_dim");
  s.m1 = mlp.at(0);
  s.m2 = mlp.at(1);
  s.v_max = cfg.real("world.v_max");
  s.omega_max = cfg.real("world.omega_max");
  return s;
}

EvalOptions eval_options(const RunConfig& cfg) {
  EvalOptions o;
  o.sim = sim_params(cfg);
  o.clutter_density = cfg.real("world.clutter_density");
  o.max_steps = cfg.size("eval.max_steps");
  o.v_nom = cfg.real("expert.v_nom");
  return o;
}

json loss_metrics(const std::vector<double>& h) {
  json m = {{"epochs", h.size()}, {"loss_history", h}};
  if (!h.empty()) {
    m["loss_first"] = h.front();
    m["loss_last"] = h.back();
    m["loss_ratio"] = h.back() / h.front();
  }
  return m;
}

const std::vector<std::string> kWorldKeys = {"seed", "world.", "expert."};

std::vector<std::string> with_world(std::vector<std::string> extra) {
  extra.insert(extra.begin(), kWorldKeys.begin(), kWorldKeys.end());
  return extra;
}

void gen_fake_data(Stage& st) {
  const RunConfig& cfg = st.cfg;
  CollectOptions o = collect_options(cfg);
  o.stride = cfg.size("fake.stride");
  Dataset d = collect_trajectories(WorldKind::fake, cfg.size("fake.episodes"), cfg.size("fake.max_steps"),
                                   st.seed(kFakeData), o);
  d = limit_steps(d, cfg.size("fake.observations"));
  write_dataset(d, st.output(artifact::fake_data));
  st.produced(artifact::fake_data);
  st.metrics = {{"episodes", d.manifest.episodes},
                {"steps", d.manifest.steps},
                {"rejected_episodes", d.manifest.rejected_episodes}};
  st.finish(with_world({"fake."}));
}

void train_vae_stage(Stage& st) {
  const RunConfig& cfg = st.cfg;
  const Dataset d = read_dataset(st.input(artifact::fake_data, "gen-fake-data"));
  VaeTrainConfig tc;
  tc.epochs = cfg.size("vae.epochs");
  tc.batch = cfg.size("vae.batch");
  tc.lr = cfg.real("vae.lr");
  tc.beta = cfg.real("vae.beta");
  tc.k = cfg.size("vae.k");
  tc.hidden = cfg.sizes("vae.hidden");
  tc.seed = st.seed(kVae);
  const VaeTrainResult r = train_vae(d, tc);

  std::vector<Observation> obs;
  for (const auto& ep : d.episodes) {
    for (const auto& s : ep) obs.push_back(s.observation);
  }
  const VaeParams untrained = vae_init(r.params.width, tc.k, tc.hidden, tc.seed);
  st.metrics = loss_metrics(r.loss_history);
  st.metrics["depth_mse_untrained"] = depth_reconstruction_mse(untrained, obs);
  st.metrics["depth_mse_trained"] = depth_reconstruction_mse(r.params, obs);
  st.metrics["latent_smoothness_spearman"] = latent_smoothness(r.params, obs, 100, tc.seed);

  save_checkpoint(st.output(artifact::vae), to_checkpoint(r.params, {{"config", cfg.echo({"seed", "vae."})},
                                                                      {"train_seed", tc.seed}}));
  st.produced(artifact::vae);
  st.finish({"seed", "vae."});
}

void gen_expert(Stage& st) {
  const RunConfig& cfg = st.cfg;
  CollectOptions o = collect_options(cfg);
  Dataset d = collect_trajectories(WorldKind::fake, cfg.size("policy.episodes"), cfg.size("policy.max_steps"),
                                   st.seed(kExpert), o);
  d = limit_steps(d, cfg.size("policy.steps"));
  write_dataset(d, st.output(artifact::expert_data));
  st.produced(artifact::expert_data);
  st.metrics = {{"episodes", d.manifest.episodes},
                {"steps", d.manifest.steps},
                {"rejected_episodes", d.manifest.rejected_episodes}};
  st.finish(with_world({"policy.episodes", "policy.max_steps", "policy.steps"}));
}

void train_policy(Stage& st) {
  const RunConfig& cfg = st.cfg;
  const VaeParams vae = vae_from(load_checkpoint(st.input(artifact::vae, "train-vae")));
  const Dataset d = read_dataset(st.input(artifact::expert_data, "gen-expert"));
  const ControllerShape shape = controller_shape(cfg, vae.k);

  EvolutionConfig ec;
  ec.population = cfg.size("policy.population");
  ec.elites = cfg.size("policy.elites");
  ec.mutation_sigma = cfg.real("policy.mutation_sigma");
  ec.init_sigma = cfg.real("policy.init_sigma");
  ec.generations = cfg.size("policy.generations");
  ec.seed = st.seed(kPolicy);
  ec.fitness_kind = parse_fitness_kind(cfg.text("policy.fitness"));

  const ImitationSet set = prepare_imitation(vae, d);
  const Genome zero(shape.parameter_count(), 0.0);
  const double zero_imitation = fitness_imitation(shape, zero, set);

  FitnessFn fitness;
  if (ec.fitness_kind == FitnessKind::imitation) {
    fitness = [&](std::span<const double> g, std::size_t, std::size_t) { return fitness_imitation(shape, g, set); };
  } else {
    RewardOptions ro;
    ro.sim = sim_params(cfg);
    ro.n_gates = cfg.size("world.n_gates");
    ro.max_steps = cfg.size("policy.reward_max_steps");
    ro.gate_bonus = cfg.real("policy.gate_bonus");
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < cfg.size("policy.reward_worlds"); ++i) seeds.push_back(derive_seed(ec.seed, {0x5eed, i}));
    fitness = [&, ro, seeds](std::span<const double> g, std::size_t, std::size_t) {
      return fitness_reward(shape, g, vae, seeds, ro);
    };
  }
  const EvolutionResult r = evolve(ec, shape.parameter_count(), fitness);
  const ControllerParams ctrl = unflatten(shape, r.best);
  const double best_imitation = fitness_imitation(shape, r.best, set);

  write_file(st.output(artifact::evolution), history_csv(r.history));
  save_checkpoint(st.output(artifact::controller),
                  to_checkpoint(ctrl, {{"config", cfg.echo({"seed", "policy."})},
                                       {"train_seed", ec.seed},
                                       {"best_fitness", r.best_fitness},
                                       {"vae_digest", params_digest(vae.params)}}));
  st.produced(artifact::evolution);
  st.produced(artifact::controller);
  st.metrics = {{"fitness_kind", to_string(ec.fitness_kind)},
                {"generations", r.history.size()},
                {"best_fitness", r.best_fitness},
                {"zero_genome_imitation_error", -zero_imitation},
                {"best_imitation_error", -best_imitation},
                {"imitation_error_ratio", best_imitation / zero_imitation}};
  st.finish({"seed", "policy."});
}

void build_pairs_stage(Stage& st) {
  const RunConfig& cfg = st.cfg;
  const VaeParams vae = vae_from(load_checkpoint(st.input(artifact::vae, "train-vae")));
  const PairMode mode = parse_pair_mode(cfg.text("cheat.mode"));
  PairOptions po;
  po.sim = sim_params(cfg);
  po.clutter_density = cfg.real("world.clutter_density");
  const std::uint64_t seed = st.seed(kPairs);
  const auto pairs = build_pairs(seed, cfg.size("cheat.poses"), vae, mode, po);
  write_file(st.output(artifact::pairs), encode_pairs(pairs, {{"mode", to_string(mode)}, {"real_seed", seed}}));
  st.produced(artifact::pairs);
  st.metrics = {{"pairs", pairs.size()}, {"mode", to_string(mode)}};
  st.finish(with_world({"cheat.mode", "cheat.poses"}));
}

void train_cheat_stage(Stage& st) {
  const RunConfig& cfg = st.cfg;
  const auto pairs = decode_pairs(read_file(st.input(artifact::pairs, "build-pairs")));
  const VaeParams vae = vae_from(load_checkpoint(st.input(artifact::vae, "train-vae")));
  const ControllerParams ctrl = controller_from(load_checkpoint(st.input(artifact::controller, "train-policy")));
  CheatTrainConfig tc;
  tc.epochs = cfg.size("cheat.epochs");
  tc.batch = cfg.size("cheat.batch");
  tc.lr = cfg.real("cheat.lr");
  tc.hidden = cfg.sizes("cheat.hidden");
  tc.seed = st.seed(kCheat);
  const CheatTrainResult r = train_cheat(pairs, vae.params, ctrl.params, tc);
  const json frozen = {{"vae", r.vae_digest_after}, {"controller", r.controller_digest_after}};
  save_checkpoint(st.output(artifact::cheat), to_checkpoint(r.params, {{"config", cfg.echo({"seed", "cheat."})},
                                                                        {"train_seed", tc.seed},
                                                                        {"frozen_digests", frozen}}));
  st.produced(artifact::cheat);
  st.metrics = loss_metrics(r.loss_history);
  st.metrics["frozen_digests_before"] = {{"vae", r.vae_digest_before}, {"controller", r.controller_digest_before}};
  st.metrics["frozen_digests_after"] = frozen;
  st.finish({"seed", "cheat."});
}

void gen_real_data(Stage& st) {
  const RunConfig& cfg = st.cfg;
  CollectOptions o = collect_options(cfg);
  o.stride = cfg.size("real.stride");
  Dataset d = collect_trajectories(WorldKind::real, cfg.size("real.episodes"), cfg.size("real.max_steps"),
                                   st.seed(kRealData), o);
  d = limit_steps(d, cfg.size("real.steps"));
  write_dataset(d, st.output(artifact::real_data));
  st.produced(artifact::real_data);
  st.metrics = {{"episodes", d.manifest.episodes},
                {"steps", d.manifest.steps},
                {"crashed_episodes", d.manifest.crashed_episodes}};
  st.finish(with_world({"real."}));
}

void train_baseline_stage(Stage& st) {
  const RunConfig& cfg = st.cfg;
  const Dataset d = read_dataset(st.input(artifact::real_data, "gen-real-data"));
  BaselineTrainConfig tc;
  tc.epochs = cfg.size("baseline.epochs");
  tc.batch = cfg.size("baseline.batch");
  tc.lr = cfg.real("baseline.lr");
  tc.hidden = cfg.sizes("baseline.hidden");
  tc.seed = st.seed(kBaseline);
  const BaselineTrainResult r = train_baseline(d, tc);
  save_checkpoint(st.output(artifact::baseline),
                  to_checkpoint(r.params, {{"config", cfg.echo({"seed", "baseline."})}, {"train_seed", tc.seed}}));
  st.produced(artifact::baseline);
  st.metrics = loss_metrics(r.loss_history);
  st.finish({"seed", "baseline."});
}

// The cheat encoder must have been trained against exactly this controller.
void check_frozen_pairing(const Checkpoint& cheat, const ControllerParams& ctrl) {
  const std::string want = cheat.info.value("frozen_digests", json::object()).value("controller", "");
  if (want != params_digest(ctrl.params)) {
    throw IntegrityError("cheat encoder was trained against a different controller (frozen digest mismatch)");
  }
}

void eval_stage(Stage& st) {
  const RunConfig& cfg = st.cfg;
  const ControllerParams ctrl = controller_from(load_checkpoint(st.input(artifact::controller, "train-policy")));
  const Checkpoint cheat_ck = load_checkpoint(st.input(artifact::cheat, "train-cheat"));
  const CheatEncoderParams cheat = cheat_from(cheat_ck);
  const BaselineParams base = baseline_from(load_checkpoint(st.input(artifact::baseline, "train-baseline")));
  check_frozen_pairing(cheat_ck, ctrl);

  const EvalModels models{&cheat, &ctrl, &base};
  const EvalOptions opts = eval_options(cfg);
  const auto seeds = seed_suite(cfg.u64("eval.seed_base"), cfg.size("eval.episodes"));
  std::vector<EvalReport> reports;
  for (Pipeline p : {Pipeline::cheat, Pipeline::baseline, Pipeline::random, Pipeline::zero}) {
    reports.push_back(eval_mean_distance(p, models, seeds, opts));
    st.log << "eval: " << reports.back().method << " mean distance " << reports.back().mean_distance << " m"
           << std::endl;
  }
  const ComparisonTable t = comparison_report(reports);
  write_file(st.output(artifact::eval_csv), t.csv);
  write_file(st.output(artifact::eval_txt), t.text);
  st.produced(artifact::eval_csv);
  st.produced(artifact::eval_txt);
  for (const auto& r : reports) {
    st.metrics[r.method] = {{"mean_distance_m", r.mean_distance},
                            {"crash_rate", r.crash_rate},
                            {"episodes", r.episodes()},
                            {"odometers", r.odometers}};
  }
  st.finish(with_world({"eval."}));
}

void viz_stage(Stage& st) {
  const RunConfig& cfg = st.cfg;
  const VaeParams vae = vae_from(load_checkpoint(st.input(artifact::vae, "train-vae")));
  const ControllerParams ctrl = controller_from(load_checkpoint(st.input(artifact::controller, "train-policy")));
  const Checkpoint cheat_ck = load_checkpoint(st.input(artifact::cheat, "train-cheat"));
  const CheatEncoderParams cheat = cheat_from(cheat_ck);
  check_frozen_pairing(cheat_ck, ctrl);

  const std::string before = params_digest(vae.params) + params_digest(ctrl.params) + params_digest(cheat.params);
  const SimParams sim = sim_params(cfg);
  const WorldSpec world =
      spawn_real_world(cfg.u64("eval.seed_base") + cfg.u64("viz.world"), cfg.real("world.clutter_density"), false, sim);
  const RolloutResult r = rollout(world, cheat, ctrl, cfg.size("viz.max_steps"), sim);
  const StripGeometry g = render_belief_strip(r.trace, cheat, vae, cfg.size("viz.stride"),
                                              st.output(artifact::belief_strip), cfg.size("viz.band_height"));
  const std::string after = params_digest(vae.params) + params_digest(ctrl.params) + params_digest(cheat.params);
  if (before != after) throw FrozenViolationError("viz: model parameters changed while rendering");
  st.produced(artifact::belief_strip);
  st.metrics = {{"width", g.width},
                {"height", g.height},
                {"tiles", g.tiles},
                {"rollout_steps", r.trace.size()},
                {"odometer_m", r.odometer()},
                {"crashed", r.crashed()}};
  st.finish(with_world({"eval.seed_base", "viz."}));
}

void run_one(const std::string& name, const RunConfig& cfg, std::ostream& log) {
  static const std::map<std::string, void (*)(Stage&)> table = {
      {"gen-fake-data", gen_fake_data}, {"train-vae", train_vae_stage},     {"gen-expert", gen_expert},
      {"train-policy", train_policy},   {"build-pairs", build_pairs_stage}, {"train-cheat", train_cheat_stage},
      {"gen-real-data", gen_real_data}, {"train-baseline", train_baseline_stage}, {"eval", eval_stage},
      {"viz", viz_stage}};
  const auto it = table.find(name);
  if (it == table.end()) throw ConfigError("unknown command '" + name + "'");
  Stage st{cfg, log, fs::path(cfg.text("out_dir")), name};
  fs::create_directories(st.dir);
  it->second(st);
}

}  // namespace

void run_stage(const std::string& name, const RunConfig& cfg, std::ostream& log) {
  if (name != "pipeline") return run_one(name, cfg, log);
  for (const auto& s : stage_names()) run_one(s, cfg, log);
}

int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  std::string active = name;
  try {
    if (name == "pipeline") {
      for (const auto& s : stage_names()) {
        active = s;
        run_one(s, cfg, log);
      }
    } else {
      run_one(name, cfg, log);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << active << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const DependencyError& e) {
    err << active << ": " << e.what() << "\n";
    return kExitDependency;
  } catch (const std::exception& e) {
    err << active << ": " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace lcl
