#include "lcl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "lcl/container.hpp"
#include "lcl/errors.hpp"
#include "lcl/nn.hpp"

namespace lcl {

namespace {

constexpr double kBig = 9.0e18;

KeySpec I(std::string name, std::string def, double lo, double hi, std::string help) {
  return {std::move(name), KeyKind::integer, std::move(def), lo, hi, {}, std::move(help)};
}
KeySpec R(std::string name, std::string def, double lo, double hi, std::string help) {
  return {std::move(name), KeyKind::real, std::move(def), lo, hi, {}, std::move(help)};
}
KeySpec T(std::string name, std::string def, std::vector<std::string> choices, std::string help) {
  return {std::move(name), KeyKind::text, std::move(def), 0, 0, std::move(choices), std::move(help)};
}
KeySpec S(std::string name, std::string def, std::string help) {
  return {std::move(name), KeyKind::sizes, std::move(def), 1, 4096, {}, std::move(help)};
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const KeySpec& spec_of(const std::string& key, const std::string& where) {
  for (const auto& k : config_keys()) {
    if (k.name == key) return k;
  }
  throw ConfigError(where + ": unknown key '" + key + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = {
      I("seed", "0", 0, kBig, "global seed; every stage derives its streams from it"),
      T("out_dir", "out", {}, "artifact directory"),

      I("world.width", "64", 4, 1024, "scanline columns W"),
      R("world.fov_deg", "90", 10, 170, "horizontal field of view"),
      R("world.d_max", "20", 1, 200, "sensor range (m)"),
      R("world.dt", "0.05", 1e-4, 0.2, "control period (s)"),
      R("world.v_max", "2", 0.1, 20, "velocity bound (m/s)"),
      R("world.omega_max", "1.5", 0.1, 10, "yaw-rate bound (rad/s)"),
      R("world.collision_radius", "0.3", 0.01, 2, "drone radius (m)"),
      I("world.n_gates", "5", 1, 100, "gates per fake world"),
      R("world.gate_half_width", "1.0", 0.05, 10, "gate aperture half width (m); must exceed the collision radius"),
      R("world.frame_thickness", "0.4", 0.01, 5, "gate post diameter (m)"),
      R("world.gate_spacing_min", "5", 4, 100, "min distance between consecutive gates (m)"),
      R("world.gate_spacing_max", "7", 4, 100, "max distance between consecutive gates (m)"),
      R("world.gate_offset_max", "1.0", 0, 10, "max lateral gate offset (m)"),
      R("world.gate_yaw_max_deg", "30", 0, 30, "max gate yaw deviation (deg)"),
      R("world.corridor_half_width", "15", 2, 1000, "fake corridor half width (m)"),
      R("world.corridor_end_margin", "22", 1, 1000, "free run beyond the last fake gate (m)"),
      R("world.room_size", "24", 8, 1000, "real room side (m)"),
      R("world.clutter_density", "0.4", 0, 1, "real-world obstacle density"),
      R("world.d_gate", "3", 0.5, 50, "virtual gate distance (m)"),

      R("expert.k_omega", "2", 0, 20, "pure-pursuit yaw gain"),
      R("expert.v_nom", "1.5", 0, 20, "nominal forward speed (m/s)"),
      R("expert.yaw_noise", "0.6", 0, 5, "exploration noise on executed yaw rate (rad/s)"),
      R("expert.noise_correlation", "0.95", 0, 0.999, "AR(1) coefficient of the exploration noise"),

      I("fake.episodes", "30", 1, 100000, "fake-world episodes for VAE data"),
      I("fake.max_steps", "2000", 1, 1000000, "step cap per episode"),
      I("fake.stride", "4", 1, 1000, "record every stride-th step"),
      I("fake.observations", "2000", 1, 10000000, "VAE training observations kept"),

      I("vae.k", "8", 1, 256, "latent dimension"),
      S("vae.hidden", "128,64", "encoder hidden sizes (decoder mirrors)"),
      I("vae.epochs", "200", 0, 100000, "training epochs"),
      I("vae.batch", "32", 1, 100000, "minibatch size"),
      R("vae.lr", "0.001", 1e-8, 1, "Adam learning rate"),
      R("vae.beta", "0.002", 0, 100, "KL weight"),

      I("policy.episodes", "10", 1, 100000, "fake-world expert episodes for imitation"),
      I("policy.max_steps", "2000", 1, 1000000, "step cap per expert episode"),
      I("policy.steps", "4000", 1, 10000000, "imitation steps kept"),
      I("policy.h_dim", "16", 1, 1024, "LSTM hidden size"),
      S("policy.mlp", "32,16", "MLP hidden sizes (exactly two)"),
      I("policy.population", "64", 2, 100000, "GA population"),
      I("policy.elites", "8", 1, 100000, "GA elites (< population)"),
      R("policy.mutation_sigma", "0.02", 1e-9, 10, "GA mutation std"),
      R("policy.init_sigma", "0.1", 0, 10, "GA initial genome std"),
      I("policy.generations", "150", 1, 1000000, "GA generations"),
      T("policy.fitness", "imitation", {"imitation", "reward"}, "fitness kind"),
      R("policy.gate_bonus", "5", 0, 1000, "reward fitness: bonus per gate"),
      I("policy.reward_worlds", "4", 1, 10000, "reward fitness: fake worlds per evaluation"),
      I("policy.reward_max_steps", "600", 1, 1000000, "reward fitness: step cap"),

      T("cheat.mode", "virtual_gate", {"virtual_gate", "gates_visible"}, "pair supervision mode"),
      I("cheat.poses", "2000", 1, 10000000, "training pairs"),
      S("cheat.hidden", "128,64", "cheat encoder hidden sizes"),
      I("cheat.epochs", "200", 0, 100000, "training epochs"),
      I("cheat.batch", "32", 1, 100000, "minibatch size"),
      R("cheat.lr", "0.001", 1e-8, 1, "Adam learning rate"),

      I("real.episodes", "20", 1, 100000, "real-world expert episodes for the baseline"),
      I("real.max_steps", "400", 1, 1000000, "step cap per episode"),
      I("real.stride", "4", 1, 1000, "record every stride-th step"),
      I("real.steps", "2000", 1, 10000000, "baseline training steps kept"),

      S("baseline.hidden", "128,64", "baseline regressor hidden sizes"),
      I("baseline.epochs", "200", 0, 100000, "training epochs"),
      I("baseline.batch", "32", 1, 100000, "minibatch size"),
      R("baseline.lr", "0.001", 1e-8, 1, "Adam learning rate"),

      I("eval.episodes", "50", 1, 100000, "evaluation worlds"),
      I("eval.seed_base", "1000000", 0, kBig, "first evaluation world seed"),
      I("eval.max_steps", "2000", 1, 10000000, "step cap per evaluation episode"),

      I("viz.world", "0", 0, 100000, "evaluation world index rolled out for the belief strip"),
      I("viz.max_steps", "400", 1, 1000000, "step cap of the visualized rollout"),
      I("viz.stride", "10", 1, 100000, "one tile every stride steps"),
      I("viz.band_height", "16", 1, 1024, "pixel rows per band"),
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_[k.name] = k.fallback;
}

void RunConfig::set(const std::string& key, const std::string& value, const std::string& where) {
  const KeySpec& k = spec_of(key, where);
  const std::string v = trim(value);
  const std::string at = where + ": key '" + key + "'";
  switch (k.kind) {
    case KeyKind::integer: {
      std::int64_t n = 0;
      const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
      if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(at + ": '" + v + "' is not an integer");
      if (static_cast<double>(n) < k.min || static_cast<double>(n) > k.max) {
        throw ConfigError(at + ": " + v + " outside [" + fmt(k.min) + ", " + fmt(k.max) + "]");
      }
      break;
    }
    case KeyKind::real: {
      char* end = nullptr;
      const double d = v.empty() ? NAN : std::strtod(v.c_str(), &end);
      if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d)) {
        throw ConfigError(at + ": '" + v + "' is not a finite number");
      }
      if (d < k.min || d > k.max) throw ConfigError(at + ": " + v + " outside [" + fmt(k.min) + ", " + fmt(k.max) + "]");
      break;
    }
    case KeyKind::text:
      if (v.empty()) throw ConfigError(at + ": empty value");
      if (!k.choices.empty() && std::find(k.choices.begin(), k.choices.end(), v) == k.choices.end()) {
        std::string all;
        for (const auto& c : k.choices) all += (all.empty() ? "" : ", ") + c;
        throw ConfigError(at + ": '" + v + "' is not one of " + all);
      }
      break;
    case KeyKind::sizes:
      try {
        for (std::size_t s : parse_sizes(v)) {
          if (static_cast<double>(s) > k.max) throw ConfigError("layer size too large");
        }
      } catch (const ConfigError& e) {
        throw ConfigError(at + ": " + e.what());
      }
      break;
  }
  values_[key] = v;
}

const std::string& RunConfig::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
  return it->second;
}

std::int64_t RunConfig::integer(const std::string& key) const { return std::stoll(raw(key)); }
std::uint64_t RunConfig::u64(const std::string& key) const { return static_cast<std::uint64_t>(integer(key)); }
std::size_t RunConfig::size(const std::string& key) const { return static_cast<std::size_t>(integer(key)); }
double RunConfig::real(const std::string& key) const { return std::strtod(raw(key).c_str(), nullptr); }
const std::string& RunConfig::text(const std::string& key) const { return raw(key); }
std::vector<std::size_t> RunConfig::sizes(const std::string& key) const { return parse_sizes(raw(key)); }

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + " = " + raw(k.name) + "  # " + k.help + "\n";
  return out;
}

nlohmann::json RunConfig::echo(const std::vector<std::string>& prefixes) const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : config_keys()) {
    const bool take = prefixes.empty() || std::any_of(prefixes.begin(), prefixes.end(), [&](const std::string& p) {
                        return k.name.rfind(p, 0) == 0;
                      });
    if (take) j[k.name] = raw(k.name);
  }
  return j;
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1), where);
  }
}

RunConfig load_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (path) {
    std::string text;
    try {
      text = read_file(*path);
    } catch (const Error& e) {
      throw ConfigError(std::string("config file: ") + e.what());
    }
    apply_config_text(cfg, text, path->string());
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set '" + o + "': expected key=value");
    cfg.set(trim(o.substr(0, eq)), o.substr(eq + 1), "--set");
  }
  if (cfg.size("policy.elites") >= cfg.size("policy.population")) {
    throw ConfigError("key 'policy.elites': must be smaller than policy.population");
  }
  if (cfg.real("world.gate_spacing_min") > cfg.real("world.gate_spacing_max")) {
    throw ConfigError("key 'world.gate_spacing_min': exceeds world.gate_spacing_max");
  }
  if (cfg.real("world.gate_half_width") <= cfg.real("world.collision_radius")) {
    throw ConfigError("key 'world.gate_half_width': must exceed world.collision_radius");
  }
  if (cfg.sizes("policy.mlp").size() != 2) throw ConfigError("key 'policy.mlp': needs exactly two hidden sizes");
  return cfg;
}

}  // namespace lcl
