#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "lcl/checkpoint.hpp"
#include "lcl/config.hpp"
#include "lcl/container.hpp"
#include "lcl/digest.hpp"
#include "lcl/errors.hpp"
#include "lcl/pipeline.hpp"

using namespace lcl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lcl_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string config_error(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

// Runs the command-line tool through the shell; returns its exit status.
int run_tool(const std::string& args, std::string* out = nullptr) {
  const fs::path log = fs::temp_directory_path() / "lcl_cli_tool.log";
  const std::string cmd = std::string(CHEATLAB_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  if (out) *out = read_file(log);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Every stage scaled down to seconds.
const std::vector<std::string> kTiny = {
    "fake.episodes=2",       "fake.max_steps=300",    "fake.observations=60", "vae.epochs=2",
    "vae.hidden=16",         "policy.episodes=1",     "policy.max_steps=100", "policy.steps=60",
    "policy.h_dim=2",        "policy.mlp=4,4",        "policy.population=4",  "policy.elites=1",
    "policy.generations=2",  "cheat.poses=20",        "cheat.epochs=2",       "cheat.hidden=16",
    "real.episodes=2",       "real.max_steps=60",     "real.steps=20",        "baseline.epochs=2",
    "baseline.hidden=16",    "eval.episodes=2",       "eval.max_steps=40",    "viz.max_steps=20"};

RunConfig tiny_config(const fs::path& dir) {
  auto overrides = kTiny;
  overrides.push_back("out_dir=" + dir.string());
  return load_config(std::nullopt, overrides);
}

}  // namespace

TEST(Config, EmptyFileGivesDefaults) {
  const fs::path dir = scratch("empty_cfg");
  write_file(dir / "run.cfg", "");
  const RunConfig cfg = load_config(dir / "run.cfg", {});
  EXPECT_EQ(cfg.dump(), RunConfig().dump());
  EXPECT_EQ(cfg.u64("seed"), 0u);
  EXPECT_EQ(cfg.size("vae.k"), 8u);
  EXPECT_EQ(cfg.sizes("policy.mlp"), (std::vector<std::size_t>{32, 16}));
}

TEST(Config, OverrideBeatsFileBeatsDefault) {
  const fs::path dir = scratch("prec_cfg");
  write_file(dir / "run.cfg", "# comment line\nseed = 3\nvae.epochs = 7  # trailing comment\n");
  const RunConfig from_file = load_config(dir / "run.cfg", {});
  EXPECT_EQ(from_file.u64("seed"), 3u);
  EXPECT_EQ(from_file.size("vae.epochs"), 7u);
  const RunConfig both = load_config(dir / "run.cfg", {"seed=7"});
  EXPECT_EQ(both.u64("seed"), 7u);
  EXPECT_EQ(both.size("vae.epochs"), 7u);
}

TEST(Config, UnknownKeyIsNamed) {
  const std::string msg = config_error([] { load_config(std::nullopt, {"popsize=3"}); });
  EXPECT_NE(msg.find("popsize"), std::string::npos) << msg;
}

TEST(Config, FileErrorsNameKeyAndLine) {
  const fs::path dir = scratch("bad_cfg");
  write_file(dir / "run.cfg", "seed = 1\n\nvae.lr = fast\n");
  const std::string msg = config_error([&] { load_config(dir / "run.cfg", {}); });
  EXPECT_NE(msg.find("vae.lr"), std::string::npos) << msg;
  EXPECT_NE(msg.find(":3"), std::string::npos) << msg;
  write_file(dir / "run.cfg", "seed 4\n");
  EXPECT_NE(config_error([&] { load_config(dir / "run.cfg", {}); }).find(":1"), std::string::npos);
}

TEST(Config, RangesAndTypesEnforced) {
  EXPECT_FALSE(config_error([] { load_config(std::nullopt, {"world.dt=0.5"}); }).empty());
  EXPECT_FALSE(config_error([] { load_config(std::nullopt, {"policy.population=abc"}); }).empty());
  EXPECT_FALSE(config_error([] { load_config(std::nullopt, {"cheat.mode=teleport"}); }).empty());
  EXPECT_FALSE(config_error([] { load_config(std::nullopt, {"policy.elites=64"}); }).empty());
  EXPECT_FALSE(config_error([] { load_config(std::nullopt, {"policy.mlp=8"}); }).empty());
  EXPECT_FALSE(config_error([] { load_config(std::nullopt, {"seed"}); }).empty());
  EXPECT_TRUE(config_error([] { load_config(std::nullopt, {"world.dt=0.1", "vae.hidden=32,16,8"}); }).empty());
}

TEST(Config, DumpParsesBackToTheSameConfig) {
  RunConfig a = load_config(std::nullopt, {"seed=11", "vae.hidden=10,5", "cheat.mode=gates_visible"});
  RunConfig b;
  apply_config_text(b, a.dump(), "dump");
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_EQ(b.echo({"cheat."}).at("cheat.mode"), "gates_visible");
  EXPECT_FALSE(b.echo({"cheat."}).contains("seed"));
}

TEST(Checkpoint, TrainedVaeRoundTripsBitExactly) {
  CollectOptions o;
  o.stride = 4;
  const Dataset d = limit_steps(collect_trajectories(WorldKind::fake, 2, 300, 1, o), 40);
  VaeTrainConfig c;
  c.epochs = 3;
  c.hidden = {16};
  const VaeParams vae = train_vae(d, c).params;
  const fs::path dir = scratch("ckpt");
  save_checkpoint(dir / "vae.ckpt", to_checkpoint(vae, {{"train_seed", 0}}));
  const Checkpoint back = load_checkpoint(dir / "vae.ckpt");
  EXPECT_EQ(back.stage, "vae");
  EXPECT_TRUE(bit_equal(back.params, vae.params));
  const VaeParams again = vae_from(back);
  EXPECT_EQ(again.k, vae.k);
  EXPECT_EQ(again.hidden, vae.hidden);
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(to_checkpoint(vae, {{"train_seed", 0}})));
}

TEST(Checkpoint, TruncationIsAFormatError) {
  const std::string bytes = encode_checkpoint(to_checkpoint(controller_zero({}), {}));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{9}, bytes.size() / 3, bytes.size() - 1}) {
    EXPECT_THROW(decode_checkpoint(std::string_view(bytes).substr(0, cut)), FormatError) << cut;
  }
}

TEST(Checkpoint, BadMagicAndVersionRefused) {
  std::string bytes = encode_checkpoint(to_checkpoint(controller_zero({}), {}));
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(magic), FormatError);
  std::string version = bytes;
  version[4] = static_cast<char>(version[4] + 1);
  EXPECT_THROW(decode_checkpoint(version), FormatError);
}

TEST(Checkpoint, TamperedFrozenDigestIsAnIntegrityError) {
  const std::string fake_digest(64, 'a');
  std::string bytes = encode_checkpoint(
      to_checkpoint(cheat_init(64, 8, {16}, 0), {{"frozen_digests", {{"vae", fake_digest}, {"controller", fake_digest}}}}));
  const auto at = bytes.find(fake_digest);
  ASSERT_NE(at, std::string::npos);
  bytes[at + 10] = 'b';
  EXPECT_THROW(decode_checkpoint(bytes), IntegrityError);
}

TEST(Checkpoint, TamperedWeightIsAnIntegrityError) {
  std::string bytes = encode_checkpoint(to_checkpoint(vae_init(64, 8, {16}, 0), {}));
  bytes[200] = static_cast<char>(bytes[200] ^ 0x01);
  EXPECT_THROW(decode_checkpoint(bytes), IntegrityError);
}

TEST(Digest, KnownVectorsAndAvalanche) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  ParamSet a = vae_init(64, 8, {16}, 0).params;
  const std::string d0 = params_digest(a);
  a.at("enc.0.weight")[0] = std::nextafter(a.at("enc.0.weight")[0], 1.0);
  EXPECT_NE(params_digest(a), d0);
  ParamSet b = vae_init(64, 8, {16}, 0).params;
  b.set_trainable("dec.0.bias", false);
  EXPECT_EQ(params_digest(b), d0);
}

TEST(Commands, EvalBeforeTrainingNamesTheController) {
  const fs::path dir = scratch("eval_first");
  std::ostringstream log, err;
  const RunConfig cfg = load_config(std::nullopt, {"out_dir=" + dir.string()});
  EXPECT_EQ(run_command("eval", cfg, log, err), kExitDependency);
  EXPECT_NE(err.str().find("eval: "), std::string::npos) << err.str();
  EXPECT_NE(err.str().find("controller.ckpt"), std::string::npos) << err.str();
  EXPECT_THROW(run_stage("train-cheat", cfg, log), DependencyError);
}

TEST(Commands, ToolExitCodes) {
  const fs::path dir = scratch("tool");
  std::string out;
  EXPECT_EQ(run_tool("eval --set out_dir=" + dir.string(), &out), 2);
  EXPECT_NE(out.find("controller.ckpt"), std::string::npos) << out;
  EXPECT_EQ(run_tool("eval --set popsize=3", &out), 1);
  EXPECT_NE(out.find("popsize"), std::string::npos) << out;
  EXPECT_EQ(run_tool("fly-to-moon", &out), 1);
  EXPECT_EQ(run_tool("print-config", &out), 0);
  EXPECT_NE(out.find("policy.population = 64"), std::string::npos);
  write_file(dir / "run.cfg", "seed = -1\n");
  EXPECT_EQ(run_tool("pipeline --config " + (dir / "run.cfg").string(), &out), 1);
  EXPECT_NE(out.find("run.cfg:1"), std::string::npos) << out;
}

TEST(Commands, RuntimeErrorsCarryTheStageName) {
  const fs::path dir = scratch("runtime_err");
  std::ostringstream log, err;
  const RunConfig cfg = tiny_config(dir);
  ASSERT_EQ(run_command("gen-fake-data", cfg, log, err), kExitOk) << err.str();
  write_file(dir / artifact::fake_data, "LCLB garbage");
  EXPECT_EQ(run_command("train-vae", cfg, log, err), kExitRuntime);
  EXPECT_EQ(err.str().rfind("train-vae: ", 0), 0u) << err.str();
}

TEST(Commands, TinyPipelineDigestChainAndDeterminism) {
  const fs::path a = scratch("chain_a"), b = scratch("chain_b");
  std::ostringstream log, err;
  ASSERT_EQ(run_command("pipeline", tiny_config(a), log, err), kExitOk) << err.str();

  // Every recorded input digest equals the digest its producer recorded.
  std::map<std::string, std::string> produced;
  for (const auto& stage : stage_names()) {
    const auto summary = nlohmann::json::parse(read_file(a / (stage + ".json")));
    EXPECT_EQ(summary.at("stage"), stage);
    for (const auto& [file, digest] : summary.at("inputs").items()) {
      ASSERT_TRUE(produced.count(file)) << stage << " reads " << file << " before anyone produced it";
      EXPECT_EQ(produced.at(file), digest.get<std::string>()) << stage << " / " << file;
    }
    for (const auto& [file, digest] : summary.at("outputs").items()) {
      produced[file] = digest.get<std::string>();
      EXPECT_EQ(file_digest(a / file), digest.get<std::string>()) << file << " changed after " << stage;
    }
  }
  EXPECT_EQ(produced.size(), 12u);

  // Stage by stage gives the same bytes as the pipeline command.
  for (const auto& stage : stage_names()) ASSERT_EQ(run_command(stage, tiny_config(b), log, err), kExitOk) << err.str();
  for (const auto& [file, digest] : produced) EXPECT_EQ(file_digest(b / file), digest) << file;
}

TEST(Commands, EvalRefusesAMismatchedController) {
  const fs::path dir = scratch("mismatch");
  std::ostringstream log, err;
  const RunConfig cfg = tiny_config(dir);
  ASSERT_EQ(run_command("pipeline", cfg, log, err), kExitOk) << err.str();
  Checkpoint ck = load_checkpoint(dir / artifact::controller);
  ck.params.at("mlp.2.bias")[0] += 0.5;
  save_checkpoint(dir / artifact::controller, ck);
  EXPECT_EQ(run_command("eval", cfg, log, err), kExitRuntime);
  EXPECT_NE(err.str().find("frozen"), std::string::npos) << err.str();
}
