// cheatlab <command> [--config path] [--set key=value ...]

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lcl/config.hpp"
#include "lcl/errors.hpp"
#include "lcl/pipeline.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> commands = lcl::stage_names();
  commands.push_back("pipeline");
  commands.push_back("print-config");

  std::string help = "Commands, in pipeline order:\n";
  for (const auto& c : commands) help += "  " + c + "\n";

  CLI::App app{"Policy-transfer lab: train in the gate world, drive in the cluttered one."};
  app.footer(help);
  std::string command;
  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  app.add_option("command", command, "stage to run")->required()->check(CLI::IsMember(commands));
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--set", overrides, "key=value override (repeatable, wins over the file)")->take_all();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? lcl::kExitOk : lcl::kExitConfig;
  }

  lcl::RunConfig cfg;
  try {
    std::optional<std::filesystem::path> path;
    if (config_path) path = *config_path;
    cfg = lcl::load_config(path, overrides);
  } catch (const lcl::Error& e) {
    std::cerr << "config: " << e.what() << "\n";
    return lcl::kExitConfig;
  }

  if (command == "print-config") {
    std::cout << cfg.dump();
    return lcl::kExitOk;
  }
  return lcl::run_command(command, cfg, std::cout, std::cerr);
}
