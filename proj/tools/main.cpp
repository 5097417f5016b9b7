#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ddlab/commands.hpp"
#include "ddlab/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ddlab: a desk-scale bench for training, distilling, and "
               "analyzing 2-D denoising diffusion models"};
  app.set_version_flag("--version", ddlab::kVersion);
  app.require_subcommand(1);

  const std::vector<std::string> names{
      "gen-data", "train-base", "distill",          "train-lora", "sample",
      "dt-viz",   "eval",       "control-transfer", "sweep",      "report"};
  const std::vector<std::string> descriptions{
      "write the truth reference batch and its scatter plot",
      "train the many-step noise-prediction model",
      "compress the model onto a few-step grid",
      "train a low-rank control adapter on a frozen model",
      "generate samples with one inference arm",
      "trace how quickly each arm commits to its final sample",
      "score every inference arm against the truth batch",
      "apply control adapters across models and measure the shift",
      "sweep hybrid handoff depth, sub-steps, and guidance weight",
      "collect this run's tables and figures into summary.md"};

  struct SubArgs {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out;
  };
  std::vector<SubArgs> args(names.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < names.size(); ++i) {
    CLI::App* sub = app.add_subcommand(names[i], descriptions[i]);
    sub->add_option("--config", args[i].config_path, "JSON run configuration")
        ->required();
    sub->add_option("--set", args[i].sets,
                    "override a config entry, e.g. --set train.iterations=200");
    sub->add_option("--out", args[i].out, "output directory (overrides config)");
    subs.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);

  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    ddlab::RunConfig cfg;
    try {
      std::ifstream in(args[i].config_path);
      if (!in) {
        std::cerr << "config: cannot open " << args[i].config_path << "\n";
        return 2;
      }
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        std::cerr << "config: " << args[i].config_path << ": " << e.what() << "\n";
        return 2;
      }
      for (const std::string& s : args[i].sets) ddlab::apply_override(j, s);
      cfg = ddlab::parse_config(j);
      if (!args[i].out.empty()) cfg.out_dir = args[i].out;
    } catch (const ddlab::ConfigError& e) {
      std::cerr << e.what() << "\n";
      return 2;
    }
    return ddlab::run_command(names[i], cfg);
  }
  return 2;
}
