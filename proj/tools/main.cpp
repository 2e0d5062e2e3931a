#include <iostream>

#include <CLI11.hpp>

#include "fhescale/harness/commands.hpp"

using namespace fhescale::harness;

int main(int argc, char** argv) {
  CLI::App app{"Autoscaling simulator, PPO agent and mock-FHE inference pipeline"};
  app.require_subcommand(1);

  CommonOptions common;
  std::uint64_t seed = 0;
  std::string config, out;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Master seed (overrides the config)");
    cmd->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--out", out, "Output directory (overrides the config)");
  };

  auto* data_cmd = app.add_subcommand("data", "Build the 50-film dataset artifact");
  add_common(data_cmd);
  DataOptions data_opts;
  std::string input;
  int users = 0;
  data_cmd->add_option("--input", input, "Ratings file (user item rating timestamp, tab-separated)");
  data_cmd->add_flag("--synthetic", "Use synthetic ratings (the default without --input)");
  data_cmd->add_option("--users", users, "Synthetic user count");

  auto* fhe_cmd = app.add_subcommand("fhe-demo", "Train, compile and run encrypted inferences");
  add_common(fhe_cmd);
  FheDemoOptions fhe_opts;
  std::string dataset;
  int bits = 0, inferences = 0, degree = 0;
  fhe_cmd->add_option("--dataset", dataset, "Dataset artifact from `data` (synthetic when absent)");
  fhe_cmd->add_option("--bits", bits, "Weight and input bit-width");
  fhe_cmd->add_option("--n", inferences, "Number of encrypted inferences");
  fhe_cmd->add_flag("--activation", fhe_opts.activation, "Append the polynomial sigmoid");
  fhe_cmd->add_option("--degree", degree, "Activation polynomial degree");
  fhe_cmd->add_flag("--no-bootstrap", fhe_opts.no_bootstrap, "Disable bootstrapping");

  auto* train_cmd = app.add_subcommand("train", "Train the scaling agent");
  add_common(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  add_common(eval_cmd);
  EvalOptions eval_opts;
  std::string checkpoint;
  int episodes = 0;
  eval_cmd->add_option("--checkpoint", checkpoint, "Policy checkpoint (default <out>/policy.bin)");
  eval_cmd->add_option("--episodes", episodes, "Evaluation episodes");

  auto* plot_cmd = app.add_subcommand("plot", "Render figures from episode_metrics.csv");
  add_common(plot_cmd);
  PlotOptions plot_opts;
  std::string in_dir;
  plot_cmd->add_option("--in", in_dir, "Directory holding episode_metrics.csv (default <out>)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  CLI::App* cmd = app.get_subcommands().front();
  if (cmd->count("--seed")) common.seed = seed;
  if (!config.empty()) common.config = config;
  if (!out.empty()) common.out = out;

  if (cmd == data_cmd) {
    if (!input.empty()) data_opts.input = input;
    if (data_cmd->count("--users")) data_opts.users = users;
    if (!input.empty() && data_cmd->count("--synthetic")) {
      std::cerr << "error: --input and --synthetic are exclusive\n";
      return kExitUsage;
    }
    return cmd_data(common, data_opts, std::cout, std::cerr);
  }
  if (cmd == fhe_cmd) {
    if (!dataset.empty()) fhe_opts.dataset = dataset;
    if (fhe_cmd->count("--bits")) fhe_opts.bits = bits;
    if (fhe_cmd->count("--n")) fhe_opts.inferences = inferences;
    if (fhe_cmd->count("--degree")) fhe_opts.degree = degree;
    return cmd_fhe_demo(common, fhe_opts, std::cout, std::cerr);
  }
  if (cmd == train_cmd) return cmd_train(common, std::cout, std::cerr);
  if (cmd == eval_cmd) {
    if (!checkpoint.empty()) eval_opts.checkpoint = checkpoint;
    if (eval_cmd->count("--episodes")) eval_opts.episodes = episodes;
    return cmd_eval(common, eval_opts, std::cout, std::cerr);
  }
  if (!in_dir.empty()) plot_opts.input_dir = in_dir;
  return cmd_plot(common, plot_opts, std::cout, std::cerr);
}
