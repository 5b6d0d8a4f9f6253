// kpg: command-line driver for training runs, evaluation and bounds.

#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "kpg/experiment.hpp"
#include "kpg/log.hpp"

namespace {

std::optional<kpg::Vector> parse_state(const std::string& text) {
  if (text.empty()) return std::nullopt;
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      values.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw kpg::ConfigError("--state: '" + cell + "' is not a number");
    }
  }
  return kpg::Vector(Eigen::Map<kpg::Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online kernel policy gradient experiments"};
  app.set_version_flag("--version", std::string(kpg::kVersion));
  app.require_subcommand(1);

  std::string config_path, out_dir, policy_path, state_text, run_dir;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;

  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--out", out_dir, "Output directory (overrides the config)");
    sub->add_option("--seed", seed, "Random seed (overrides the config)");
    sub->add_option("--iterations", iterations, "Number of training iterations (overrides the config)");
  };

  auto* train = app.add_subcommand("train", "Run online training and write every output");
  train->add_option("--config", config_path, "Experiment config (JSON) or run manifest")->required();
  add_overrides(train);

  auto* eval = app.add_subcommand("eval", "Monte Carlo value of a stored policy snapshot");
  eval->add_option("--policy", policy_path, "Policy snapshot (JSON)")->required();
  eval->add_option("--config", config_path, "Experiment config (JSON) or run manifest")->required();
  eval->add_option("--state", state_text, "Comma-separated evaluation state");
  add_overrides(eval);

  auto* bounds = app.add_subcommand("bounds", "Print the constants table and the step-size verdict");
  bounds->add_option("--config", config_path, "Experiment config with a bounds section")->required();

  auto* replay = app.add_subcommand("replay-figures", "Rebuild the figure datasets of a finished run");
  replay->add_option("--run", run_dir, "Run directory written by train")->required();
  replay->add_option("--out", out_dir, "Destination (default <run>/figures)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  kpg::RunOverrides o;
  auto collect = [&](CLI::App* sub) {
    if (sub->count("--seed")) o.seed = seed;
    if (sub->count("--iterations")) o.iterations = iterations;
    if (sub->count("--out")) o.out = out_dir;
  };

  try {
    if (*train) {
      collect(train);
      return kpg::cmd_train(config_path, o, std::cout);
    }
    if (*eval) {
      collect(eval);
      return kpg::cmd_eval(policy_path, config_path, parse_state(state_text), o, std::cout);
    }
    if (*bounds) return kpg::cmd_bounds(config_path, std::cout);
    if (*replay) {
      if (replay->count("--out")) o.out = out_dir;
      return kpg::cmd_replay_figures(run_dir, o, std::cout);
    }
  } catch (const kpg::ConfigError& e) {
    kpg::log::error(e.what());
    return 1;
  } catch (const kpg::ModelOrderGuardError& e) {
    kpg::log::error(e.what());
    return 2;
  } catch (const std::exception& e) {
    kpg::log::error(e.what());
    return 2;
  }
  return 1;
}
