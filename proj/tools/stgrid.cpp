#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "stgrid/commands.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> policy;
  std::optional<long> iters;
  std::optional<std::string> frames;
  std::optional<std::string> resume;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "INI configuration file");
  cmd->add_option("--seed", o.seed, "Single seed, replaces the configured seed list");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--iters", o.iters, "Iteration or step count");
  cmd->add_option("--frames", o.frames, "Frame export: none, all or every-K");
}

stgrid::RunConfig resolve(const Overrides& o) {
  stgrid::RunConfig cfg;
  if (!o.config.empty()) cfg = stgrid::load_config(o.config);
  else if (o.resume) cfg = stgrid::load_checkpoint(*o.resume).config;
  if (o.seed) cfg.run.seeds = {*o.seed};
  if (o.out) cfg.run.output = *o.out;
  if (o.policy) cfg.run.policy = stgrid::parse_policy(*o.policy);
  if (o.iters) cfg.run.iterations = *o.iters;
  if (o.frames) cfg.run.frames = stgrid::parse_frames(*o.frames);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatiotemporal grid monitoring: simulation, filtering and learned sensing policies"};
  app.require_subcommand(1);
  Overrides o;

  auto* simulate = app.add_subcommand("simulate", "Free-run the environment and export occupancy");
  auto* filter = app.add_subcommand("filter-demo", "Known-model filter against the prediction-only baseline");
  auto* train = app.add_subcommand("train", "Run the closed loop for one policy");
  auto* compare = app.add_subcommand("compare", "Run all four policies over the seed list");
  for (auto* c : {simulate, filter, train, compare}) add_common(c, o);
  train->add_option("--policy", o.policy, "learned, random, exploit or explore");
  train->add_option("--resume", o.resume, "Checkpoint to continue from");

  CLI11_PARSE(app, argc, argv);

  try {
    const stgrid::RunConfig cfg = resolve(o);
    if (simulate->parsed()) return stgrid::cmd_simulate(cfg, std::cout);
    if (filter->parsed()) return stgrid::cmd_filter_demo(cfg, std::cout);
    if (train->parsed()) return stgrid::cmd_train(cfg, std::cout, o.resume);
    return stgrid::cmd_compare(cfg, std::cout);
  } catch (const stgrid::ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
