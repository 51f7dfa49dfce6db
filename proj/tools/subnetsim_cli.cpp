#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "subnetsim/commands.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Flags {
  std::string config;
  std::optional<std::string> policy;
  std::optional<int> episodes;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out = "out";
  std::optional<std::string> params;
  std::vector<int> n_values;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "Experiment config (JSON)");
  cmd->add_option("--episodes", f.episodes, "Monte Carlo episodes");
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--threads", f.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_flag("--quiet", f.quiet, "No progress output");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string::npos ? s.size() : comma;
    if (end > start) out.push_back(s.substr(start, end - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace subnetsim;
  CLI::App app{"Subnetwork interference coordination simulator"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Flags f;
  auto* tune_cmd = app.add_subcommand("tune", "Tune CADIC parameters with MOTPE");
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo evaluation of one policy");
  auto* cmp_cmd = app.add_subcommand("compare", "Policies on common random numbers");
  auto* resp_cmd = app.add_subcommand("plant-response", "Plant cost versus inter-arrival time");
  for (auto* c : {tune_cmd, sim_cmd, cmp_cmd, resp_cmd}) add_common(c, f);
  for (auto* c : {tune_cmd, sim_cmd, cmp_cmd}) {
    c->add_option("--policy", f.policy, cmp_cmd == c ? "Comma-separated policy ids" : "Policy id");
  }
  for (auto* c : {sim_cmd, cmp_cmd}) c->add_option("--params", f.params, "params.json from tune");
  cmp_cmd->add_option("--n", f.n_values, "Subnetwork counts to sweep")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
    if (f.seed) cfg.simulation.seed = *f.seed;
    if (f.threads) {
      if (*f.threads < 0) throw ConfigError("simulation.threads", "must be >= 0");
      cfg.simulation.threads = *f.threads;
    }
    CommandOptions opt;
    opt.out_dir = f.out;
    opt.quiet = f.quiet;
    if (f.params) opt.params = *f.params;

    if (*tune_cmd) {
      if (f.episodes) {
        if (*f.episodes < 1) throw ConfigError("tuning.episodes_per_trial", "must be >= 1");
        cfg.tuning.episodes_per_trial = *f.episodes;
      }
      if (f.policy) cfg.policy.id = *f.policy;
      validate(cfg);
      cmd_tune(cfg, opt, std::cout);
    } else if (*sim_cmd) {
      if (f.episodes) {
        if (*f.episodes < 1) throw ConfigError("simulation.episodes", "must be >= 1");
        cfg.simulation.episodes = *f.episodes;
      }
      if (f.policy) cfg.policy.id = *f.policy;
      parse_policy(cfg.policy.id);
      validate(cfg);
      cmd_simulate(cfg, opt, std::cout);
    } else if (*cmp_cmd) {
      if (f.episodes) {
        if (*f.episodes < 1) throw ConfigError("simulation.episodes", "must be >= 1");
        cfg.simulation.episodes = *f.episodes;
      }
      if (f.policy) opt.policies = split_list(*f.policy);
      opt.n_values = f.n_values;
      for (int n : opt.n_values)
        if (n < 1) throw ConfigError("deployment.n_subnetworks", "must be >= 1");
      validate(cfg);
      cmd_compare(cfg, opt, std::cout);
    } else if (*resp_cmd) {
      int seeds = 20;
      if (f.episodes) seeds = *f.episodes;
      if (seeds < 1) throw ConfigError("simulation.episodes", "must be >= 1");
      validate(cfg);
      cmd_plant_response(cfg, seeds, opt, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
