#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"
#include "io.hpp"
#include "motpe.hpp"
#include "plant.hpp"
#include "simloop.hpp"

namespace subnetsim {

namespace fs = std::filesystem;

/// CADIC parameters as stored in params.json.
struct CadicParamSet {
  double k0 = 0.49;
  double k1 = 16.0;
  std::vector<double> z{100.0, 186.0};
};

inline CadicParamSet load_params(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("params.json", "not found: " + path.string());
  const Json j = read_json(path, "params.json");
  CadicParamSet p;
  try {
    p.k0 = j.at("k0").get<double>();
    p.k1 = j.at("k1").get<double>();
    p.z = j.at("z").get<std::vector<double>>();
  } catch (const Json::exception& e) {
    throw ConfigError("params.json", path.string() + ": " + e.what());
  }
  return p;
}

inline void apply_params(ExperimentConfig& cfg, const CadicParamSet& p) {
  cfg.policy.k0 = p.k0;
  cfg.policy.k1 = p.k1;
  cfg.policy.z = p.z;
  validate(cfg);
}

struct PolicySummary {
  std::string policy;
  int n_subnetworks = 0;
  int episodes = 0;
  std::size_t samples = 0;
  double mean_cost = 0.0;
  double max_cost = 0.0;
  PercentileValue p50, p99, p999;
  double ul_bler = 0.0;
  double dl_bler = 0.0;
  double tx_fraction = 0.0;
  double diverged_fraction = 0.0;
};

inline PolicySummary summarize(const std::string& policy, int n, int episodes, const MonteCarloResult& r) {
  PolicySummary s;
  s.policy = policy;
  s.n_subnetworks = n;
  s.episodes = episodes;
  s.samples = r.records.size();
  s.mean_cost = r.f_mu;
  s.max_cost = r.f_max;
  const auto c = cost_ccdf(r.records);
  s.p50 = percentile(c, 50.0);
  s.p99 = percentile(c, 99.0);
  s.p999 = percentile(c, 99.9);
  double ul = 0, dl = 0, tx = 0, div = 0;
  long ul_n = 0, dl_n = 0;
  for (const auto& m : r.records) {
    if (m.ul_attempts > 0) {
      ul += m.ul_bler();
      ++ul_n;
    }
    if (m.dl_attempts > 0) {
      dl += m.dl_bler();
      ++dl_n;
    }
    tx += m.tx_fraction();
    div += m.diverged ? 1.0 : 0.0;
  }
  const auto n_rec = static_cast<double>(r.records.size());
  s.ul_bler = ul_n ? ul / static_cast<double>(ul_n) : 0.0;
  s.dl_bler = dl_n ? dl / static_cast<double>(dl_n) : 0.0;
  s.tx_fraction = tx / n_rec;
  s.diverged_fraction = div / n_rec;
  return s;
}

inline void print_summary(std::ostream& os, const PolicySummary& s) {
  char line[256];
  std::snprintf(line, sizeof line, "%-15s N=%-3d E=%-5d mean=%-12.5g p99=%-12.5g p99.9=%-12.5g%s ul_bler=%-10.4g "
                "dl_bler=%-10.4g tx=%-7.4f\n",
                s.policy.c_str(), s.n_subnetworks, s.episodes, s.mean_cost, s.p99.value, s.p999.value,
                s.p999.insufficient ? "*" : " ", s.ul_bler, s.dl_bler, s.tx_fraction);
  os << line;
}

inline void write_metrics(const fs::path& path, const std::vector<MetricsRecord>& records, int subbands) {
  CsvWriter w(path, {"episode", "subnetwork", "plant_type", "cost", "ul_bler", "dl_bler", "tx_fraction", "sb1_use",
                     "sb2_use", "sb3_use", "sensing", "messages", "diverged"});
  for (const auto& r : records) {
    std::vector<std::string> f{std::to_string(r.episode), std::to_string(r.subnetwork), std::to_string(r.plant_type),
                               format_double(r.cost),    format_double(r.ul_bler()),   format_double(r.dl_bler()),
                               format_double(r.tx_fraction())};
    for (int l = 0; l < 3; ++l)
      f.push_back(l < subbands ? std::to_string(r.subband_use[static_cast<std::size_t>(l)]) : "0");
    f.push_back(std::to_string(r.sensing));
    f.push_back(std::to_string(r.messages));
    f.push_back(r.diverged ? "1" : "0");
    w.row(f);
  }
}

inline void write_ccdf(const fs::path& path, const CcdfTable& t) {
  CsvWriter w(path, {"value", "ccdf"});
  for (std::size_t i = 0; i < t.size(); ++i) w.row({format_double(t.value[i]), format_double(t.ccdf[i])});
}

/// BLER samples: one per (episode, subnetwork, direction) with at least one attempt.
inline std::vector<double> bler_samples(const std::vector<MetricsRecord>& records, bool ul, bool dl) {
  std::vector<double> v;
  for (const auto& r : records) {
    if (ul && r.ul_attempts > 0) v.push_back(r.ul_bler());
    if (dl && r.dl_attempts > 0) v.push_back(r.dl_bler());
  }
  return v;
}

struct CommandOptions {
  fs::path out_dir = "out";
  std::optional<fs::path> params;
  std::vector<std::string> policies;  // compare
  std::vector<int> n_values;          // compare sweep
  bool quiet = false;
};

inline ExperimentConfig with_cadic_params(ExperimentConfig cfg, const CommandOptions& opt) {
  if (opt.params) apply_params(cfg, load_params(*opt.params));
  return cfg;
}

/// Monte Carlo evaluation of the configured policy.
inline PolicySummary cmd_simulate(ExperimentConfig cfg, const CommandOptions& opt, std::ostream& log) {
  if (cfg.simulation.episodes < 1) throw ConfigError("simulation.episodes", "must be >= 1");
  if (is_cadic(parse_policy(cfg.policy.id))) cfg = with_cadic_params(std::move(cfg), opt);
  validate(cfg);
  write_run_header(opt.out_dir, cfg);
  const auto ctx = SimContext::make(cfg);
  const auto res = run_montecarlo(ctx, cfg.simulation.episodes, 0, cfg.simulation.threads);
  write_metrics(opt.out_dir / "metrics.csv", res.records, cfg.radio.num_subbands);
  write_ccdf(opt.out_dir / "ccdf_cost.csv", cost_ccdf(res.records));
  write_ccdf(opt.out_dir / "ccdf_bler.csv", CcdfTable::from(bler_samples(res.records, true, true)));
  write_ccdf(opt.out_dir / "ccdf_bler_ul.csv", CcdfTable::from(bler_samples(res.records, true, false)));
  write_ccdf(opt.out_dir / "ccdf_bler_dl.csv", CcdfTable::from(bler_samples(res.records, false, true)));
  const auto s = summarize(cfg.policy.id, cfg.deployment.n_subnetworks, cfg.simulation.episodes, res);
  if (!opt.quiet) print_summary(log, s);
  return s;
}

/// Every policy on identical episode seeds, optionally for several N.
inline std::vector<PolicySummary> cmd_compare(ExperimentConfig cfg, const CommandOptions& opt, std::ostream& log) {
  if (cfg.simulation.episodes < 1) throw ConfigError("simulation.episodes", "must be >= 1");
  std::vector<std::string> policies = opt.policies.empty() ? policy_names() : opt.policies;
  if (policies.size() < 2) throw ConfigError("policy", "compare needs at least two policies");
  for (const auto& p : policies) parse_policy(p);
  std::vector<int> ns = opt.n_values.empty() ? std::vector<int>{cfg.deployment.n_subnetworks} : opt.n_values;
  cfg = with_cadic_params(std::move(cfg), opt);
  validate(cfg);
  write_run_header(opt.out_dir, cfg);

  std::vector<PolicySummary> all;
  CsvWriter w(opt.out_dir / "comparison.csv", {"policy", "n_subnetworks", "statistic", "value", "insufficient"});
  for (int n : ns) {
    for (const auto& p : policies) {
      ExperimentConfig c = cfg;
      c.deployment.n_subnetworks = n;
      c.policy.id = p;
      validate(c);
      const auto res = run_montecarlo(SimContext::make(c), c.simulation.episodes, 0, c.simulation.threads);
      const auto s = summarize(p, n, c.simulation.episodes, res);
      const std::string ns_str = std::to_string(n);
      auto emit = [&](const char* stat, double v, bool insufficient = false) {
        w.row({p, ns_str, stat, format_double(v), insufficient ? "1" : "0"});
      };
      emit("mean", s.mean_cost);
      emit("p50", s.p50.value, s.p50.insufficient);
      emit("p99", s.p99.value, s.p99.insufficient);
      emit("p99.9", s.p999.value, s.p999.insufficient);
      emit("max", s.max_cost);
      emit("ul_bler", s.ul_bler);
      emit("dl_bler", s.dl_bler);
      emit("tx_fraction", s.tx_fraction);
      emit("diverged_fraction", s.diverged_fraction);
      if (!opt.quiet) print_summary(log, s);
      all.push_back(s);
    }
  }
  return all;
}

/// Closed-loop cost versus inter-arrival time, 1..10 ms, under a perfect channel.
inline std::vector<std::vector<ResponsePoint>> cmd_plant_response(const ExperimentConfig& cfg, int seeds,
                                                                  const CommandOptions& opt, std::ostream& log) {
  if (seeds < 1) throw ConfigError("simulation.episodes", "must be >= 1");
  write_run_header(opt.out_dir, cfg);
  const auto models = make_plant_models(cfg);
  std::vector<int> frames;
  std::vector<int> ms;
  for (int m = 1; m <= 10; ++m) {
    ms.push_back(m);
    frames.push_back(interarrival_frames(m, cfg.simulation.frame_dt));
  }
  CsvWriter w(opt.out_dir / "response.csv",
              {"plant", "interarrival_ms", "interarrival_frames", "mean_cost", "diverged_runs", "runs"});
  std::vector<std::vector<ResponsePoint>> out;
  for (std::size_t p = 0; p < models.size(); ++p) {
    auto pts = plant_response_sweep(models[p], frames, cfg.simulation.horizon, seeds, cfg.simulation.seed,
                                    cfg.plants.init_range);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      w.row({std::to_string(p + 1), std::to_string(ms[i]), std::to_string(pts[i].interarrival_frames),
             format_double(pts[i].mean_cost), std::to_string(pts[i].diverged_runs), std::to_string(pts[i].runs)});
      if (!opt.quiet) {
        char line[160];
        std::snprintf(line, sizeof line, "plant %zu  %2d ms  mean=%-14.6g diverged=%d/%d\n", p + 1, ms[i],
                      pts[i].mean_cost, pts[i].diverged_runs, pts[i].runs);
        log << line;
      }
    }
    out.push_back(std::move(pts));
  }
  return out;
}

/// Trial objective: (f_mu, f_max) of CADIC with parameters y over E episodes. All trials
/// share the episode seeds, drawn from a master seed of their own.
inline Objective cadic_objective(const ExperimentConfig& cfg) {
  return [cfg](std::span<const double> y, int) {
    ExperimentConfig c = cfg;
    c.policy.k0 = y[0];
    c.policy.k1 = y[1];
    c.policy.z.assign(y.begin() + 2, y.end());
    c.simulation.seed = stream_seed(cfg.simulation.seed, "tuning");
    const auto r = run_montecarlo(SimContext::make(c), c.tuning.episodes_per_trial, 0, c.simulation.threads);
    return Objectives{r.f_mu, r.f_max};
  };
}

inline TuneResult cmd_tune(ExperimentConfig cfg, const CommandOptions& opt, std::ostream& log) {
  if (!is_cadic(parse_policy(cfg.policy.id))) throw ConfigError("policy.id", "tune applies to cadic or cadic_modified");
  validate(cfg);
  write_run_header(opt.out_dir, cfg);
  const SearchSpace space = SearchSpace::cadic(cfg.tuning);
  TuneSettings s{cfg.tuning.trials, cfg.tuning.startup, cfg.tuning.gamma, cfg.tuning.candidates};
  Engine rng = make_stream(cfg.simulation.seed, "motpe");
  const auto objective = cadic_objective(cfg);
  const TuneResult res = tune(
      space,
      [&](std::span<const double> y, int trial) {
        auto f = objective(y, trial);
        if (!opt.quiet) {
          char line[200];
          std::snprintf(line, sizeof line, "trial %4d  k0=%-8.4g k1=%-8.4g z1=%-8.4g z2=%-8.4g f_mu=%-12.5g f_max=%-12.5g\n",
                        trial, y[0], y[1], y[2], y.size() > 3 ? y[3] : 0.0, f[0], f[1]);
          log << line;
        }
        return f;
      },
      s, rng);

  std::vector<std::uint8_t> on_front(res.observations.size(), 0);
  for (std::size_t i : res.pareto) on_front[i] = 1;
  {
    std::ofstream out(opt.out_dir / "observations.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write observations.csv");
    out << "trial";
    for (const auto& d : space.dims) out << ',' << d.name;
    out << ",f_mu,f_max,startup,pareto\r\n";
    for (std::size_t i = 0; i < res.observations.size(); ++i) {
      const auto& o = res.observations[i];
      out << o.trial;
      for (double v : o.y) out << ',' << format_double(v);
      out << ',' << format_double(o.f[0]) << ',' << format_double(o.f[1]) << ',' << (o.startup ? 1 : 0) << ','
          << int{on_front[i]} << "\r\n";
    }
  }
  {
    CsvWriter t(opt.out_dir / "timing.csv", {"trial", "wall_seconds"});
    for (const auto& o : res.observations) t.row({std::to_string(o.trial), format_double(o.wall_seconds)});
  }

  auto point = [&](std::size_t i) {
    const auto& o = res.observations[i];
    return Json{{"trial", o.trial},
                {"k0", o.y[0]},
                {"k1", o.y[1]},
                {"z", std::vector<double>(o.y.begin() + 2, o.y.end())},
                {"f_mu", o.f[0]},
                {"f_max", o.f[1]}};
  };
  Json front = Json::array();
  for (std::size_t i : res.pareto) front.push_back(point(i));
  write_json(opt.out_dir / "pareto.json", Json{{"objectives", {"f_mu", "f_max"}}, {"points", front}});

  const auto& sel = res.observations[res.selected];
  write_json(opt.out_dir / "params.json",
             Json{{"k0", sel.y[0]},
                  {"k1", sel.y[1]},
                  {"z", std::vector<double>(sel.y.begin() + 2, sel.y.end())},
                  {"selection",
                   {{"rule", res.selection_rule},
                    {"trial", sel.trial},
                    {"f_mu", sel.f[0]},
                    {"f_max", sel.f[1]},
                    {"pareto_size", res.pareto.size()},
                    {"trials", cfg.tuning.trials},
                    {"startup", cfg.tuning.startup},
                    {"episodes_per_trial", cfg.tuning.episodes_per_trial}}},
                  {"tool_version", std::string(kToolVersion)}});
  if (!opt.quiet) {
    char line[200];
    std::snprintf(line, sizeof line, "selected trial %d: k0=%.6g k1=%.6g z1=%.6g z2=%.6g f_mu=%.6g f_max=%.6g\n",
                  sel.trial, sel.y[0], sel.y[1], sel.y[2], sel.y.size() > 3 ? sel.y[3] : 0.0, sel.f[0], sel.f[1]);
    log << line;
  }
  return res;
}

}  // namespace subnetsim
