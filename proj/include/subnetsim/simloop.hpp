#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "baselines.hpp"
#include "cadic.hpp"
#include "channel.hpp"
#include "config.hpp"
#include "geometry.hpp"
#include "phy.hpp"
#include "plant.hpp"
#include "rng.hpp"

namespace subnetsim {

enum class PolicyId { Ideal, Random, Fp, SeqGreedy, Sisa, SisaPc, Cadic, CadicModified };

inline const std::vector<std::string>& policy_names() {
  static const std::vector<std::string> names{"ideal", "random",  "fp",    "seq_greedy",
                                              "sisa",  "sisa_pc", "cadic", "cadic_modified"};
  return names;
}

inline std::string to_string(PolicyId id) { return policy_names()[static_cast<std::size_t>(id)]; }

inline PolicyId parse_policy(const std::string& s) {
  const auto& names = policy_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == s) return static_cast<PolicyId>(i);
  std::string valid;
  for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("policy.id", "unknown policy '" + s + "' (valid: " + valid + ")");
}

inline bool is_cadic(PolicyId id) { return id == PolicyId::Cadic || id == PolicyId::CadicModified; }

struct MetricsRecord {
  int episode = 0;
  int subnetwork = 0;
  int plant_type = 1;  // 1 or 2
  double cost = 0.0;   // finite-horizon control cost
  long due_frames = 0;
  long tx_frames = 0;
  long ul_attempts = 0;
  long ul_failures = 0;
  long dl_attempts = 0;
  long dl_failures = 0;
  std::vector<long> subband_use;
  long sensing = 0;
  long messages = 0;
  bool diverged = false;

  double ul_bler() const { return ul_attempts == 0 ? 0.0 : static_cast<double>(ul_failures) / ul_attempts; }
  double dl_bler() const { return dl_attempts == 0 ? 0.0 : static_cast<double>(dl_failures) / dl_attempts; }
  double tx_fraction() const { return due_frames == 0 ? 0.0 : static_cast<double>(tx_frames) / due_frames; }
};

/// Optional per-frame trace of one episode, indexed [frame][subnetwork].
struct EpisodeTrace {
  std::vector<std::vector<double>> chi;
  std::vector<std::vector<AllocationDecision>> decisions;
  std::vector<std::vector<std::uint8_t>> due;
  std::vector<std::vector<std::uint8_t>> loop_closed;
  std::vector<std::vector<LinkOutcome>> links;
  std::vector<std::vector<std::vector<double>>> rssi_used;  // averager means seen by each decision
};

/// Immutable per-run context shared by every episode.
struct SimContext {
  ExperimentConfig config;
  PolicyId policy = PolicyId::Ideal;
  std::vector<PlantModel> plants;  // [0] Plant 1, [1] Plant 2
  PhyParams phy;
  ChannelParams channel;
  DeploymentParams deployment;
  CadicParams cadic;
  double fading_correlation = 1.0;

  static SimContext make(const ExperimentConfig& cfg) {
    validate(cfg);
    SimContext c;
    c.config = cfg;
    c.policy = parse_policy(cfg.policy.id);
    c.plants = make_plant_models(cfg);
    c.phy = PhyParams::from(cfg.radio);
    c.channel = ChannelParams::from(cfg.channel);
    c.deployment = DeploymentParams::from(cfg.deployment);
    c.cadic.k0 = cfg.policy.k0;
    c.cadic.k1 = cfg.policy.k1;
    c.cadic.z = cfg.policy.z;
    c.cadic.p_max = c.phy.p_max;
    if (c.policy == PolicyId::CadicModified) c.cadic.gate_dbm = cfg.policy.gate_dbm;
    c.fading_correlation =
        jakes_correlation(doppler_hz(cfg.deployment.speed, cfg.channel.fc_ghz), cfg.simulation.frame_dt);
    return c;
  }
};

/// One Monte Carlo episode. All randomness comes from named sub-streams of
/// (master seed, episode); only the "policy" and "bler" streams depend on the policy,
/// so competing policies see identical deployments, channels and plant noise.
inline std::vector<MetricsRecord> run_episode(const SimContext& ctx, int episode, EpisodeTrace* trace = nullptr) {
  const auto& cfg = ctx.config;
  const std::uint64_t seed = cfg.simulation.seed;
  const auto ep = static_cast<std::uint64_t>(episode);
  const int N = cfg.deployment.n_subnetworks;
  const auto n = static_cast<std::size_t>(N);
  const int L = ctx.phy.grid.subbands;
  const int K = ctx.phy.grid.blocks_per_subband;
  const int T = cfg.simulation.horizon;
  const double dt = cfg.simulation.frame_dt;
  const double p_max = ctx.phy.p_max;
  const PolicyId policy = ctx.policy;
  const bool radio = policy != PolicyId::Ideal;

  Engine deploy_rng = make_stream(seed, "deployment", ep);
  Engine mobility_rng = make_stream(seed, "mobility", ep);
  Engine shadow_rng = make_stream(seed, "shadowing", ep);
  Engine los_rng = make_stream(seed, "los", ep);
  Engine fading_rng = make_stream(seed, "fading", ep);
  Engine plant_type_rng = make_stream(seed, "plant-type", ep);
  Engine plant_init_rng = make_stream(seed, "plant-init", ep);
  Engine plant_noise_rng = make_stream(seed, "plant-noise", ep);
  Engine policy_rng = make_stream(seed, "policy", ep);
  Engine bler_rng = make_stream(seed, "bler", ep);

  Deployment deployment = init_deployment(N, ctx.deployment, deploy_rng);
  MobilityState mobility = init_mobility(deployment, mobility_rng);
  std::optional<ChannelState> channel;
  if (radio)
    channel.emplace(ctx.channel, deployment, L, K, ctx.fading_correlation, shadow_rng, los_rng, fading_rng);

  std::vector<const PlantModel*> model(n);
  std::vector<int> phase(n);
  std::vector<PlantState> state;
  std::vector<MetricsRecord> rec(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool plant1 = uniform01(plant_type_rng) < cfg.plants.plant1_fraction;
    model[i] = &ctx.plants[plant1 ? 0 : 1];
    phase[i] = static_cast<int>(uniform_index(plant_type_rng, static_cast<std::size_t>(model[i]->interarrival_frames)));
    state.push_back(initial_state(*model[i], plant_init_rng, cfg.plants.init_range));
    rec[i].episode = episode;
    rec[i].subnetwork = static_cast<int>(i);
    rec[i].plant_type = plant1 ? 1 : 2;
    rec[i].subband_use.assign(static_cast<std::size_t>(L), 0);
  }

  std::vector<InterferenceAverager> averager(n, InterferenceAverager(L));
  std::vector<int> initial_subband(n, 0);
  std::vector<int> assignment(n, 0);
  std::vector<double> pc_power(n, p_max);
  if (is_cadic(policy))
    for (auto& s : initial_subband) s = static_cast<int>(uniform_index(policy_rng, static_cast<std::size_t>(L)));
  if (policy == PolicyId::Sisa || policy == PolicyId::SisaPc)
    for (auto& a : assignment) a = static_cast<int>(uniform_index(policy_rng, static_cast<std::size_t>(L)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<std::vector<double>> costs(n, std::vector<double>(static_cast<std::size_t>(T)));
  std::vector<AllocationDecision> decisions(n, AllocationDecision{p_max, SubbandMask::single(L, 0), true});
  std::vector<std::uint8_t> due(n), closed(n);
  std::vector<double> chi(n);
  std::vector<long> sensing_round(n);
  if (trace) *trace = EpisodeTrace{};

  for (int t = 0; t < T; ++t) {
    if (t > 0 && radio) {
      step_mobility(deployment, mobility, dt, mobility_rng);
      channel->update_large_scale(deployment, los_rng);
      channel->step_fading(fading_rng);
    }

    for (std::size_t i = 0; i < n; ++i) {
      chi[i] = current_cost(*model[i], state[i]);
      costs[i][static_cast<std::size_t>(t)] = chi[i];
      due[i] = (t + phase[i]) % model[i]->interarrival_frames == 0 ? 1 : 0;
    }

    // Centralised / sequential allocations run on frames that are multiples of the period.
    const bool realloc = t % cfg.policy.realloc_period == 0;
    if (realloc && (policy == PolicyId::SeqGreedy || policy == PolicyId::Sisa || policy == PolicyId::SisaPc)) {
      if (policy == PolicyId::SeqGreedy) {
        const CrossGainMatrix g = measure_cross_gains(*channel);
        assignment = seq_greedy(g, order, p_max, K, ctx.phy.noise_block);
        for (auto& r : rec) {
          r.sensing += L;
          r.messages += 1;  // reference signal on the chosen sub-band
        }
      } else {
        std::fill(sensing_round.begin(), sensing_round.end(), 0);
        const CrossGainMatrix g = measure_cross_gains(*channel, &sensing_round);
        assignment = sisa(g, assignment, cfg.policy.sisa_iterations).assignment;
        if (policy == PolicyId::SisaPc) pc_power = sisa_pc(g, assignment, p_max, K, ctx.phy.noise_block).power;
        for (std::size_t i = 0; i < n; ++i) {
          rec[i].sensing += sensing_round[i];
          rec[i].messages += static_cast<long>(L) * N + 1;  // gain report + decision
        }
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      if (!due[i]) continue;
      switch (policy) {
        case PolicyId::Ideal:
        case PolicyId::Fp:
          decisions[i] = fp_decision(L, p_max);
          break;
        case PolicyId::Random:
          decisions[i] = random_decision(L, p_max, policy_rng);
          break;
        case PolicyId::SeqGreedy:
        case PolicyId::Sisa:
          decisions[i] = {p_max, SubbandMask::single(L, assignment[i]), true};
          break;
        case PolicyId::SisaPc:
          decisions[i] = {pc_power[i], SubbandMask::single(L, assignment[i]), true};
          break;
        case PolicyId::Cadic:
        case PolicyId::CadicModified: {
          double observed = chi[i];
          if (cfg.policy.chi_noise_std > 0)
            observed = std::max(0.0, observed * (1.0 + cfg.policy.chi_noise_std * standard_normal(policy_rng)));
          decisions[i] = cadic_decide(observed, averager[i], ctx.cadic, initial_subband[i]);
          rec[i].sensing += L;
          break;
        }
      }
      ++rec[i].due_frames;
      if (decisions[i].transmit) {
        ++rec[i].tx_frames;
        for (int l = 0; l < L; ++l)
          if (decisions[i].subbands.test(l)) ++rec[i].subband_use[static_cast<std::size_t>(l)];
      }
    }

    TddResult round;
    if (radio) {
      round = tdd_round(*channel, ctx.phy, decisions, due, bler_rng, is_cadic(policy));
    } else {
      round.links.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        if (due[i]) round.links[i] = {true, true, true, true};
    }

    bool any_ul = false;
    for (std::size_t i = 0; i < n; ++i) {
      const LinkOutcome& o = round.links[i];
      any_ul = any_ul || o.ul_attempted;
      if (o.ul_attempted) {
        ++rec[i].ul_attempts;
        if (!o.ul_ok) ++rec[i].ul_failures;
      }
      if (o.dl_attempted) {
        ++rec[i].dl_attempts;
        if (!o.dl_ok) ++rec[i].dl_failures;
      }
      closed[i] = due[i] && o.loop_closed() ? 1 : 0;
    }

    if (trace) {
      trace->chi.push_back(chi);
      trace->decisions.push_back(decisions);
      trace->due.push_back(due);
      trace->loop_closed.push_back(closed);
      trace->links.push_back(round.links);
      std::vector<std::vector<double>> seen;
      for (const auto& a : averager) seen.push_back(a.mean());
      trace->rssi_used.push_back(std::move(seen));
    }

    for (std::size_t i = 0; i < n; ++i) step(*model[i], state[i], closed[i] != 0, plant_noise_rng);

    // Measurements of frame t only reach decisions of frame t + 1.
    if (is_cadic(policy) && any_ul)
      for (std::size_t i = 0; i < n; ++i) averager[i].update(round.rssi[i]);
  }

  for (std::size_t i = 0; i < n; ++i) {
    rec[i].cost = finite_horizon_cost(costs[i]);
    rec[i].diverged = state[i].diverged;
  }
  return rec;
}

struct MonteCarloResult {
  std::vector<MetricsRecord> records;  // episode-major, then subnetwork
  double f_mu = 0.0;
  double f_max = 0.0;
};

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

/// Runs episodes [first_episode, first_episode + episodes) on a worker pool. Results are
/// merged in episode order, so output is independent of the thread count.
inline MonteCarloResult run_montecarlo(const SimContext& ctx, int episodes, int first_episode = 0, int threads = 1) {
  if (episodes < 1) throw std::invalid_argument("run_montecarlo: episodes must be >= 1");
  std::vector<std::vector<MetricsRecord>> per_episode(static_cast<std::size_t>(episodes));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (int e = next++; e < episodes; e = next++) {
      try {
        per_episode[static_cast<std::size_t>(e)] = run_episode(ctx, first_episode + e);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int workers = std::min(resolve_threads(threads), episodes);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  MonteCarloResult res;
  for (auto& ep : per_episode)
    for (auto& r : ep) res.records.push_back(std::move(r));
  double sum = 0.0;
  res.f_max = -std::numeric_limits<double>::infinity();
  for (const auto& r : res.records) {
    sum += r.cost;
    res.f_max = std::max(res.f_max, r.cost);
  }
  res.f_mu = sum / static_cast<double>(res.records.size());
  return res;
}

/// Empirical complementary CDF: value[i] ascending, ccdf[i] = (n - i) / n.
struct CcdfTable {
  std::vector<double> value;
  std::vector<double> ccdf;

  static CcdfTable from(std::vector<double> samples) {
    CcdfTable t;
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<double>(samples.size());
    t.value = std::move(samples);
    t.ccdf.resize(t.value.size());
    for (std::size_t i = 0; i < t.value.size(); ++i) t.ccdf[i] = (n - static_cast<double>(i)) / n;
    return t;
  }
  std::size_t size() const { return value.size(); }
};

struct PercentileValue {
  double value = 0.0;
  bool insufficient = false;  // fewer than 10 / (1 - p/100) samples
};

/// Nearest-rank percentile.
inline PercentileValue percentile(const CcdfTable& t, double p) {
  if (t.value.empty()) throw std::invalid_argument("percentile: no samples");
  if (p <= 0.0 || p > 100.0) throw std::invalid_argument("percentile: p must lie in (0, 100]");
  const auto n = static_cast<double>(t.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, t.size());
  PercentileValue out{t.value[rank - 1], false};
  if (p < 100.0) out.insufficient = n < 10.0 / (1.0 - p / 100.0) * (1.0 - 1e-9);
  return out;
}

inline CcdfTable cost_ccdf(const std::vector<MetricsRecord>& records) {
  std::vector<double> v;
  v.reserve(records.size());
  for (const auto& r : records) v.push_back(r.cost);
  return CcdfTable::from(std::move(v));
}

}  // namespace subnetsim
