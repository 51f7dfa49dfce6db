#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace subnetsim {

using Json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key_path, const std::string& what)
      : std::runtime_error(key_path + ": " + what), key_path_(std::move(key_path)) {}
  const std::string& key_path() const noexcept { return key_path_; }

 private:
  std::string key_path_;
};

using Matrix = std::vector<std::vector<double>>;

struct DeploymentConfig {
  int n_subnetworks = 15;
  double area_side = 30.0;       // m
  double radius = 2.0;           // m
  double min_sensor_distance = 1.0;
  double speed = 3.0;            // m/s
};

struct ChannelConfig {
  double fc_ghz = 10.0;
  double clutter_density = 0.35;  // r
  double clutter_size = 10.0;     // ds, m
  double shadow_std_los = 4.0;    // dB
  double shadow_std_nlos = 5.7;   // dB
  double correlation_distance = 10.0;
  double shadow_grid_spacing = 1.0;
  double los_resample_distance = 1.0;
  double min_distance = 1.0;      // path-loss distance floor
};

struct RadioConfig {
  double p_max_dbm = 0.0;
  double scs_hz = 480e3;
  int num_subbands = 3;           // L
  int blocks_per_subband = 3;     // K
  int subcarriers_per_block = 12;
  double noise_figure_db = 10.0;
  int ul_bytes = 64;
  int dl_bytes = 32;
  int metadata_bits = 0;
  double tau_ul = 1e-4;           // s
  double tau_dl = 1e-4;           // s
};

struct PlantTypeConfig {
  Matrix A;
  Matrix B;
  double interarrival_ms = 1.0;
};

struct PlantsConfig {
  PlantTypeConfig plant1{{{0, 1, 0, 0}, {0, 0, -1.4, 0}, {0, 0, 0, 1}, {0, 0, 168, 0}},
                         {{0}, {1.90}, {0}, {-28.57}},
                         1.0};
  PlantTypeConfig plant2{{{0, 1, 0, 0}, {0, 0, -1.4, 0}, {0, 0, 0, 1}, {0, 0, 84, 0}},
                         {{0}, {1.90}, {0}, {-14.29}},
                         3.0};
  Matrix Q{{1, 0, 0, 0}, {0, 10, 0, 0}, {0, 0, 10, 0}, {0, 0, 0, 100}};
  Matrix R{{0.1}};
  double sigma_scale = 0.01;      // Sigma = sigma_scale * I
  double divergence_bound = 1e6;
  double init_range = 0.2;        // x0 ~ U(-init_range, init_range)^q
  double plant1_fraction = 0.5;
  std::string open_loop_semantics = "as-written";  // or "physical"
};

struct PolicyConfig {
  std::string id = "cadic";
  double k0 = 0.49;
  double k1 = 16.0;
  std::vector<double> z{100.0, 186.0};
  double gate_dbm = -25.0;        // used by cadic_modified
  int realloc_period = 10;        // frames between centralized / sequential runs
  int sisa_iterations = 10;
  double chi_noise_std = 0.0;     // relative observation noise on chi, 0 = exact
};

struct SimulationConfig {
  int horizon = 1000;             // frames
  double frame_dt = 1e-3;         // s
  int episodes = 100;
  std::uint64_t seed = 1;
  int threads = 0;                // 0 = hardware concurrency
};

struct TuningConfig {
  int trials = 400;
  int startup = 100;
  int episodes_per_trial = 20;
  int candidates = 24;
  double gamma = 0.1;
  std::vector<double> z_upper{200.0, 300.0};
  double k0_upper = 1.0;
  double k1_upper = 100.0;
};

struct ExperimentConfig {
  DeploymentConfig deployment;
  ChannelConfig channel;
  RadioConfig radio;
  PlantsConfig plants;
  PolicyConfig policy;
  SimulationConfig simulation;
  TuningConfig tuning;
  std::string output_dir = "out";
};

namespace detail {

template <typename T>
void read_key(const Json& j, const std::string& section, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(section + "." + key, e.what());
  }
}

inline void check_known(const Json& j, const std::string& section,
                        std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(section, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw ConfigError(section + "." + it.key(), "unknown key");
  }
}

inline void check_matrix(const Matrix& m, const std::string& path, std::size_t rows, std::size_t cols) {
  if (m.size() != rows) throw ConfigError(path, "expected " + std::to_string(rows) + " rows");
  for (const auto& row : m)
    if (row.size() != cols) throw ConfigError(path, "expected " + std::to_string(cols) + " columns");
}

}  // namespace detail

inline Json to_json(const ExperimentConfig& c) {
  auto plant = [](const PlantTypeConfig& p) {
    return Json{{"A", p.A}, {"B", p.B}, {"interarrival_ms", p.interarrival_ms}};
  };
  return Json{
      {"deployment",
       {{"n_subnetworks", c.deployment.n_subnetworks},
        {"area_side", c.deployment.area_side},
        {"radius", c.deployment.radius},
        {"min_sensor_distance", c.deployment.min_sensor_distance},
        {"speed", c.deployment.speed}}},
      {"channel",
       {{"fc_ghz", c.channel.fc_ghz},
        {"clutter_density", c.channel.clutter_density},
        {"clutter_size", c.channel.clutter_size},
        {"shadow_std_los", c.channel.shadow_std_los},
        {"shadow_std_nlos", c.channel.shadow_std_nlos},
        {"correlation_distance", c.channel.correlation_distance},
        {"shadow_grid_spacing", c.channel.shadow_grid_spacing},
        {"los_resample_distance", c.channel.los_resample_distance},
        {"min_distance", c.channel.min_distance}}},
      {"radio",
       {{"p_max_dbm", c.radio.p_max_dbm},
        {"scs_hz", c.radio.scs_hz},
        {"num_subbands", c.radio.num_subbands},
        {"blocks_per_subband", c.radio.blocks_per_subband},
        {"subcarriers_per_block", c.radio.subcarriers_per_block},
        {"noise_figure_db", c.radio.noise_figure_db},
        {"ul_bytes", c.radio.ul_bytes},
        {"dl_bytes", c.radio.dl_bytes},
        {"metadata_bits", c.radio.metadata_bits},
        {"tau_ul", c.radio.tau_ul},
        {"tau_dl", c.radio.tau_dl}}},
      {"plants",
       {{"plant1", plant(c.plants.plant1)},
        {"plant2", plant(c.plants.plant2)},
        {"Q", c.plants.Q},
        {"R", c.plants.R},
        {"sigma_scale", c.plants.sigma_scale},
        {"divergence_bound", c.plants.divergence_bound},
        {"init_range", c.plants.init_range},
        {"plant1_fraction", c.plants.plant1_fraction},
        {"open_loop_semantics", c.plants.open_loop_semantics}}},
      {"policy",
       {{"id", c.policy.id},
        {"k0", c.policy.k0},
        {"k1", c.policy.k1},
        {"z", c.policy.z},
        {"gate_dbm", c.policy.gate_dbm},
        {"realloc_period", c.policy.realloc_period},
        {"sisa_iterations", c.policy.sisa_iterations},
        {"chi_noise_std", c.policy.chi_noise_std}}},
      {"simulation",
       {{"horizon", c.simulation.horizon},
        {"frame_dt", c.simulation.frame_dt},
        {"episodes", c.simulation.episodes},
        {"seed", c.simulation.seed},
        {"threads", c.simulation.threads}}},
      {"tuning",
       {{"trials", c.tuning.trials},
        {"startup", c.tuning.startup},
        {"episodes_per_trial", c.tuning.episodes_per_trial},
        {"candidates", c.tuning.candidates},
        {"gamma", c.tuning.gamma},
        {"z_upper", c.tuning.z_upper},
        {"k0_upper", c.tuning.k0_upper},
        {"k1_upper", c.tuning.k1_upper}}},
      {"output_dir", c.output_dir}};
}

/// Checks cross-field constraints. Throws ConfigError naming the offending key.
inline void validate(const ExperimentConfig& c) {
  using detail::check_matrix;
  const auto& d = c.deployment;
  if (d.n_subnetworks < 1) throw ConfigError("deployment.n_subnetworks", "must be >= 1");
  if (d.radius <= 0 || d.area_side <= 2 * d.radius)
    throw ConfigError("deployment.area_side", "must exceed twice the radius");
  if (d.min_sensor_distance < 0 || d.min_sensor_distance > d.radius)
    throw ConfigError("deployment.min_sensor_distance", "must lie in [0, radius]");
  if (d.speed < 0) throw ConfigError("deployment.speed", "must be >= 0");
  if (c.channel.fc_ghz <= 0) throw ConfigError("channel.fc_ghz", "must be > 0");
  if (c.channel.clutter_density <= 0 || c.channel.clutter_density >= 1)
    throw ConfigError("channel.clutter_density", "must lie in (0, 1)");
  if (c.channel.correlation_distance <= 0) throw ConfigError("channel.correlation_distance", "must be > 0");
  if (c.channel.shadow_grid_spacing <= 0) throw ConfigError("channel.shadow_grid_spacing", "must be > 0");
  const auto& r = c.radio;
  if (r.num_subbands < 1) throw ConfigError("radio.num_subbands", "must be >= 1");
  if (r.blocks_per_subband < 1) throw ConfigError("radio.blocks_per_subband", "must be >= 1");
  if (r.ul_bytes < 1) throw ConfigError("radio.ul_bytes", "must be >= 1");
  if (r.dl_bytes < 1) throw ConfigError("radio.dl_bytes", "must be >= 1");
  if (r.metadata_bits < 0) throw ConfigError("radio.metadata_bits", "must be >= 0");
  const auto& p = c.plants;
  if (p.Q.empty()) throw ConfigError("plants.Q", "must be non-empty");
  const std::size_t q = p.Q.size();
  check_matrix(p.Q, "plants.Q", q, q);
  if (p.R.empty()) throw ConfigError("plants.R", "must be non-empty");
  const std::size_t in = p.R.size();
  check_matrix(p.R, "plants.R", in, in);
  for (const auto& [name, pt] : {std::pair{"plant1", &p.plant1}, std::pair{"plant2", &p.plant2}}) {
    check_matrix(pt->A, std::string("plants.") + name + ".A", q, q);
    check_matrix(pt->B, std::string("plants.") + name + ".B", q, in);
    if (pt->interarrival_ms <= 0)
      throw ConfigError(std::string("plants.") + name + ".interarrival_ms", "must be > 0");
  }
  if (p.sigma_scale < 0) throw ConfigError("plants.sigma_scale", "must be >= 0");
  if (p.plant1_fraction < 0 || p.plant1_fraction > 1)
    throw ConfigError("plants.plant1_fraction", "must lie in [0, 1]");
  if (p.open_loop_semantics != "as-written" && p.open_loop_semantics != "physical")
    throw ConfigError("plants.open_loop_semantics", "must be 'as-written' or 'physical'");
  if (static_cast<int>(c.policy.z.size()) != r.num_subbands - 1)
    throw ConfigError("policy.z", "needs num_subbands - 1 thresholds");
  for (std::size_t i = 1; i < c.policy.z.size(); ++i)
    if (!(c.policy.z[i] > c.policy.z[i - 1])) throw ConfigError("policy.z", "must be strictly increasing");
  if (c.policy.realloc_period < 1) throw ConfigError("policy.realloc_period", "must be >= 1");
  if (c.policy.sisa_iterations < 1) throw ConfigError("policy.sisa_iterations", "must be >= 1");
  if (c.simulation.horizon < 1) throw ConfigError("simulation.horizon", "must be >= 1");
  if (c.simulation.frame_dt <= 0) throw ConfigError("simulation.frame_dt", "must be > 0");
  if (c.simulation.episodes < 1) throw ConfigError("simulation.episodes", "must be >= 1");
  if (c.simulation.threads < 0) throw ConfigError("simulation.threads", "must be >= 0");
  const auto& t = c.tuning;
  if (t.trials < 1) throw ConfigError("tuning.trials", "must be >= 1");
  if (t.startup < 1 || t.startup > t.trials) throw ConfigError("tuning.startup", "must lie in [1, trials]");
  if (t.episodes_per_trial < 1) throw ConfigError("tuning.episodes_per_trial", "must be >= 1");
  if (t.candidates < 1) throw ConfigError("tuning.candidates", "must be >= 1");
  if (t.gamma <= 0 || t.gamma > 1) throw ConfigError("tuning.gamma", "must lie in (0, 1]");
  if (static_cast<int>(t.z_upper.size()) != r.num_subbands - 1)
    throw ConfigError("tuning.z_upper", "needs num_subbands - 1 bounds");
}

inline ExperimentConfig from_json(const Json& j) {
  using detail::check_known;
  using detail::read_key;
  ExperimentConfig c;
  check_known(j, "config",
              {"deployment", "channel", "radio", "plants", "policy", "simulation", "tuning", "output_dir"});
  if (j.contains("deployment")) {
    const auto& s = j["deployment"];
    check_known(s, "deployment", {"n_subnetworks", "area_side", "radius", "min_sensor_distance", "speed"});
    read_key(s, "deployment", "n_subnetworks", c.deployment.n_subnetworks);
    read_key(s, "deployment", "area_side", c.deployment.area_side);
    read_key(s, "deployment", "radius", c.deployment.radius);
    read_key(s, "deployment", "min_sensor_distance", c.deployment.min_sensor_distance);
    read_key(s, "deployment", "speed", c.deployment.speed);
  }
  if (j.contains("channel")) {
    const auto& s = j["channel"];
    check_known(s, "channel",
                {"fc_ghz", "clutter_density", "clutter_size", "shadow_std_los", "shadow_std_nlos",
                 "correlation_distance", "shadow_grid_spacing", "los_resample_distance", "min_distance"});
    read_key(s, "channel", "fc_ghz", c.channel.fc_ghz);
    read_key(s, "channel", "clutter_density", c.channel.clutter_density);
    read_key(s, "channel", "clutter_size", c.channel.clutter_size);
    read_key(s, "channel", "shadow_std_los", c.channel.shadow_std_los);
    read_key(s, "channel", "shadow_std_nlos", c.channel.shadow_std_nlos);
    read_key(s, "channel", "correlation_distance", c.channel.correlation_distance);
    read_key(s, "channel", "shadow_grid_spacing", c.channel.shadow_grid_spacing);
    read_key(s, "channel", "los_resample_distance", c.channel.los_resample_distance);
    read_key(s, "channel", "min_distance", c.channel.min_distance);
  }
  if (j.contains("radio")) {
    const auto& s = j["radio"];
    check_known(s, "radio",
                {"p_max_dbm", "scs_hz", "num_subbands", "blocks_per_subband", "subcarriers_per_block",
                 "noise_figure_db", "ul_bytes", "dl_bytes", "metadata_bits", "tau_ul", "tau_dl"});
    read_key(s, "radio", "p_max_dbm", c.radio.p_max_dbm);
    read_key(s, "radio", "scs_hz", c.radio.scs_hz);
    read_key(s, "radio", "num_subbands", c.radio.num_subbands);
    read_key(s, "radio", "blocks_per_subband", c.radio.blocks_per_subband);
    read_key(s, "radio", "subcarriers_per_block", c.radio.subcarriers_per_block);
    read_key(s, "radio", "noise_figure_db", c.radio.noise_figure_db);
    read_key(s, "radio", "ul_bytes", c.radio.ul_bytes);
    read_key(s, "radio", "dl_bytes", c.radio.dl_bytes);
    read_key(s, "radio", "metadata_bits", c.radio.metadata_bits);
    read_key(s, "radio", "tau_ul", c.radio.tau_ul);
    read_key(s, "radio", "tau_dl", c.radio.tau_dl);
  }
  if (j.contains("plants")) {
    const auto& s = j["plants"];
    check_known(s, "plants",
                {"plant1", "plant2", "Q", "R", "sigma_scale", "divergence_bound", "init_range",
                 "plant1_fraction", "open_loop_semantics"});
    for (auto [name, pt] : {std::pair{"plant1", &c.plants.plant1}, std::pair{"plant2", &c.plants.plant2}}) {
      if (!s.contains(name)) continue;
      const std::string path = std::string("plants.") + name;
      check_known(s[name], path, {"A", "B", "interarrival_ms"});
      read_key(s[name], path, "A", pt->A);
      read_key(s[name], path, "B", pt->B);
      read_key(s[name], path, "interarrival_ms", pt->interarrival_ms);
    }
    read_key(s, "plants", "Q", c.plants.Q);
    read_key(s, "plants", "R", c.plants.R);
    read_key(s, "plants", "sigma_scale", c.plants.sigma_scale);
    read_key(s, "plants", "divergence_bound", c.plants.divergence_bound);
    read_key(s, "plants", "init_range", c.plants.init_range);
    read_key(s, "plants", "plant1_fraction", c.plants.plant1_fraction);
    read_key(s, "plants", "open_loop_semantics", c.plants.open_loop_semantics);
  }
  if (j.contains("policy")) {
    const auto& s = j["policy"];
    check_known(s, "policy",
                {"id", "k0", "k1", "z", "gate_dbm", "realloc_period", "sisa_iterations", "chi_noise_std"});
    read_key(s, "policy", "id", c.policy.id);
    read_key(s, "policy", "k0", c.policy.k0);
    read_key(s, "policy", "k1", c.policy.k1);
    read_key(s, "policy", "z", c.policy.z);
    read_key(s, "policy", "gate_dbm", c.policy.gate_dbm);
    read_key(s, "policy", "realloc_period", c.policy.realloc_period);
    read_key(s, "policy", "sisa_iterations", c.policy.sisa_iterations);
    read_key(s, "policy", "chi_noise_std", c.policy.chi_noise_std);
  }
  if (j.contains("simulation")) {
    const auto& s = j["simulation"];
    check_known(s, "simulation", {"horizon", "frame_dt", "episodes", "seed", "threads"});
    read_key(s, "simulation", "horizon", c.simulation.horizon);
    read_key(s, "simulation", "frame_dt", c.simulation.frame_dt);
    read_key(s, "simulation", "episodes", c.simulation.episodes);
    read_key(s, "simulation", "seed", c.simulation.seed);
    read_key(s, "simulation", "threads", c.simulation.threads);
  }
  if (j.contains("tuning")) {
    const auto& s = j["tuning"];
    check_known(s, "tuning",
                {"trials", "startup", "episodes_per_trial", "candidates", "gamma", "z_upper", "k0_upper",
                 "k1_upper"});
    read_key(s, "tuning", "trials", c.tuning.trials);
    read_key(s, "tuning", "startup", c.tuning.startup);
    read_key(s, "tuning", "episodes_per_trial", c.tuning.episodes_per_trial);
    read_key(s, "tuning", "candidates", c.tuning.candidates);
    read_key(s, "tuning", "gamma", c.tuning.gamma);
    read_key(s, "tuning", "z_upper", c.tuning.z_upper);
    read_key(s, "tuning", "k0_upper", c.tuning.k0_upper);
    read_key(s, "tuning", "k1_upper", c.tuning.k1_upper);
  }
  if (j.contains("output_dir")) read_key(j, "config", "output_dir", c.output_dir);
  validate(c);
  return c;
}

}  // namespace subnetsim
