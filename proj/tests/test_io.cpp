#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "subnetsim/commands.hpp"

using namespace subnetsim;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("subnetsim_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string key_of(const Json& j) {
  try {
    validate(from_json(j));
  } catch (const ConfigError& e) {
    return e.key_path();
  }
  return "";
}

}  // namespace

TEST_CASE("defaults") {
  const ExperimentConfig c;
  CHECK(c.deployment.n_subnetworks == 15);
  CHECK(c.deployment.area_side == 30.0);
  CHECK(c.deployment.radius == 2.0);
  CHECK(c.deployment.speed == 3.0);
  CHECK(c.channel.fc_ghz == 10.0);
  CHECK(c.radio.num_subbands == 3);
  CHECK(c.radio.blocks_per_subband == 3);
  CHECK(c.radio.p_max_dbm == 0.0);
  CHECK(c.radio.ul_bytes == 64);
  CHECK(c.radio.dl_bytes == 32);
  CHECK(c.plants.plant1.interarrival_ms == 1.0);
  CHECK(c.plants.plant2.interarrival_ms == 3.0);
  CHECK(c.policy.k0 == 0.49);
  CHECK(c.policy.k1 == 16.0);
  CHECK(c.policy.z == std::vector<double>{100.0, 186.0});
  CHECK(c.simulation.horizon == 1000);
  CHECK(c.tuning.trials == 400);
  CHECK(c.tuning.startup == 100);
  CHECK(c.tuning.episodes_per_trial == 20);
  CHECK(c.tuning.gamma == 0.1);
  CHECK(c.tuning.candidates == 24);
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("config survives a json round trip") {
  ExperimentConfig c;
  c.deployment.n_subnetworks = 7;
  c.policy.id = "sisa_pc";
  c.policy.z = {90.0, 200.5};
  c.simulation.seed = 123456789012345ULL;
  c.plants.sigma_scale = 0.02;
  const ExperimentConfig back = from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
}

TEST_CASE("config errors name the offending key") {
  CHECK(key_of(Json{{"deployment", {{"n_subnetworks", 0}}}}) == "deployment.n_subnetworks");
  CHECK(key_of(Json{{"deployment", {{"n_subnetwork", 5}}}}) == "deployment.n_subnetwork");
  CHECK(key_of(Json{{"radio", {{"ul_bytes", "many"}}}}) == "radio.ul_bytes");
  CHECK(key_of(Json{{"policy", {{"z", {200.0, 100.0}}}}}) == "policy.z");
  CHECK(key_of(Json{{"plants", {{"plant2", {{"interarrival_ms", -1.0}}}}}}) == "plants.plant2.interarrival_ms");
  CHECK(key_of(Json{{"tuning", {{"startup", 500}}}}) == "tuning.startup");
  CHECK(key_of(Json{{"bogus", 1}}) == "config.bogus");
  CHECK(key_of(Json{{"simulation", {{"seed", 5}}}}).empty());
}

TEST_CASE("doubles are written in shortest round-trip form") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5e17}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.25) == "0.25");
  CHECK(format_double(INFINITY) == "inf");
  CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("csv quoting and record breaks") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  const fs::path dir = scratch("csv");
  {
    CsvWriter w(dir / "x.csv", {"a", "b"});
    w.row({"1", "x,y"});
    CHECK_THROWS(w.row({"1"}));
  }
  CHECK(slurp(dir / "x.csv") == "a,b\r\n1,\"x,y\"\r\n");
}

TEST_CASE("run header echoes the resolved config without the thread count") {
  const fs::path dir = scratch("header");
  ExperimentConfig c;
  c.simulation.threads = 4;
  c.deployment.n_subnetworks = 9;
  write_run_header(dir, c);
  const Json j = read_json(dir / "config.json", "config");
  CHECK_FALSE(j["simulation"].contains("threads"));
  CHECK(j["deployment"]["n_subnetworks"] == 9);
  CHECK(from_json(j).deployment.n_subnetworks == 9);
  CHECK(slurp(dir / "version.txt") == "subnetsim " + std::string(kToolVersion) + "\n");
}

TEST_CASE("params file") {
  const fs::path dir = scratch("params");
  try {
    load_params(dir / "missing.json");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(e.key_path() == "params.json");
  }
  write_json(dir / "p.json", Json{{"k0", 0.3}, {"k1", 12.0}, {"z", {80.0, 150.0}}});
  const auto p = load_params(dir / "p.json");
  CHECK(p.k0 == 0.3);
  CHECK(p.z == std::vector<double>{80.0, 150.0});
  write_json(dir / "bad.json", Json{{"k0", 0.3}});
  CHECK_THROWS_AS(load_params(dir / "bad.json"), ConfigError);
  ExperimentConfig c;
  apply_params(c, p);
  CHECK(c.policy.k1 == 12.0);
}

TEST_CASE("ccdf file layout") {
  const fs::path dir = scratch("ccdf");
  write_ccdf(dir / "c.csv", CcdfTable::from({3.0, 1.0, 2.0, 2.0}));
  CHECK(slurp(dir / "c.csv") == "value,ccdf\r\n1,1\r\n2,0.75\r\n2,0.5\r\n3,0.25\r\n");
}
