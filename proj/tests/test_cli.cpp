#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#ifndef SUBNETSIM_CLI
#error "SUBNETSIM_CLI must point at the built binary"
#endif

namespace fs = std::filesystem;

namespace {

const fs::path root = fs::temp_directory_path() / "subnetsim_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(SUBNETSIM_CLI) + " " + args + " --quiet > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  const std::string s = slurp(p);
  return s.substr(0, s.find("\r\n"));
}

std::size_t lines(const fs::path& p) {
  const std::string s = slurp(p);
  std::size_t n = 0;
  for (std::size_t pos = 0; (pos = s.find("\r\n", pos)) != std::string::npos; pos += 2) ++n;
  return n;
}

fs::path write_config(const std::string& name, const std::string& body) {
  fs::create_directories(root);
  const fs::path p = root / name;
  std::ofstream(p) << body;
  return p;
}

fs::path fresh(const std::string& name) {
  const fs::path p = root / name;
  fs::remove_all(p);
  return p;
}

const std::string small_cfg =
    R"({"deployment": {"n_subnetworks": 4}, "simulation": {"horizon": 60, "episodes": 3, "seed": 9},
        "tuning": {"trials": 4, "startup": 2, "episodes_per_trial": 1}})";

void same_files(const fs::path& a, const fs::path& b, const std::vector<std::string>& skip = {}) {
  std::size_t seen = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    const std::string name = e.path().filename().string();
    if (std::find(skip.begin(), skip.end(), name) != skip.end()) continue;
    INFO(name);
    REQUIRE(fs::exists(b / name));
    CHECK(slurp(e.path()) == slurp(b / name));
    ++seen;
  }
  CHECK(seen > 2);
}

}  // namespace

TEST_CASE("exit codes") {
  const auto cfg = write_config("small.json", small_cfg);
  const std::string c = " --config " + cfg.string();
  CHECK(run("--version") == 0);
  CHECK(run("") == 2);
  CHECK(run("simulate --bogus") == 2);
  CHECK(run("simulate --policy greedy" + c + " --out " + fresh("x").string()) == 2);
  CHECK(run("simulate --episodes 0" + c + " --out " + fresh("x").string()) == 2);
  CHECK(run("simulate --params " + (root / "nope.json").string() + c + " --out " + fresh("x").string()) == 2);
  CHECK(run("simulate --config " + (root / "missing.json").string()) == 2);
  CHECK(run("tune --policy sisa" + c + " --out " + fresh("x").string()) == 2);
  CHECK(run("compare --n 0" + c + " --out " + fresh("x").string()) == 2);
  CHECK(run("simulate --config " + write_config("bad.json", R"({"radio": {"num_subbands": 0}})").string()) == 2);
  CHECK(run("simulate --config " + write_config("junk.json", "{ nope").string()) == 2);

  // Output path blocked by a regular file.
  std::ofstream(root / "blocker") << "x";
  CHECK(run("simulate" + c + " --out " + (root / "blocker" / "sub").string()) == 3);
}

TEST_CASE("simulate writes metrics, ccdfs and the run header") {
  const auto cfg = write_config("small.json", small_cfg);
  const fs::path out = fresh("sim");
  REQUIRE(run("simulate --policy cadic --config " + cfg.string() + " --out " + out.string()) == 0);
  CHECK(first_line(out / "metrics.csv") ==
        "episode,subnetwork,plant_type,cost,ul_bler,dl_bler,tx_fraction,sb1_use,sb2_use,sb3_use,sensing,messages,diverged");
  CHECK(lines(out / "metrics.csv") == 1 + 3 * 4);
  CHECK(first_line(out / "ccdf_cost.csv") == "value,ccdf");
  CHECK(first_line(out / "ccdf_bler.csv") == "value,ccdf");
  CHECK(lines(out / "ccdf_cost.csv") == 1 + 12);
  CHECK(fs::exists(out / "config.json"));
  CHECK(fs::exists(out / "version.txt"));
}

TEST_CASE("plant-response writes one row per plant and inter-arrival time") {
  const fs::path out = fresh("resp");
  REQUIRE(run("plant-response --episodes 3 --out " + out.string()) == 0);
  CHECK(first_line(out / "response.csv") ==
        "plant,interarrival_ms,interarrival_frames,mean_cost,diverged_runs,runs");
  CHECK(lines(out / "response.csv") == 1 + 20);
}

TEST_CASE("outputs are identical across thread counts") {
  const auto cfg = write_config("small.json", small_cfg);
  const std::string c = " --config " + cfg.string();

  const fs::path s1 = fresh("sim1"), s2 = fresh("sim2");
  REQUIRE(run("simulate --policy sisa_pc --threads 1" + c + " --out " + s1.string()) == 0);
  REQUIRE(run("simulate --policy sisa_pc --threads 2" + c + " --out " + s2.string()) == 0);
  same_files(s1, s2);

  const fs::path c1 = fresh("cmp1"), c2 = fresh("cmp2");
  REQUIRE(run("compare --policy cadic,sisa,random --n 3,5 --threads 1" + c + " --out " + c1.string()) == 0);
  REQUIRE(run("compare --policy cadic,sisa,random --n 3,5 --threads 2" + c + " --out " + c2.string()) == 0);
  same_files(c1, c2);
  CHECK(first_line(c1 / "comparison.csv") == "policy,n_subnetworks,statistic,value,insufficient");
  CHECK(lines(c1 / "comparison.csv") == 1 + 2 * 3 * 9);

  const fs::path t1 = fresh("tune1"), t2 = fresh("tune2");
  REQUIRE(run("tune --threads 1" + c + " --out " + t1.string()) == 0);
  REQUIRE(run("tune --threads 2" + c + " --out " + t2.string()) == 0);
  same_files(t1, t2, {"timing.csv"});
  CHECK(lines(t1 / "observations.csv") == 1 + 4);
  CHECK(first_line(t1 / "observations.csv") == "trial,k0,k1,z1,z2,f_mu,f_max,startup,pareto");
  CHECK(fs::exists(t1 / "pareto.json"));

  // Tuned parameters feed back into simulate.
  const fs::path back = fresh("sim_tuned");
  CHECK(run("simulate --params " + (t1 / "params.json").string() + c + " --out " + back.string()) == 0);
}
