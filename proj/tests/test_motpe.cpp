#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "subnetsim/motpe.hpp"

using namespace subnetsim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<Objectives> random_points(Engine& rng, std::size_t n, std::size_t m) {
  std::vector<Objectives> f(n, Objectives(m));
  for (auto& p : f)
    for (auto& v : p) v = std::round(uniform(rng, 0.0, 20.0));
  return f;
}

// Volume of a union of boxes [p, ref] by inclusion-exclusion.
double hv_inclusion_exclusion(const std::vector<Objectives>& pts, const Objectives& ref) {
  const std::size_t n = pts.size();
  double total = 0.0;
  for (unsigned mask = 1; mask < (1U << n); ++mask) {
    Objectives corner(ref.size(), -1e300);
    int bits = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1U << i)) {
        ++bits;
        for (std::size_t j = 0; j < ref.size(); ++j) corner[j] = std::max(corner[j], pts[i][j]);
      }
    double vol = 1.0;
    for (std::size_t j = 0; j < ref.size(); ++j) vol *= std::max(0.0, ref[j] - corner[j]);
    total += (bits % 2 ? 1.0 : -1.0) * vol;
  }
  return total;
}

// Composite Simpson on [a, b].
template <class F>
double simpson(F f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

SearchSpace toy_space() { return SearchSpace::cadic(TuningConfig{}); }

}  // namespace

TEST_CASE("dominance") {
  const Objectives a{1, 1}, b{2, 2}, c{1, 3}, d{3, 1};
  CHECK(dominates(a, b));
  CHECK_FALSE(dominates(b, a));
  CHECK_FALSE(dominates(c, d));
  CHECK_FALSE(dominates(d, c));
  CHECK_FALSE(dominates(a, a));
}

TEST_CASE("pareto front small cases") {
  CHECK(pareto_front({{3.0, 4.0}}) == std::vector<std::size_t>{0});
  CHECK(pareto_front({{1, 2}, {2, 1}, {2, 2}}) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("pareto front matches a brute-force filter") {
  Engine rng{1};
  for (int rep = 0; rep < 50; ++rep) {
    const auto f = random_points(rng, 100, rep % 2 ? 3 : 2);
    std::vector<std::size_t> ref;
    for (std::size_t i = 0; i < f.size(); ++i) {
      bool dominated = false;
      for (std::size_t j = 0; j < f.size() && !dominated; ++j) dominated = dominates(f[j], f[i]);
      if (!dominated) ref.push_back(i);
    }
    const auto got = pareto_front(f);
    REQUIRE(got == ref);
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (std::find(got.begin(), got.end(), i) != got.end()) continue;
      bool covered = false;
      for (std::size_t j : got) covered = covered || dominates(f[j], f[i]) || f[j] == f[i];
      REQUIRE(covered);
    }
  }
}

TEST_CASE("non-dominated sorting partitions by rank") {
  Engine rng{2};
  const auto f = random_points(rng, 60, 2);
  const auto fronts = nondominated_sort(f);
  std::set<std::size_t> seen;
  for (std::size_t r = 0; r < fronts.size(); ++r) {
    for (std::size_t i : fronts[r]) {
      REQUIRE(seen.insert(i).second);
      for (std::size_t j : fronts[r]) REQUIRE_FALSE(dominates(f[j], f[i]));
      if (r > 0) {
        bool dominated_by_prev = false;
        for (std::size_t j : fronts[r - 1]) dominated_by_prev = dominated_by_prev || dominates(f[j], f[i]);
        REQUIRE(dominated_by_prev);
      }
    }
  }
  CHECK(seen.size() == f.size());
  CHECK(fronts.front() == pareto_front(f));
}

TEST_CASE("hypervolume matches inclusion-exclusion") {
  Engine rng{3};
  for (std::size_t m : {1U, 2U, 3U, 4U}) {
    for (int rep = 0; rep < 30; ++rep) {
      const auto f = random_points(rng, 7, m);
      const Objectives ref(m, 22.0);
      INFO("m=" << m);
      REQUIRE_THAT(hypervolume(f, ref), WithinRel(hv_inclusion_exclusion(f, ref), 1e-12));
    }
  }
  CHECK(hypervolume({{1.0, 1.0}}, std::vector<double>{2.0, 3.0}) == 2.0);
  CHECK(hypervolume({{5.0, 1.0}}, std::vector<double>{2.0, 3.0}) == 0.0);
}

TEST_CASE("reference point is the inflated component-wise maximum") {
  const auto ref = reference_point({{1.0, -4.0}, {3.0, -2.0}});
  CHECK_THAT(ref[0], WithinRel(3.3, 1e-15));
  CHECK_THAT(ref[1], WithinRel(-1.8, 1e-15));
}

TEST_CASE("split sizes") {
  Engine rng{4};
  for (std::size_t n : {2U, 9U, 10U, 11U, 37U, 100U}) {
    const auto f = random_points(rng, n, 2);
    const auto s = split_observations(f, 0.1);
    const auto want = static_cast<std::size_t>(std::ceil(0.1 * n));
    CHECK(s.good.size() == want);
    CHECK(s.good.size() + s.bad.size() == n);
    std::set<std::size_t> all(s.good.begin(), s.good.end());
    all.insert(s.bad.begin(), s.bad.end());
    CHECK(all.size() == n);
  }
  CHECK_THROWS(split_observations({{1.0, 1.0}}, 0.1));
}

TEST_CASE("split prefers better fronts") {
  const std::vector<Objectives> f{{5, 5}, {1, 1}, {2, 2}, {6, 6}, {3, 3}};
  const auto s = split_observations(f, 0.4);
  CHECK(s.good == std::vector<std::size_t>{1, 2});
}

TEST_CASE("boundary front is cut by hypervolume contribution") {
  Engine rng{5};
  for (int rep = 0; rep < 100; ++rep) {
    // A single front of five distinct points.
    std::vector<Objectives> f;
    std::vector<double> xs;
    for (int i = 0; i < 5; ++i) xs.push_back(uniform(rng, 0.0, 10.0));
    std::sort(xs.begin(), xs.end());
    for (double x : xs) f.push_back({x, 10.0 / (1.0 + x)});
    if (pareto_front(f).size() != 5) continue;
    const Objectives ref = reference_point(f);
    std::size_t best = 0;
    double best_hv = -1.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double hv = hypervolume({f[i]}, ref);
      if (hv > best_hv) {
        best_hv = hv;
        best = i;
      }
    }
    const auto s = split_observations(f, 0.2);
    REQUIRE(s.good.size() == 1);
    REQUIRE(s.good[0] == best);
  }
}

TEST_CASE("identical objectives split by insertion order") {
  const std::vector<Objectives> f(10, Objectives{1.0, 1.0});
  const auto s = split_observations(f, 0.25);
  CHECK(s.good == std::vector<std::size_t>{0, 1, 2});
  CHECK(s.bad.size() == 7);
}

TEST_CASE("parzen density integrates to one") {
  Engine rng{6};
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> v(1 + rep % 7);
    for (auto& x : v) x = uniform(rng, 0.0, 100.0);
    const auto p = fit_kde(v, 0.0, 100.0);
    CHECK(p.kernels() == v.size() + 1);
    const double total = simpson([&](double x) { return std::exp(p.log_pdf(x)); }, 0.0, 100.0);
    REQUIRE_THAT(total, WithinAbs(1.0, 1e-6));
    const double a = uniform(rng, 0.0, 60.0);
    const double cond = simpson([&](double x) { return std::exp(p.log_pdf(x, a, 100.0)); }, a, 100.0);
    REQUIRE_THAT(cond, WithinAbs(1.0, 1e-6));
  }
}

TEST_CASE("parzen bandwidths follow the neighbour spacing rule") {
  const std::vector<double> v{10.0, 20.0, 50.0};
  const auto p = fit_kde(v, 0.0, 100.0);
  const std::vector<double> want_sigma{10.0, 30.0, 50.0, 100.0};
  const std::vector<double> want_mu{10.0, 20.0, 50.0, 50.0};
  CHECK(std::vector<double>(p.bandwidths().begin(), p.bandwidths().end()) == want_sigma);
  CHECK(std::vector<double>(p.centers().begin(), p.centers().end()) == want_mu);
  const std::vector<double> tight{50.0, 50.1, 50.2};
  const auto q = fit_kde(tight, 0.0, 100.0);
  CHECK(q.bandwidths()[1] == 1.0);
}

TEST_CASE("parzen density of a midpoint value is symmetric") {
  const std::vector<double> v{0.5};
  const auto p = fit_kde(v, 0.0, 1.0);
  for (double d : {0.05, 0.2, 0.45}) CHECK_THAT(p.log_pdf(0.5 + d), WithinAbs(p.log_pdf(0.5 - d), 1e-12));
}

TEST_CASE("parzen samples stay inside and follow the density") {
  Engine rng{7};
  const std::vector<double> v{3.0, 90.0, 91.0, 99.5};
  const auto p = fit_kde(v, 0.0, 100.0);
  std::vector<double> s;
  for (int i = 0; i < 100000; ++i) {
    const double x = p.sample(rng);
    REQUIRE(x >= 0.0);
    REQUIRE(x <= 100.0);
    s.push_back(x);
  }
  for (int i = 0; i < 2000; ++i) {
    const double x = p.sample(rng, 95.0, 96.0);
    REQUIRE(x >= 95.0);
    REQUIRE(x <= 96.0);
  }
  std::sort(s.begin(), s.end());
  double d = 0.0;
  for (double q : {10.0, 30.0, 50.0, 70.0, 89.0, 92.0, 97.0}) {
    const double cdf = simpson([&](double x) { return std::exp(p.log_pdf(x)); }, 0.0, q, 4000);
    const double emp = static_cast<double>(std::upper_bound(s.begin(), s.end(), q) - s.begin()) / s.size();
    d = std::max(d, std::abs(cdf - emp));
  }
  CHECK(d < 1.63 / std::sqrt(1e5));
}

TEST_CASE("search space dependency bounds") {
  const SearchSpace space = toy_space();
  REQUIRE(space.size() == 4);
  Engine rng{8};
  for (int i = 0; i < 10000; ++i) {
    const auto y = space.sample_uniform(rng);
    REQUIRE(space.feasible(y));
    REQUIRE(y[0] >= 0.0);
    REQUIRE(y[0] <= 1.0);
    REQUIRE(y[1] > 0.0);
    REQUIRE(y[1] <= 100.0);
    REQUIRE(y[2] > y[1]);
    REQUIRE(y[2] <= 200.0);
    REQUIRE(y[3] > y[2]);
    REQUIRE(y[3] <= 300.0);
  }
  CHECK_FALSE(space.feasible(std::vector<double>{0.5, 50.0, 50.0, 100.0}));
  CHECK_FALSE(space.feasible(std::vector<double>{0.5, 0.0, 50.0, 100.0}));
  CHECK(space.feasible(std::vector<double>{0.49, 16.0, 100.0, 186.0}));
  const auto c = space.clamp({2.0, 150.0, 10.0, 400.0});
  CHECK(space.feasible(c));
}

TEST_CASE("one candidate is returned as drawn") {
  const SearchSpace space = toy_space();
  Engine rng{9};
  std::vector<std::vector<double>> ys;
  std::vector<Objectives> fs;
  for (int i = 0; i < 20; ++i) {
    ys.push_back(space.sample_uniform(rng));
    fs.push_back({ys.back()[1], ys.back()[2]});
  }
  Engine a{10}, b{10};
  const auto got = propose(space, ys, fs, 0.1, 1, a);
  const auto model = fit_tpe(space, ys, split_observations(fs, 0.1));
  CHECK(got == sample_candidate(space, model, b));
}

TEST_CASE("proposal lands in a sharp peak of the good density") {
  SearchSpace space;
  space.dims.push_back({"x", 0.0, 100.0, -1, false});
  std::vector<std::vector<double>> ys;
  std::vector<Objectives> fs;
  for (int i = 0; i < 3; ++i) {
    ys.push_back({30.0 + 0.1 * i});
    fs.push_back({0.0, 0.0});
  }
  for (int i = 0; i < 97; ++i) {
    ys.push_back({(i + 0.5) * 100.0 / 97});
    fs.push_back({1.0 + i, 1.0 + i});
  }
  Engine rng{11};
  int hits = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto y = propose(space, ys, fs, 0.03, 24, rng);
    if (std::abs(y[0] - 30.1) < 2.0) ++hits;
  }
  CHECK(hits >= 950);
}

TEST_CASE("tune with trials equal to startup is random search") {
  const SearchSpace space = toy_space();
  Engine rng{12};
  int calls = 0;
  const auto res = tune(
      space,
      [&](std::span<const double> y, int) {
        ++calls;
        return Objectives{(y[1] - 50) * (y[1] - 50), (y[2] - 150) * (y[2] - 150)};
      },
      TuneSettings{10, 10, 0.1, 24}, rng);
  CHECK(calls == 10);
  for (const auto& o : res.observations) CHECK(o.startup);
  std::vector<Objectives> fs;
  for (const auto& o : res.observations) fs.push_back(o.f);
  CHECK(res.pareto == pareto_front(fs));
}

TEST_CASE("tune respects constraints, keeps incumbents and is reproducible") {
  const SearchSpace space = toy_space();
  auto objective = [](std::span<const double> y, int) {
    return Objectives{(y[1] - 50) * (y[1] - 50) + y[0], (y[2] - 150) * (y[2] - 150) + (y[3] - 250) * (y[3] - 250)};
  };
  Engine a{13}, b{13};
  const auto r1 = tune(space, objective, TuneSettings{60, 15, 0.1, 24}, a);
  const auto r2 = tune(space, objective, TuneSettings{60, 15, 0.1, 24}, b);
  double best0 = INFINITY, best1 = INFINITY;
  for (std::size_t i = 0; i < r1.observations.size(); ++i) {
    const auto& o = r1.observations[i];
    REQUIRE(space.feasible(o.y));
    REQUIRE(o.y == r2.observations[i].y);
    REQUIRE(o.f == r2.observations[i].f);
    REQUIRE(o.startup == (i < 15));
    const double n0 = std::min(best0, o.f[0]), n1 = std::min(best1, o.f[1]);
    REQUIRE(n0 <= best0);
    REQUIRE(n1 <= best1);
    best0 = n0;
    best1 = n1;
  }
  CHECK(r1.pareto == r2.pareto);
  CHECK(r1.selected == r2.selected);
  CHECK(std::find(r1.pareto.begin(), r1.pareto.end(), r1.selected) != r1.pareto.end());
}

TEST_CASE("balanced selection minimises the normalised sum") {
  const std::vector<Objectives> f{{0, 10}, {4, 4}, {10, 0}, {6, 3}};
  const std::vector<std::size_t> members{0, 1, 2, 3};
  CHECK(select_balanced(f, members) == 1);
  const std::vector<Objectives> tie{{0, 1}, {1, 0}};
  CHECK(select_balanced(tie, std::vector<std::size_t>{0, 1}) == 0);
}
