#include <catch_amalgamated.hpp>

#include <array>
#include <vector>

#include "subnetsim/plant.hpp"

using namespace subnetsim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Reference {
  std::array<double, 4> K;
  std::array<double, 4> P_row0;
};

// scipy.linalg.solve_continuous_are with Q = diag(1, 10, 10, 100), R = 0.1
const Reference kPlant1{{-3.162277660168471, -12.580053033937022, -95.8988163454071, -32.5720970800065},
                        {3.978162067295215, 2.9128867168332686, 10.30020149409403, 0.20478517773888893}};
const Reference kPlant2{{-3.162277660168355, -12.611374118929222, -97.07944200007839, -33.54052008589941},
                        {3.9880666640315607, 2.9523378583798863, 10.606443737806874, 0.4146724770425906}};

}  // namespace

TEST_CASE("lqr gains of the default plants match an independent CARE solver") {
  const auto models = make_plant_models(ExperimentConfig{});
  REQUIRE(models.size() == 2);
  for (std::size_t p = 0; p < 2; ++p) {
    const Reference& ref = p == 0 ? kPlant1 : kPlant2;
    const auto sol = design_lqr_gain(models[p].A, models[p].B, models[p].Q, models[p].R);
    for (int i = 0; i < 4; ++i) {
      CHECK_THAT(sol.K(0, i), WithinRel(ref.K[static_cast<std::size_t>(i)], 1e-9));
      CHECK_THAT(sol.P(0, i), WithinRel(ref.P_row0[static_cast<std::size_t>(i)], 1e-9));
    }
    CHECK(care_residual(models[p].A, models[p].B, models[p].Q, models[p].R, sol.P).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(max_real_eigenvalue(models[p].closed_loop) < 0.0);
  }
}

TEST_CASE("lqr rejects bad inputs") {
  MatrixXd A = MatrixXd::Zero(2, 2);
  A(0, 1) = 1.0;
  MatrixXd B(2, 1);
  B << 0.0, 1.0;
  const MatrixXd Q = MatrixXd::Identity(2, 2);
  MatrixXd R(1, 1);
  R << -1.0;
  CHECK_THROWS_AS(design_lqr_gain(A, B, Q, R), DesignError);
  R << 1.0;
  MatrixXd B_bad(2, 1);
  B_bad << 1.0, 0.0;
  MatrixXd A_diag = MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(design_lqr_gain(A_diag, B_bad, Q, R), DesignError);
  CHECK_THROWS_AS(design_lqr_gain(A, MatrixXd::Zero(3, 1), Q, R), DesignError);
}

TEST_CASE("double integrator gain has the textbook closed form") {
  // x'' = u, Q = I, R = 1: K = [1, sqrt(3)]
  MatrixXd A = MatrixXd::Zero(2, 2);
  A(0, 1) = 1.0;
  MatrixXd B(2, 1);
  B << 0.0, 1.0;
  const auto sol = design_lqr_gain(A, B, MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1));
  CHECK_THAT(sol.K(0, 0), WithinAbs(1.0, 1e-10));
  CHECK_THAT(sol.K(0, 1), WithinAbs(std::sqrt(3.0), 1e-10));
}

TEST_CASE("lyapunov solution satisfies its equation") {
  MatrixXd Ac(3, 3);
  Ac << -2, 1, 0, 0, -3, 1, 0.5, 0, -1;
  const MatrixXd W = MatrixXd::Identity(3, 3);
  const MatrixXd P = solve_lyapunov(Ac, W);
  CHECK((Ac.transpose() * P + P * Ac + W).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("euler step without disturbance") {
  ExperimentConfig cfg;
  cfg.plants.sigma_scale = 0.0;
  const auto m = make_plant_models(cfg)[0];
  Engine rng{3};
  PlantState s = initial_state(m, rng, 0.2);
  const VectorXd x0 = s.x;

  step(m, s, true, rng);
  const VectorXd x1 = x0 + m.dt * m.closed_loop * x0;
  CHECK((s.x - x1).norm() < 1e-15);
  CHECK((s.x_bar - x0).norm() == 0.0);

  step(m, s, false, rng);
  const VectorXd x2 = x1 + m.dt * m.closed_loop * x0;
  CHECK((s.x - x2).norm() < 1e-15);
  CHECK(s.steps_since_closed == 1);
}

TEST_CASE("physical open-loop semantics hold the last input") {
  ExperimentConfig cfg;
  cfg.plants.sigma_scale = 0.0;
  cfg.plants.open_loop_semantics = "physical";
  const auto m = make_plant_models(cfg)[0];
  Engine rng{3};
  PlantState s = initial_state(m, rng, 0.2);
  const VectorXd x0 = s.x;
  step(m, s, true, rng);
  const VectorXd x1 = s.x;
  step(m, s, false, rng);
  const VectorXd expected = x1 + m.dt * (m.A * x1 - m.B * m.K * x0);
  CHECK((s.x - expected).norm() < 1e-14);
}

TEST_CASE("cost is the horizon average of x'Qx + u'Ru") {
  const auto m = make_plant_models(ExperimentConfig{})[0];
  Engine rng{5};
  PlantState s = initial_state(m, rng, 0.2);
  const VectorXd u = -m.K * s.x;
  CHECK_THAT(current_cost(m, s), WithinRel(s.x.dot(m.Q * s.x) + u.dot(m.R * u), 1e-14));
  const std::vector<double> c{1.0, 2.0, 6.0};
  CHECK(finite_horizon_cost(c) == 3.0);
  CHECK_THROWS(finite_horizon_cost(std::vector<double>{}));
}

TEST_CASE("divergence clamps the cost") {
  const auto m = make_plant_models(ExperimentConfig{})[0];
  Engine rng{9};
  PlantState s = initial_state(m, rng, 0.2);
  for (int t = 0; t < 5000 && !s.diverged; ++t) step(m, s, t % 10 == 0, rng);
  REQUIRE(s.diverged);
  const double c = current_cost(m, s);
  CHECK(c > 1e10);
  step(m, s, true, rng);
  CHECK(current_cost(m, s) == c);
}

TEST_CASE("interarrival frames") {
  CHECK(interarrival_frames(1.0, 1e-3) == 1);
  CHECK(interarrival_frames(3.0, 1e-3) == 3);
  CHECK(interarrival_frames(0.1, 1e-3) == 1);
}

TEST_CASE("closing the loop every frame is cheaper than every tenth frame") {
  const auto models = make_plant_models(ExperimentConfig{});
  const std::vector<int> m{1, 10};
  for (const auto& model : models) {
    const auto pts = plant_response_sweep(model, m, 1000, 5, 42);
    CHECK(pts[0].mean_cost < 1e3);
    CHECK(pts[0].diverged_runs == 0);
    CHECK(pts[1].diverged_runs == 5);
    CHECK(pts[1].mean_cost > pts[0].mean_cost);
  }
}
