#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "config.hpp"
#include "rng.hpp"

namespace subnetsim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class DesignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OpenLoopSemantics { AsWritten, Physical };

inline OpenLoopSemantics parse_open_loop_semantics(const std::string& s) {
  if (s == "as-written") return OpenLoopSemantics::AsWritten;
  if (s == "physical") return OpenLoopSemantics::Physical;
  throw ConfigError("plants.open_loop_semantics", "unknown value '" + s + "'");
}

inline MatrixXd to_eigen(const Matrix& m) {
  const auto rows = static_cast<Eigen::Index>(m.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(m.front().size());
  MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return out;
}

inline double max_real_eigenvalue(const MatrixXd& m) {
  Eigen::EigenSolver<MatrixXd> es(m, false);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& ev : es.eigenvalues()) best = std::max(best, ev.real());
  return best;
}

/// Solves Ac' P + P Ac + W = 0 through the Kronecker-vectorised linear system.
inline MatrixXd solve_lyapunov(const MatrixXd& Ac, const MatrixXd& W) {
  const Eigen::Index n = Ac.rows();
  const MatrixXd I = MatrixXd::Identity(n, n);
  MatrixXd M = MatrixXd::Zero(n * n, n * n);
  // vec(Ac' P) = (I kron Ac') vec(P); vec(P Ac) = (Ac' kron I) vec(P)
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      M.block(i * n, j * n, n, n) += I(i, j) * Ac.transpose();
      M.block(i * n, j * n, n, n) += Ac(j, i) * I;
    }
  const VectorXd rhs = -Eigen::Map<const VectorXd>(W.data(), n * n);
  VectorXd p = M.fullPivLu().solve(rhs);
  MatrixXd P = Eigen::Map<MatrixXd>(p.data(), n, n);
  return 0.5 * (P + P.transpose());
}

inline MatrixXd care_residual(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
                              const MatrixXd& P) {
  return A.transpose() * P + P * A - P * B * R.ldlt().solve(B.transpose() * P) + Q;
}

struct LqrSolution {
  MatrixXd K;  // r x q
  MatrixXd P;  // q x q
  int iterations = 0;
};

/// Continuous-time LQR gain via Newton-Kleinman iteration.
///
/// The iteration is seeded with Bass's eigenvalue-shift gain: for beta above the
/// largest real part of A's spectrum, K0 = B' Z^-1 with (A + beta I) Z + Z (A + beta I)' = 2 B B'
/// places every closed-loop eigenvalue left of -beta.
inline LqrSolution design_lqr_gain(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
                                   double tolerance = 1e-10, int max_iterations = 200) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.cols() ||
      R.cols() != B.cols())
    throw DesignError("LQR design: inconsistent matrix dimensions");
  Eigen::LDLT<MatrixXd> r_ldlt(R);
  if (r_ldlt.info() != Eigen::Success || !r_ldlt.isPositive() || (r_ldlt.vectorD().array() <= 0).any())
    throw DesignError("LQR design: R must be positive definite");

  const double beta = std::max(0.0, max_real_eigenvalue(A)) + 1.0;
  const MatrixXd shifted = A + beta * MatrixXd::Identity(n, n);
  // (A + beta I) Z + Z (A + beta I)' = 2 B B'  <=>  Ac' Z + Z Ac + W = 0 with Ac = -(A + beta I)'
  const MatrixXd Z = solve_lyapunov(-shifted.transpose(), 2.0 * B * B.transpose());
  Eigen::FullPivLU<MatrixXd> z_lu(Z);
  if (!z_lu.isInvertible()) throw DesignError("LQR design: (A, B) is not controllable");
  MatrixXd K = B.transpose() * z_lu.inverse();

  MatrixXd P = MatrixXd::Zero(n, n);
  for (int it = 1; it <= max_iterations; ++it) {
    const MatrixXd Ac = A - B * K;
    if (max_real_eigenvalue(Ac) >= 0.0) throw DesignError("LQR design: iterate lost stability");
    const MatrixXd P_next = solve_lyapunov(Ac, Q + K.transpose() * R * K);
    const double change = (P_next - P).norm();
    P = P_next;
    K = r_ldlt.solve(B.transpose() * P);
    if (change <= tolerance * std::max(1.0, P.norm())) return {K, P, it};
  }
  throw DesignError("LQR design: Newton-Kleinman did not converge in " + std::to_string(max_iterations) +
                    " iterations");
}

struct PlantModel {
  MatrixXd A, B, Q, R, K;
  MatrixXd sigma_chol;   // lower Cholesky factor of the disturbance covariance
  MatrixXd closed_loop;  // A - B K
  MatrixXd feedback;     // B K
  double dt = 1e-3;
  int interarrival_frames = 1;
  double divergence_bound = 1e6;
  OpenLoopSemantics semantics = OpenLoopSemantics::AsWritten;

  Eigen::Index states() const { return A.rows(); }
};

inline PlantModel make_plant_model(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
                                   const MatrixXd& sigma, double dt, int interarrival_frames,
                                   double divergence_bound = 1e6,
                                   OpenLoopSemantics semantics = OpenLoopSemantics::AsWritten) {
  PlantModel m;
  m.A = A;
  m.B = B;
  m.Q = Q;
  m.R = R;
  m.K = design_lqr_gain(A, B, Q, R).K;
  if (sigma.isZero(0.0)) {
    m.sigma_chol = MatrixXd::Zero(A.rows(), A.rows());
  } else {
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw DesignError("disturbance covariance is not positive definite");
    m.sigma_chol = llt.matrixL();
  }
  m.closed_loop = A - B * m.K;
  m.feedback = B * m.K;
  m.dt = dt;
  m.interarrival_frames = interarrival_frames;
  m.divergence_bound = divergence_bound;
  m.semantics = semantics;
  return m;
}

inline int interarrival_frames(double interarrival_ms, double frame_dt) {
  return std::max(1, static_cast<int>(std::lround(interarrival_ms * 1e-3 / frame_dt)));
}

/// Builds both plant types from the experiment config (index 0 = Plant 1, 1 = Plant 2).
inline std::vector<PlantModel> make_plant_models(const ExperimentConfig& cfg) {
  const auto& p = cfg.plants;
  const MatrixXd Q = to_eigen(p.Q);
  const MatrixXd R = to_eigen(p.R);
  const MatrixXd sigma = p.sigma_scale * MatrixXd::Identity(Q.rows(), Q.rows());
  const auto sem = parse_open_loop_semantics(p.open_loop_semantics);
  std::vector<PlantModel> out;
  for (const auto* t : {&p.plant1, &p.plant2})
    out.push_back(make_plant_model(to_eigen(t->A), to_eigen(t->B), Q, R, sigma, cfg.simulation.frame_dt,
                                   interarrival_frames(t->interarrival_ms, cfg.simulation.frame_dt),
                                   p.divergence_bound, sem));
  return out;
}

/// x' Q x + u' R u
inline double instantaneous_cost(const VectorXd& x, const VectorXd& u, const MatrixXd& Q, const MatrixXd& R) {
  return x.dot(Q * x) + u.dot(R * u);
}

inline double finite_horizon_cost(std::span<const double> costs) {
  if (costs.empty()) throw std::invalid_argument("finite_horizon_cost: empty cost sequence");
  double sum = 0.0;
  for (double c : costs) sum += c;
  return sum / static_cast<double>(costs.size());
}

struct PlantState {
  VectorXd x;
  VectorXd x_bar;  // last state for which a control signal was delivered
  int steps_since_closed = 0;
  bool diverged = false;
  double clamped_cost = 0.0;
};

inline PlantState initial_state(const PlantModel& m, Engine& rng, double init_range) {
  PlantState s;
  s.x.resize(m.states());
  for (Eigen::Index i = 0; i < m.states(); ++i) s.x(i) = uniform(rng, -init_range, init_range);
  s.x_bar = s.x;
  return s;
}

/// Control action currently applied at the actuator.
inline VectorXd applied_input(const PlantModel& m, const PlantState& s) { return -m.K * s.x_bar; }

/// Instantaneous cost of the current state, frozen at the clamp value once diverged.
inline double current_cost(const PlantModel& m, const PlantState& s) {
  if (s.diverged) return s.clamped_cost;
  return instantaneous_cost(s.x, applied_input(m, s), m.Q, m.R);
}

/// One forward-Euler step of the switched closed/open-loop dynamics.
///
/// The disturbance is drawn even for diverged plants so every policy consumes the
/// plant-noise stream identically.
inline void step(const PlantModel& m, PlantState& s, bool loop_closed, Engine& rng) {
  VectorXd z(m.states());
  for (Eigen::Index i = 0; i < m.states(); ++i) z(i) = standard_normal(rng);
  if (s.diverged) return;
  const VectorXd w = m.sigma_chol * z;
  VectorXd xdot;
  if (loop_closed) {
    s.x_bar = s.x;
    s.steps_since_closed = 0;
    xdot = m.closed_loop * s.x + w;
  } else {
    ++s.steps_since_closed;
    if (m.semantics == OpenLoopSemantics::AsWritten)
      xdot = m.closed_loop * s.x_bar + w;
    else
      xdot = m.A * s.x - m.feedback * s.x_bar + w;
  }
  s.x += m.dt * xdot;
  if (!s.x.allFinite() || s.x.cwiseAbs().maxCoeff() > m.divergence_bound) {
    s.diverged = true;
    s.clamped_cost = instantaneous_cost(s.x, applied_input(m, s), m.Q, m.R);
    if (!std::isfinite(s.clamped_cost)) s.clamped_cost = std::numeric_limits<double>::max();
  }
}

struct ResponsePoint {
  int interarrival_frames = 1;
  double mean_cost = 0.0;
  int diverged_runs = 0;
  int runs = 0;
};

/// Finite-horizon cost under a perfect channel, closing the loop every
/// `interarrival` frames, averaged over `seeds` initial states.
inline std::vector<ResponsePoint> plant_response_sweep(const PlantModel& model,
                                                       std::span<const int> interarrivals, int horizon,
                                                       int seeds, std::uint64_t master_seed,
                                                       double init_range = 0.2) {
  std::vector<ResponsePoint> out;
  std::vector<double> costs(static_cast<std::size_t>(horizon));
  for (int m : interarrivals) {
    ResponsePoint pt{m, 0.0, 0, seeds};
    for (int s = 0; s < seeds; ++s) {
      Engine init = make_stream(master_seed, "response-init", static_cast<std::uint64_t>(s));
      Engine noise = make_stream(master_seed, "response-noise", static_cast<std::uint64_t>(s));
      PlantState st = initial_state(model, init, init_range);
      for (int t = 0; t < horizon; ++t) {
        costs[static_cast<std::size_t>(t)] = current_cost(model, st);
        step(model, st, t % m == 0, noise);
      }
      pt.mean_cost += finite_horizon_cost(costs) / seeds;
      pt.diverged_runs += st.diverged ? 1 : 0;
    }
    out.push_back(pt);
  }
  return out;
}

}  // namespace subnetsim
