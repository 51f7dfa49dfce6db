#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "config.hpp"
#include "rng.hpp"

namespace subnetsim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

struct DeploymentParams {
  double area_side = 30.0;
  double radius = 2.0;
  double min_sensor_distance = 1.0;
  double speed = 3.0;

  static DeploymentParams from(const DeploymentConfig& c) {
    return {c.area_side, c.radius, c.min_sensor_distance, c.speed};
  }
  double lo() const { return radius; }
  double hi() const { return area_side - radius; }
};

struct Deployment {
  DeploymentParams params;
  std::vector<Vec2> centers;
  std::vector<Vec2> sensor_offsets;
  std::vector<Vec2> actuator_offsets;

  std::size_t size() const { return centers.size(); }
  Vec2 ap(std::size_t n) const { return centers[n]; }
  Vec2 sensor(std::size_t n) const { return centers[n] + sensor_offsets[n]; }
  Vec2 actuator(std::size_t n) const { return centers[n] + actuator_offsets[n]; }
};

struct MobilityState {
  std::vector<Vec2> waypoints;
  double speed = 3.0;
};

namespace detail {

inline Vec2 uniform_point(Engine& rng, const DeploymentParams& p) {
  const double x = uniform(rng, p.lo(), p.hi());
  const double y = uniform(rng, p.lo(), p.hi());
  return {x, y};
}

// Area-uniform point on the annulus r_min <= r <= r_max.
inline Vec2 uniform_annulus(Engine& rng, double r_min, double r_max) {
  const double u = uniform01(rng);
  const double r = std::sqrt(r_min * r_min + u * (r_max * r_max - r_min * r_min));
  const double phi = 2.0 * std::numbers::pi * uniform01(rng);
  return {r * std::cos(phi), r * std::sin(phi)};
}

}  // namespace detail

inline Deployment init_deployment(int n, const DeploymentParams& params, Engine& rng) {
  Deployment d;
  d.params = params;
  const auto count = static_cast<std::size_t>(n);
  d.centers.reserve(count);
  d.sensor_offsets.reserve(count);
  d.actuator_offsets.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    d.centers.push_back(detail::uniform_point(rng, params));
    d.sensor_offsets.push_back(detail::uniform_annulus(rng, params.min_sensor_distance, params.radius));
    d.actuator_offsets.push_back(detail::uniform_annulus(rng, 0.0, params.radius));
  }
  return d;
}

inline MobilityState init_mobility(const Deployment& d, Engine& rng) {
  MobilityState m;
  m.speed = d.params.speed;
  for (std::size_t i = 0; i < d.size(); ++i) m.waypoints.push_back(detail::uniform_point(rng, d.params));
  return m;
}

/// Restricted random waypoint step: each center moves speed*dt toward its waypoint;
/// a center that can reach its waypoint within the step lands on it and draws a new one.
inline void step_mobility(Deployment& d, MobilityState& m, double dt, Engine& rng) {
  const double travel = m.speed * dt;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Vec2 delta = m.waypoints[i] - d.centers[i];
    const double dist = norm(delta);
    if (dist <= travel) {
      d.centers[i] = m.waypoints[i];
      m.waypoints[i] = detail::uniform_point(rng, d.params);
    } else {
      d.centers[i] = d.centers[i] + (travel / dist) * delta;
    }
  }
}

}  // namespace subnetsim
