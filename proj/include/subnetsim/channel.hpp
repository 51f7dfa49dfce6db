#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <tuple>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "config.hpp"
#include "geometry.hpp"
#include "rng.hpp"

namespace subnetsim {

inline constexpr double kSpeedOfLight = 299792458.0;

/// 3GPP TR 38.901 InF-SL LOS probability, exp(-d / k_sc) with k_sc = -ds / ln(1 - r).
inline double los_probability(double d, double clutter_size = 10.0, double clutter_density = 0.35) {
  const double k_sc = -clutter_size / std::log(1.0 - clutter_density);
  return std::exp(-std::max(d, 0.0) / k_sc);
}

// TR 38.901 Table 7.4.1-1, InF LOS and InF-SL NLOS.
inline constexpr double kInfLosA = 31.84, kInfLosB = 21.5, kInfLosC = 19.0;
inline constexpr double kInfSlA = 33.0, kInfSlB = 25.5, kInfSlC = 20.0;

/// Path loss in dB; distances below `min_distance` are clamped.
inline double path_loss_db(double d, double fc_ghz, bool los, double min_distance = 1.0) {
  const double dd = std::max(d, min_distance);
  const double pl_los = kInfLosA + kInfLosB * std::log10(dd) + kInfLosC * std::log10(fc_ghz);
  if (los) return pl_los;
  const double pl_sl = kInfSlA + kInfSlB * std::log10(dd) + kInfSlC * std::log10(fc_ghz);
  return std::max(pl_los, pl_sl);
}

inline double doppler_hz(double speed, double fc_ghz) { return speed * fc_ghz * 1e9 / kSpeedOfLight; }

/// Jakes lag correlation J0(2 pi f_D dt).
inline double jakes_correlation(double doppler, double dt) {
  return std::cyl_bessel_j(0.0, 2.0 * std::numbers::pi * doppler * dt);
}

inline std::complex<double> complex_normal(Engine& rng) {
  constexpr double s = std::numbers::sqrt2 / 2.0;
  const double re = standard_normal(rng);
  const double im = standard_normal(rng);
  return {s * re, s * im};
}

/// First-order autoregressive Rayleigh update h' = rho h + sqrt(1 - rho^2) w, w ~ CN(0, 1).
inline std::complex<double> fading_step(std::complex<double> h, double rho, Engine& rng) {
  return rho * h + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * complex_normal(rng);
}

/// Unit-variance Gaussian random field on a square grid with exponential spatial
/// correlation exp(-distance / dc). Bilinear interpolation between grid nodes.
class ShadowField {
 public:
  ShadowField(double area_side, double spacing, double correlation_distance, Engine& rng)
      : spacing_(spacing), side_(grid_side(area_side, spacing)) {
    const auto factor = cholesky_factor(side_, spacing, correlation_distance);
    Eigen::VectorXd z(factor->rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = standard_normal(rng);
    values_ = factor->triangularView<Eigen::Lower>() * z;
  }

  double at(Vec2 p) const {
    const double gx = std::clamp(p.x / spacing_, 0.0, static_cast<double>(side_ - 1));
    const double gy = std::clamp(p.y / spacing_, 0.0, static_cast<double>(side_ - 1));
    const int ix = std::min(static_cast<int>(gx), side_ - 2);
    const int iy = std::min(static_cast<int>(gy), side_ - 2);
    const double fx = gx - ix, fy = gy - iy;
    return (1 - fx) * (1 - fy) * node(ix, iy) + fx * (1 - fy) * node(ix + 1, iy) +
           (1 - fx) * fy * node(ix, iy + 1) + fx * fy * node(ix + 1, iy + 1);
  }

  double node(int ix, int iy) const { return values_(static_cast<Eigen::Index>(iy) * side_ + ix); }
  int side() const { return side_; }
  double spacing() const { return spacing_; }

  /// Link shadowing for unit-variance field values scaled by `std_db`: (f(a) + f(b)) / sqrt(2).
  double link_shadow_db(Vec2 a, Vec2 b, double std_db) const {
    return std_db * (at(a) + at(b)) / std::numbers::sqrt2;
  }

 private:
  static int grid_side(double area_side, double spacing) {
    return std::max(2, static_cast<int>(std::ceil(area_side / spacing - 1e-9)) + 1);
  }

  // The covariance depends only on the grid, so its factor is shared across episodes.
  static std::shared_ptr<const Eigen::MatrixXd> cholesky_factor(int side, double spacing, double dc) {
    static std::mutex mu;
    static std::map<std::tuple<int, double, double>, std::shared_ptr<const Eigen::MatrixXd>> cache;
    std::lock_guard lock(mu);
    auto key = std::make_tuple(side, spacing, dc);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    const Eigen::Index n = static_cast<Eigen::Index>(side) * side;
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b <= a; ++b) {
        const double dx = static_cast<double>(a % side - b % side) * spacing;
        const double dy = static_cast<double>(a / side - b / side) * spacing;
        cov(a, b) = cov(b, a) = std::exp(-std::hypot(dx, dy) / dc);
      }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    auto factor = std::make_shared<const Eigen::MatrixXd>(llt.matrixL());
    cache.emplace(key, factor);
    return factor;
  }

  double spacing_;
  int side_;
  Eigen::VectorXd values_;
};

struct LinkChannel {
  bool los = true;
  double pathloss_db = 0.0;
  double shadow_db = 0.0;
  double los_reference_distance = 0.0;  // distance at the last LOS draw
  double large_scale_gain = 1.0;        // 10^(-(pathloss + shadow) / 10)
  std::vector<std::complex<double>> h;  // index l * K + k

  double gain(int k, int l, int blocks_per_subband) const {
    return std::norm(h[static_cast<std::size_t>(l * blocks_per_subband + k)]) * large_scale_gain;
  }
};

inline double large_scale_gain(double pathloss_db, double shadow_db) {
  return std::pow(10.0, -(pathloss_db + shadow_db) / 10.0);
}

/// |h_{k,l}|^2 * rho
inline double link_gain(const LinkChannel& link, int k, int l, int blocks_per_subband) {
  return link.gain(k, l, blocks_per_subband);
}

struct ChannelParams {
  double fc_ghz = 10.0;
  double clutter_density = 0.35;
  double clutter_size = 10.0;
  double shadow_std_los = 4.0;
  double shadow_std_nlos = 5.7;
  double correlation_distance = 10.0;
  double grid_spacing = 1.0;
  double los_resample_distance = 1.0;
  double min_distance = 1.0;

  static ChannelParams from(const ChannelConfig& c) {
    return {c.fc_ghz,           c.clutter_density,     c.clutter_size,
            c.shadow_std_los,   c.shadow_std_nlos,     c.correlation_distance,
            c.shadow_grid_spacing, c.los_resample_distance, c.min_distance};
  }
};

enum class LinkDirection { Uplink, Downlink };

/// Every transmitter-to-receiver link of one episode, for both TDD phases.
/// Uplink link (i, j): sensor of i -> AP of j. Downlink link (i, j): AP of i -> actuator of j.
class ChannelState {
 public:
  ChannelState(const ChannelParams& params, const Deployment& d, int num_subbands, int blocks_per_subband,
               double fading_correlation, Engine& shadow_rng, Engine& los_rng, Engine& fading_rng)
      : params_(params),
        n_(d.size()),
        subbands_(num_subbands),
        blocks_(blocks_per_subband),
        rho_(fading_correlation),
        field_(d.params.area_side, params.grid_spacing, params.correlation_distance, shadow_rng) {
    const std::size_t cells = static_cast<std::size_t>(num_subbands * blocks_per_subband);
    for (auto* links : {&ul_, &dl_}) {
      links->resize(n_ * n_);
      for (auto& link : *links) {
        link.h.resize(cells);
        for (auto& h : link.h) h = complex_normal(fading_rng);
      }
    }
    update_large_scale(d, los_rng, true);
  }

  std::size_t size() const { return n_; }
  int subbands() const { return subbands_; }
  int blocks() const { return blocks_; }
  const ShadowField& shadow_field() const { return field_; }

  const LinkChannel& link(LinkDirection dir, std::size_t tx, std::size_t rx) const {
    return (dir == LinkDirection::Uplink ? ul_ : dl_)[tx * n_ + rx];
  }
  double gain(LinkDirection dir, std::size_t tx, std::size_t rx, int k, int l) const {
    return link(dir, tx, rx).gain(k, l, blocks_);
  }

  /// Re-evaluates path loss and shadowing at the current positions; LOS is redrawn
  /// only when a link distance has moved more than the resample distance.
  void update_large_scale(const Deployment& d, Engine& los_rng, bool initial = false) {
    field_ap_.resize(n_);
    field_sensor_.resize(n_);
    field_actuator_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      field_ap_[i] = field_.at(d.ap(i));
      field_sensor_[i] = field_.at(d.sensor(i));
      field_actuator_[i] = field_.at(d.actuator(i));
    }
    for (std::size_t tx = 0; tx < n_; ++tx)
      for (std::size_t rx = 0; rx < n_; ++rx) {
        refresh(ul_[tx * n_ + rx], distance(d.sensor(tx), d.ap(rx)), field_sensor_[tx] + field_ap_[rx], los_rng,
                initial);
        refresh(dl_[tx * n_ + rx], distance(d.ap(tx), d.actuator(rx)), field_ap_[tx] + field_actuator_[rx], los_rng,
                initial);
      }
  }

  void step_fading(Engine& fading_rng) {
    const double innov = std::sqrt(std::max(0.0, 1.0 - rho_ * rho_));
    constexpr double s = std::numbers::sqrt2 / 2.0;
    for (auto* links : {&ul_, &dl_})
      for (auto& link : *links)
        for (auto& h : link.h) {
          const double re = standard_normal(fading_rng);
          const double im = standard_normal(fading_rng);
          h = rho_ * h + innov * std::complex<double>(s * re, s * im);
        }
  }

 private:
  // `field_sum` is f(a) + f(b) for the unit-variance shadowing field at the two ends.
  void refresh(LinkChannel& link, double d, double field_sum, Engine& los_rng, bool initial) {
    if (initial || std::abs(d - link.los_reference_distance) > params_.los_resample_distance) {
      link.los = uniform01(los_rng) < los_probability(d, params_.clutter_size, params_.clutter_density);
      link.los_reference_distance = d;
    }
    link.pathloss_db = path_loss_db(d, params_.fc_ghz, link.los, params_.min_distance);
    link.shadow_db = (link.los ? params_.shadow_std_los : params_.shadow_std_nlos) * field_sum / std::numbers::sqrt2;
    link.large_scale_gain = large_scale_gain(link.pathloss_db, link.shadow_db);
  }

  ChannelParams params_;
  std::size_t n_;
  int subbands_;
  int blocks_;
  double rho_;
  ShadowField field_;
  std::vector<LinkChannel> ul_;
  std::vector<LinkChannel> dl_;
  std::vector<double> field_ap_, field_sensor_, field_actuator_;
};

}  // namespace subnetsim
