#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "finsler/connections.hpp"
#include "finsler/errors.hpp"
#include "finsler/structure.hpp"

namespace finsler {

struct IntegratorConfig {
  std::size_t steps = 1000;
  std::string scheme = "rk4";
  double drift_tolerance = 1e-8;

  void validate() const {
    if (steps < 1) throw ConfigError("integrator needs at least one step");
    if (scheme != "rk4") throw ConfigError("unknown integration scheme '" + scheme + "'");
    if (!(drift_tolerance > 0.0)) throw ConfigError("drift tolerance must be positive");
  }
};

/// Time-stamped samples of the spray flow, with per-sample F and derived
/// quality flags. arc_length is filled for positive-definite structures.
struct GeodesicPath {
  struct Sample {
    double t;
    std::vector<double> x, y;
    double F;
  };
  std::vector<Sample> samples;
  double arc_length = 0.0;
  double drift = 0.0;  // max_t |F(t) - F(0)| / |F(0)|
  bool positive_kind = false;
  bool domain_exit = false;
  bool drift_exceeded = false;

  bool ok() const { return !domain_exit && !drift_exceeded; }
  const Sample& endpoint() const { return samples.back(); }
};

namespace detail {

inline std::vector<double> spray_flow(const ScalarFieldTM& f, std::span<const double> z) {
  const std::size_t n = z.size() / 2;
  std::span<const double> x = z.subspan(0, n), y = z.subspan(n, n);
  auto g = spray_at<double>(f, x, y);
  std::vector<double> out(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = y[i];
    out[n + i] = -2.0 * g[i];
  }
  return out;
}

}  // namespace detail

/// X(x, y) = (y, -2G): the value of the spray vector field at one point of
/// the tangent bundle.
inline std::vector<double> spray_flow_field(const FinslerStructure& s,
                                            std::span<const double> x,
                                            std::span<const double> y) {
  s.require_domain(x, y);
  std::vector<double> z(x.begin(), x.end());
  z.insert(z.end(), y.begin(), y.end());
  return detail::spray_flow(s.field(), z);
}

/// One classical RK4 step of z' = flow(z).
template <class Flow>
std::vector<double> rk4_step(Flow&& flow, std::span<const double> z, double h) {
  const std::size_t m = z.size();
  auto k1 = flow(z);
  std::vector<double> tmp(m);
  for (std::size_t i = 0; i < m; ++i) tmp[i] = z[i] + 0.5 * h * k1[i];
  auto k2 = flow(std::span<const double>(tmp));
  for (std::size_t i = 0; i < m; ++i) tmp[i] = z[i] + 0.5 * h * k2[i];
  auto k3 = flow(std::span<const double>(tmp));
  for (std::size_t i = 0; i < m; ++i) tmp[i] = z[i] + h * k3[i];
  auto k4 = flow(std::span<const double>(tmp));
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i)
    out[i] = z[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

/// Composite Simpson over uniformly spaced values (3/8 rule absorbs an odd
/// tail interval).
inline double simpson(std::span<const double> v, double h) {
  const std::size_t m = v.size() - 1;  // interval count
  if (m == 0) return 0.0;
  if (m == 1) return 0.5 * h * (v[0] + v[1]);
  double acc = 0.0;
  std::size_t even_end = (m % 2 == 0) ? m : m - 3;
  for (std::size_t i = 0; i + 2 <= even_end; i += 2)
    acc += (h / 3.0) * (v[i] + 4.0 * v[i + 1] + v[i + 2]);
  if (m % 2 != 0) {
    if (m >= 3) {
      std::size_t i = m - 3;
      acc += (3.0 * h / 8.0) * (v[i] + 3.0 * v[i + 1] + 3.0 * v[i + 2] + v[i + 3]);
    }
  }
  return acc;
}

/// Integrate the canonical geodesic system xdot = y, ydot = -2G(x, y) with
/// fixed-step RK4. The path is flagged (not silently returned) when the
/// trajectory exits the structure's domain or the F-drift exceeds the
/// configured tolerance.
inline GeodesicPath integrate(const FinslerStructure& s, std::span<const double> x0,
                              std::span<const double> y0, double t_end,
                              const IntegratorConfig& cfg) {
  cfg.validate();
  if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
  s.require_domain(x0, y0);
  const std::size_t n = y0.size();
  const double h = t_end / static_cast<double>(cfg.steps);
  const ScalarFieldTM& field = s.field();

  GeodesicPath path;
  path.positive_kind = s.kind() == MetricKind::positive_definite;

  std::vector<double> z(x0.begin(), x0.end());
  z.insert(z.end(), y0.begin(), y0.end());

  auto record = [&](double t) {
    GeodesicPath::Sample smp;
    smp.t = t;
    smp.x.assign(z.begin(), z.begin() + n);
    smp.y.assign(z.begin() + n, z.end());
    smp.F = field.eval(std::span<const double>(smp.x), std::span<const double>(smp.y));
    path.samples.push_back(std::move(smp));
  };
  record(0.0);
  const double f0 = path.samples.front().F;

  auto flow = [&](std::span<const double> zz) { return detail::spray_flow(field, zz); };

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<double> znext;
    try {
      znext = rk4_step(flow, std::span<const double>(z), h);
    } catch (const Error& e) {
      throw Error("spray evaluation failed at step " + std::to_string(step + 1) + ": " +
                  e.what());
    }
    std::span<const double> xs(znext.data(), n), ys(znext.data() + n, n);
    if (!s.in_domain(xs, ys)) {
      path.domain_exit = true;
      break;
    }
    z = std::move(znext);
    record(h * static_cast<double>(step + 1));
  }

  for (const auto& smp : path.samples)
    path.drift = std::max(path.drift, std::abs(smp.F - f0) / std::abs(f0));
  path.drift_exceeded = path.drift > cfg.drift_tolerance;

  if (path.positive_kind) {
    std::vector<double> l(path.samples.size());
    for (std::size_t i = 0; i < l.size(); ++i) l[i] = std::sqrt(path.samples[i].F);
    path.arc_length = simpson(l, h);
  }
  return path;
}

/// s = integral of L dt over the recorded samples (composite Simpson).
inline double arc_length(const GeodesicPath& path) {
  if (!path.positive_kind)
    throw UnsupportedKindError("arc length is defined only for positive-definite structures");
  if (path.samples.size() < 2) return 0.0;
  std::vector<double> l(path.samples.size());
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = std::sqrt(path.samples[i].F);
  double h = path.samples[1].t - path.samples[0].t;
  return simpson(l, h);
}

}  // namespace finsler
