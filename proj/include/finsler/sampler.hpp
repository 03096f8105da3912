#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "finsler/errors.hpp"

namespace finsler {

/// Deterministic sampling plan: base points uniform in a coordinate box,
/// directions uniform on the unit sphere scaled by y_radius.
///
/// Generator spec "mt19937_64-boxmuller-v1": uniforms are
/// (next() >> 11) * 2^-53 in [0,1); directions draw n standard normals via
/// Box-Muller pairs (u1 shifted into (0,1]), then normalize and scale. Per
/// sample the x coordinates are drawn first, then the direction.
struct SamplerPlan {
  std::size_t count = 100;
  std::uint64_t seed = 0;
  std::vector<std::pair<double, double>> box;  // per-coordinate; missing -> [-1,1]
  double y_radius = 1.0;

  void validate() const {
    if (count < 1) throw ConfigError("sampler count must be >= 1");
    if (!(y_radius > 0.0)) throw ConfigError("sampler y_radius must be > 0");
    for (auto [lo, hi] : box)
      if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo <= hi))
        throw ConfigError("sampler box bounds must be finite with lo <= hi");
  }
};

class SampleStream {
public:
  SampleStream(const SamplerPlan& plan, int dimension)
      : plan_(plan), dim_(dimension), rng_(plan.seed) {
    plan_.validate();
  }

  /// Draw one (x, y) pair.
  std::pair<std::vector<double>, std::vector<double>> next() {
    std::vector<double> x(dim_), y(dim_);
    for (int i = 0; i < dim_; ++i) {
      auto [lo, hi] = bounds(i);
      x[i] = lo + (hi - lo) * uniform01();
    }
    double norm2 = 0.0;
    do {
      for (int i = 0; i < dim_; ++i) y[i] = normal();
      norm2 = 0.0;
      for (int i = 0; i < dim_; ++i) norm2 += y[i] * y[i];
    } while (norm2 == 0.0);
    double s = plan_.y_radius / std::sqrt(norm2);
    for (int i = 0; i < dim_; ++i) y[i] *= s;
    return {std::move(x), std::move(y)};
  }

private:
  std::pair<double, double> bounds(int i) const {
    if (static_cast<std::size_t>(i) < plan_.box.size()) return plan_.box[i];
    return {-1.0, 1.0};
  }

  double uniform01() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = static_cast<double>((rng_() >> 11) + 1) * 0x1.0p-53;  // (0,1]
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  SamplerPlan plan_;
  int dim_;
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace finsler
