#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "finsler/errors.hpp"

namespace finsler {

// Truncated first-order Taylor scalar with a runtime set of seed directions.
// Nesting (Jet<Jet<double>>, ...) yields exact mixed partials of the nesting
// depth; every operation is plain forward-mode arithmetic on the value slot
// plus the chain rule on the partials.
template <class Inner>
class Jet;

using J0 = double;
using J1 = Jet<double>;
using J2 = Jet<J1>;
using J3 = Jet<J2>;
using J4 = Jet<J3>;

inline double tower_value(double s) { return s; }
template <class Inner>
double tower_value(const Jet<Inner>& s);

inline double tower_constant_like(double c, double) { return c; }
template <class Inner>
Jet<Inner> tower_constant_like(double c, const Jet<Inner>& like);

template <class S>
struct tower_depth {
  static constexpr int value = 0;
};
template <class Inner>
struct tower_depth<Jet<Inner>> {
  static constexpr int value = 1 + tower_depth<Inner>::value;
};

template <class Inner>
class Jet {
public:
  using inner_type = Inner;

  Jet() = default;

  /// Scalar with `seed_count` zero partials shaped like `value`.
  Jet(Inner value, std::size_t seed_count) : val_(std::move(value)) {
    d_.assign(seed_count, tower_constant_like(0.0, val_));
  }

  Jet(Inner value, std::vector<Inner> partials)
      : val_(std::move(value)), d_(std::move(partials)) {}

  const Inner& value() const { return val_; }
  Inner& value() { return val_; }
  std::size_t seeds() const { return d_.size(); }
  const Inner& partial(std::size_t i) const { return d_[i]; }
  Inner& partial(std::size_t i) { return d_[i]; }

  Jet operator-() const {
    Jet out(*this);
    out.val_ = -out.val_;
    for (auto& p : out.d_) p = -p;
    return out;
  }

  Jet& operator+=(const Jet& o) {
    assert(d_.size() == o.d_.size());
    val_ += o.val_;
    for (std::size_t i = 0; i < d_.size(); ++i) d_[i] += o.d_[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    assert(d_.size() == o.d_.size());
    val_ -= o.val_;
    for (std::size_t i = 0; i < d_.size(); ++i) d_[i] -= o.d_[i];
    return *this;
  }
  Jet& operator*=(const Jet& o) {
    assert(d_.size() == o.d_.size());
    for (std::size_t i = 0; i < d_.size(); ++i)
      d_[i] = d_[i] * o.val_ + val_ * o.d_[i];
    val_ *= o.val_;
    return *this;
  }
  Jet& operator/=(const Jet& o) {
    assert(d_.size() == o.d_.size());
    val_ /= o.val_;
    for (std::size_t i = 0; i < d_.size(); ++i)
      d_[i] = (d_[i] - val_ * o.d_[i]) / o.val_;
    return *this;
  }

  Jet& operator+=(double c) {
    val_ += c;
    return *this;
  }
  Jet& operator-=(double c) {
    val_ -= c;
    return *this;
  }
  Jet& operator*=(double c) {
    val_ *= c;
    for (auto& p : d_) p *= c;
    return *this;
  }
  Jet& operator/=(double c) {
    val_ /= c;
    for (auto& p : d_) p /= c;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(Jet a, const Jet& b) { return a *= b; }
  friend Jet operator/(Jet a, const Jet& b) { return a /= b; }

  friend Jet operator+(Jet a, double c) { return a += c; }
  friend Jet operator+(double c, Jet a) { return a += c; }
  friend Jet operator-(Jet a, double c) { return a -= c; }
  friend Jet operator-(double c, const Jet& a) {
    Jet out = -a;
    out.val_ += c;
    return out;
  }
  friend Jet operator*(Jet a, double c) { return a *= c; }
  friend Jet operator*(double c, Jet a) { return a *= c; }
  friend Jet operator/(Jet a, double c) { return a /= c; }
  friend Jet operator/(double c, const Jet& a) {
    // c/a = c * a^{-1}; (c/a)' = -(c/a) a'/a
    Jet out(a);
    out.val_ = c / a.val_;
    for (std::size_t i = 0; i < out.d_.size(); ++i)
      out.d_[i] = -(out.val_ * a.d_[i]) / a.val_;
    return out;
  }

private:
  Inner val_{};
  std::vector<Inner> d_;
};

template <class Inner>
double tower_value(const Jet<Inner>& s) {
  return tower_value(s.value());
}

template <class Inner>
Jet<Inner> tower_constant_like(double c, const Jet<Inner>& like) {
  return Jet<Inner>(tower_constant_like(c, like.value()), like.seeds());
}

// ---- elementary functions (chain rule at the outer level, recursing) ----

template <class Inner>
Jet<Inner> sqrt(const Jet<Inner>& a) {
  using std::sqrt;
  Jet<Inner> out(a);
  out.value() = sqrt(a.value());
  Inner f = 0.5 / out.value();
  for (std::size_t i = 0; i < a.seeds(); ++i) out.partial(i) = f * a.partial(i);
  return out;
}

template <class Inner>
Jet<Inner> exp(const Jet<Inner>& a) {
  using std::exp;
  Jet<Inner> out(a);
  out.value() = exp(a.value());
  for (std::size_t i = 0; i < a.seeds(); ++i)
    out.partial(i) = out.value() * a.partial(i);
  return out;
}

template <class Inner>
Jet<Inner> log(const Jet<Inner>& a) {
  using std::log;
  Jet<Inner> out(a);
  out.value() = log(a.value());
  for (std::size_t i = 0; i < a.seeds(); ++i)
    out.partial(i) = a.partial(i) / a.value();
  return out;
}

template <class Inner>
Jet<Inner> sin(const Jet<Inner>& a) {
  using std::cos;
  using std::sin;
  Jet<Inner> out(a);
  out.value() = sin(a.value());
  Inner c = cos(a.value());
  for (std::size_t i = 0; i < a.seeds(); ++i) out.partial(i) = c * a.partial(i);
  return out;
}

template <class Inner>
Jet<Inner> cos(const Jet<Inner>& a) {
  using std::cos;
  using std::sin;
  Jet<Inner> out(a);
  out.value() = cos(a.value());
  Inner s = sin(a.value());
  for (std::size_t i = 0; i < a.seeds(); ++i)
    out.partial(i) = -(s * a.partial(i));
  return out;
}

template <class Inner>
Jet<Inner> tanh(const Jet<Inner>& a) {
  using std::tanh;
  Jet<Inner> out(a);
  out.value() = tanh(a.value());
  Inner f = 1.0 - out.value() * out.value();
  for (std::size_t i = 0; i < a.seeds(); ++i) out.partial(i) = f * a.partial(i);
  return out;
}

/// pow with a constant exponent (the only form the expression grammar admits).
template <class Inner>
Jet<Inner> pow(const Jet<Inner>& a, double e) {
  using std::pow;
  if (e == 0.0) return tower_constant_like(1.0, a);
  Jet<Inner> out(a);
  out.value() = pow(a.value(), e);
  Inner f = e * pow(a.value(), e - 1.0);
  for (std::size_t i = 0; i < a.seeds(); ++i) out.partial(i) = f * a.partial(i);
  return out;
}

/// abs on a jet follows the active branch; differentiating across 0 is a
/// domain violation, not a subgradient.
template <class Inner>
Jet<Inner> abs(const Jet<Inner>& a) {
  double v = tower_value(a);
  if (v > 0.0) return a;
  if (v < 0.0) return -a;
  throw DomainError("abs is not differentiable at 0");
}

}  // namespace finsler
