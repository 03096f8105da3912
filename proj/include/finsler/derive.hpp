#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/jet.hpp"

namespace finsler {

/// What to differentiate: a base point, the coordinate slots to seed, and the
/// derivative order (1..3).
struct DerivativeRequest {
  std::vector<double> at;
  std::vector<std::size_t> slots;
  int order = 1;

  void validate() const {
    if (order < 1 || order > 3)
      throw DomainError("derivative order must be 1, 2, or 3, got " +
                        std::to_string(order));
    for (std::size_t s : slots)
      if (s >= at.size())
        throw DomainError("slot " + std::to_string(s) +
                          " outside dimension " + std::to_string(at.size()));
  }
};

/// All mixed partials of the requested slots up to the requested order.
/// Tensors are stored row-major over slot positions and are exactly
/// symmetric: only canonically ordered components are extracted from the jet
/// tower, the rest are mirrored.
struct Derivatives {
  double value = 0.0;
  std::size_t nslots = 0;
  int order = 0;
  std::vector<double> d1;  // [s]
  std::vector<double> d2;  // [s*s]
  std::vector<double> d3;  // [s*s*s]

  double d2_at(std::size_t p, std::size_t q) const { return d2[p * nslots + q]; }
  double d3_at(std::size_t p, std::size_t q, std::size_t r) const {
    return d3[(p * nslots + q) * nslots + r];
  }
};

namespace detail {

inline void check_finite(const Derivatives& d) {
  auto bad = [](double v) { return !std::isfinite(v); };
  if (bad(d.value) || std::any_of(d.d1.begin(), d.d1.end(), bad) ||
      std::any_of(d.d2.begin(), d.d2.end(), bad) ||
      std::any_of(d.d3.begin(), d.d3.end(), bad))
    throw DomainError("non-finite value in derivative evaluation");
}

}  // namespace detail

/// Exact (to rounding) partial derivatives by nested forward-mode jets.
/// `f` must be callable as `S f(std::span<const S>)` for S = double and the
/// jet towers up to the requested order.
template <class F>
Derivatives derive(F&& f, std::span<const double> at,
                   std::span<const std::size_t> slots, int order) {
  DerivativeRequest req{{at.begin(), at.end()}, {slots.begin(), slots.end()}, order};
  req.validate();

  const std::size_t m = at.size();
  const std::size_t s = slots.size();
  Derivatives out;
  out.nslots = s;
  out.order = order;
  out.d1.assign(s, 0.0);
  if (order >= 2) out.d2.assign(s * s, 0.0);
  if (order >= 3) out.d3.assign(s * s * s, 0.0);

  auto seed_hits = [&](std::size_t coord, auto& jet, auto make_one) {
    for (std::size_t p = 0; p < s; ++p)
      if (slots[p] == coord) jet.partial(p) = make_one(jet.value());
  };

  // Level assignments are canonicalized by variable index so that the same
  // variable multiset extracts the same arithmetic path regardless of how the
  // slot list is ordered; this makes permutation symmetry exact.
  auto by_var = [&](std::size_t a, std::size_t b) { return slots[a] < slots[b]; };

  if (order == 1) {
    std::vector<J1> vars;
    vars.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
      J1 v(at[j], s);
      seed_hits(j, v, [](double) { return 1.0; });
      vars.push_back(std::move(v));
    }
    J1 r = f(std::span<const J1>(vars));
    out.value = tower_value(r);
    for (std::size_t p = 0; p < s; ++p) out.d1[p] = r.partial(p);
  } else if (order == 2) {
    std::vector<J2> vars;
    vars.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
      J1 inner(at[j], s);
      seed_hits(j, inner, [](double) { return 1.0; });
      J2 v(inner, s);
      seed_hits(j, v, [](const J1& like) { return tower_constant_like(1.0, like); });
      vars.push_back(std::move(v));
    }
    J2 r = f(std::span<const J2>(vars));
    out.value = tower_value(r);
    for (std::size_t p = 0; p < s; ++p) out.d1[p] = r.value().partial(p);
    for (std::size_t p = 0; p < s; ++p)
      for (std::size_t q = p; q < s; ++q) {
        std::size_t lv[2] = {p, q};
        std::stable_sort(lv, lv + 2, by_var);
        double c = r.partial(lv[0]).partial(lv[1]);
        out.d2[p * s + q] = c;
        out.d2[q * s + p] = c;
      }
  } else {
    std::vector<J3> vars;
    vars.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
      J1 level1(at[j], s);
      seed_hits(j, level1, [](double) { return 1.0; });
      J2 level2(level1, s);
      seed_hits(j, level2, [](const J1& like) { return tower_constant_like(1.0, like); });
      J3 v(level2, s);
      seed_hits(j, v, [](const J2& like) { return tower_constant_like(1.0, like); });
      vars.push_back(std::move(v));
    }
    J3 r = f(std::span<const J3>(vars));
    out.value = tower_value(r);
    for (std::size_t p = 0; p < s; ++p) out.d1[p] = r.value().value().partial(p);
    for (std::size_t p = 0; p < s; ++p)
      for (std::size_t q = p; q < s; ++q) {
        std::size_t lv[2] = {p, q};
        std::stable_sort(lv, lv + 2, by_var);
        double c = r.value().partial(lv[0]).partial(lv[1]);
        out.d2[p * s + q] = c;
        out.d2[q * s + p] = c;
      }
    std::size_t idx[3];
    for (std::size_t p = 0; p < s; ++p)
      for (std::size_t q = p; q < s; ++q)
        for (std::size_t t = q; t < s; ++t) {
          std::size_t lv[3] = {p, q, t};
          std::stable_sort(lv, lv + 3, by_var);
          double c = r.partial(lv[0]).partial(lv[1]).partial(lv[2]);
          idx[0] = p, idx[1] = q, idx[2] = t;
          std::sort(idx, idx + 3);
          do {
            out.d3[(idx[0] * s + idx[1]) * s + idx[2]] = c;
          } while (std::next_permutation(idx, idx + 3));
        }
  }

  detail::check_finite(out);
  return out;
}

template <class F>
Derivatives derive(F&& f, const DerivativeRequest& req) {
  return derive(std::forward<F>(f), std::span<const double>(req.at),
                std::span<const std::size_t>(req.slots), req.order);
}

/// Default oracle step for a coordinate value.
inline double default_fd_step(double coordinate) {
  const double eps = std::numeric_limits<double>::epsilon();
  return std::cbrt(eps) * std::max(1.0, std::abs(coordinate));
}

namespace detail {

inline void check_step(double coord, double h) {
  if (!(h > 0.0)) throw DomainError("fd_oracle: step must be positive");
  if (coord + h == coord || coord - h == coord)
    throw DomainError("fd_oracle: step underflows at coordinate " +
                      std::to_string(coord));
}

// Central difference with one Richardson level: O(h^4).
template <class G>
double fd_first(G&& g, std::span<const double> at, std::size_t slot, double h) {
  check_step(at[slot], h);
  std::vector<double> p(at.begin(), at.end());
  auto eval_at = [&](double v) {
    p[slot] = v;
    return g(std::span<const double>(p));
  };
  const double x = at[slot];
  auto central = [&](double hh) {
    return (eval_at(x + hh) - eval_at(x - hh)) / (2.0 * hh);
  };
  double c1 = central(h);
  double c2 = central(h / 2.0);
  return (4.0 * c2 - c1) / 3.0;
}

// Second difference in a single slot with one Richardson level.
template <class G>
double fd_second_diag(G&& g, std::span<const double> at, std::size_t slot, double h) {
  check_step(at[slot], h);
  std::vector<double> p(at.begin(), at.end());
  auto eval_at = [&](double v) {
    p[slot] = v;
    return g(std::span<const double>(p));
  };
  const double x = at[slot];
  const double f0 = eval_at(x);
  auto central = [&](double hh) {
    return (eval_at(x + hh) - 2.0 * f0 + eval_at(x - hh)) / (hh * hh);
  };
  double c1 = central(h);
  double c2 = central(h / 2.0);
  return (4.0 * c2 - c1) / 3.0;
}

}  // namespace detail

/// Finite-difference cross-check oracle: central differences with one
/// Richardson extrapolation level (error O(step^4) for orders 1-2; the
/// order-3 estimate nests a first difference over the order-2 stencil).
/// Mixed partials nest one-dimensional differences. Steps are used exactly
/// as given in every slot.
template <class F>
Derivatives fd_oracle(F&& f, std::span<const double> at,
                      std::span<const std::size_t> slots, int order,
                      double step) {
  DerivativeRequest req{{at.begin(), at.end()}, {slots.begin(), slots.end()}, order};
  req.validate();

  const std::size_t s = slots.size();
  Derivatives out;
  out.nslots = s;
  out.order = order;
  out.value = f(at);
  out.d1.assign(s, 0.0);
  if (order >= 2) out.d2.assign(s * s, 0.0);
  if (order >= 3) out.d3.assign(s * s * s, 0.0);

  auto plain = [&](std::span<const double> p) { return f(p); };

  for (std::size_t p = 0; p < s; ++p)
    out.d1[p] = detail::fd_first(plain, at, slots[p], step);

  if (order >= 2) {
    for (std::size_t p = 0; p < s; ++p)
      for (std::size_t q = p; q < s; ++q) {
        double c;
        if (slots[p] == slots[q]) {
          c = detail::fd_second_diag(plain, at, slots[p], step);
        } else {
          auto inner = [&](std::span<const double> pt) {
            return detail::fd_first(plain, pt, slots[q], step);
          };
          c = detail::fd_first(inner, at, slots[p], step);
        }
        out.d2[p * s + q] = c;
        out.d2[q * s + p] = c;
      }
  }

  if (order >= 3) {
    std::size_t idx[3];
    for (std::size_t p = 0; p < s; ++p)
      for (std::size_t q = p; q < s; ++q)
        for (std::size_t t = q; t < s; ++t) {
          auto inner2 = [&](std::span<const double> pt) {
            if (slots[q] == slots[t])
              return detail::fd_second_diag(plain, pt, slots[q], step);
            auto inner1 = [&](std::span<const double> pp) {
              return detail::fd_first(plain, pp, slots[t], step);
            };
            return detail::fd_first(inner1, pt, slots[q], step);
          };
          double c = detail::fd_first(inner2, at, slots[p], step);
          idx[0] = p, idx[1] = q, idx[2] = t;
          std::sort(idx, idx + 3);
          do {
            out.d3[(idx[0] * s + idx[1]) * s + idx[2]] = c;
          } while (std::next_permutation(idx, idx + 3));
        }
  }

  detail::check_finite(out);
  return out;
}

/// fd_oracle with the default per-slot step (cbrt(eps) scaled by coordinate
/// magnitude); uses the largest default among the requested slots so mixed
/// stencils stay consistent.
template <class F>
Derivatives fd_oracle(F&& f, std::span<const double> at,
                      std::span<const std::size_t> slots, int order) {
  double h = 0.0;
  for (std::size_t sl : slots) h = std::max(h, default_fd_step(at[sl]));
  if (h == 0.0) h = default_fd_step(0.0);
  return fd_oracle(std::forward<F>(f), at, slots, order, h);
}

}  // namespace finsler
