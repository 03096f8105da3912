#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/expr.hpp"
#include "finsler/jet.hpp"
#include "finsler/linalg.hpp"
#include "finsler/structure.hpp"

namespace finsler {

/// Spray, nonlinear connection, Berwald coefficients, Christoffel symbols of
/// g at frozen y, and the Cartan connection pair at one (x, y).
struct ConnectionSample {
  std::vector<double> x, y;
  std::vector<double> spray;        // n, G^k
  std::vector<double> nonlinear;    // n*n, N^k_i
  std::vector<double> berwald;      // n*n*n, G^k_ij
  std::vector<double> christoffel;  // n*n*n, {k ij}
  std::vector<double> cartan_h;     // n*n*n, Gamma*^k_ij
  std::vector<double> cartan_v;     // n*n*n, C^k_ij

  int dim() const { return static_cast<int>(y.size()); }
  double n_at(int k, int i) const { return nonlinear[k * dim() + i]; }
  double b_at(int k, int i, int j) const { return berwald[(k * dim() + i) * dim() + j]; }
  double chr_at(int k, int i, int j) const { return christoffel[(k * dim() + i) * dim() + j]; }
  double ch_at(int k, int i, int j) const { return cartan_h[(k * dim() + i) * dim() + j]; }
  double cv_at(int k, int i, int j) const { return cartan_v[(k * dim() + i) * dim() + j]; }
};

// ---- tower-generic building blocks -----------------------------------------

namespace detail {

/// F with one x-seeded and one y-seeded jet level on top of S: gives the
/// x-gradient and the mixed x,y second derivatives in a single pass.
template <class S>
Jet<Jet<S>> eval_xy(const ScalarFieldTM& f, std::span<const S> x, std::span<const S> y) {
  using S1 = Jet<S>;
  using S2 = Jet<S1>;
  const std::size_t n = y.size();
  std::vector<S2> xx, yy;
  xx.reserve(n);
  yy.reserve(n);
  for (std::size_t a = 0; a < n; ++a) {
    S1 inner(x[a], n);  // inner level seeds y only
    S2 v(inner, n);
    v.partial(a) = tower_constant_like(1.0, inner);  // outer level seeds x
    xx.push_back(std::move(v));
  }
  for (std::size_t b = 0; b < n; ++b) {
    S1 inner(y[b], n);
    inner.partial(b) = tower_constant_like(1.0, y[b]);
    yy.emplace_back(inner, n);
  }
  return f.eval(std::span<const S2>(xx), std::span<const S2>(yy));
}

}  // namespace detail

/// Geodesic spray G^k = 1/4 g^{ki} (d_j F_{.i} y^j - d_i F), generic over the
/// tower so every derived object (N, Berwald, horizontal derivatives of
/// spray-dependent composites) can be obtained by further seeding.
template <class S>
std::vector<S> spray_at(const ScalarFieldTM& f, std::span<const S> x, std::span<const S> y) {
  const std::size_t n = y.size();
  auto m = metric_at<S>(f, x, y);
  auto r = detail::eval_xy(f, x, y);
  // r.partial(j).value() = dF/dx_j ; r.partial(j).partial(i) = d2F/dx_j dy_i
  std::vector<S> term(n, tower_constant_like(0.0, y[0]));
  for (std::size_t i = 0; i < n; ++i) {
    S acc = tower_constant_like(0.0, y[0]);
    for (std::size_t j = 0; j < n; ++j) acc += r.partial(j).partial(i) * y[j];
    term[i] = acc - r.partial(i).value();
  }
  std::vector<S> g(n, tower_constant_like(0.0, y[0]));
  for (std::size_t k = 0; k < n; ++k) {
    S acc = tower_constant_like(0.0, y[0]);
    for (std::size_t i = 0; i < n; ++i) acc += m.g_inv[k * n + i] * term[i];
    g[k] = 0.25 * acc;
  }
  return g;
}

/// N^k_i = dG^k/dy^i at tower scalars.
template <class S>
std::vector<S> nonlinear_at(const ScalarFieldTM& f, std::span<const S> x,
                            std::span<const S> y) {
  using S1 = Jet<S>;
  const std::size_t n = y.size();
  std::vector<S1> xx, yy;
  for (std::size_t a = 0; a < n; ++a) xx.emplace_back(x[a], n);
  for (std::size_t b = 0; b < n; ++b) {
    S1 v(y[b], n);
    v.partial(b) = tower_constant_like(1.0, y[b]);
    yy.push_back(std::move(v));
  }
  auto g1 = spray_at<S1>(f, std::span<const S1>(xx), std::span<const S1>(yy));
  std::vector<S> out(n * n, tower_constant_like(0.0, y[0]));
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) out[k * n + i] = g1[k].partial(i);
  return out;
}

// ---- point operations -------------------------------------------------------

inline std::vector<double> spray(const FinslerStructure& s, std::span<const double> x,
                                 std::span<const double> y) {
  s.require_domain(x, y);
  return spray_at<double>(s.field(), x, y);
}

inline std::vector<double> nonlinear_coeffs(const FinslerStructure& s,
                                            std::span<const double> x,
                                            std::span<const double> y) {
  s.require_domain(x, y);
  return nonlinear_at<double>(s.field(), x, y);
}

/// Everything in one sample. The spray/N/Berwald trio comes from a single
/// doubly y-seeded spray evaluation; Christoffel and the Cartan pair follow
/// from first metric derivatives.
inline ConnectionSample connection_sample(const FinslerStructure& s,
                                          std::span<const double> x,
                                          std::span<const double> y) {
  s.require_domain(x, y);
  const std::size_t n = y.size();
  const ScalarFieldTM& f = s.field();
  ConnectionSample out;
  out.x.assign(x.begin(), x.end());
  out.y.assign(y.begin(), y.end());

  {
    std::vector<J2> xx, yy;
    for (std::size_t a = 0; a < n; ++a) xx.emplace_back(J1(x[a], n), n);
    for (std::size_t b = 0; b < n; ++b) {
      J1 inner(y[b], n);
      inner.partial(b) = 1.0;
      J2 v(inner, n);
      v.partial(b) = tower_constant_like(1.0, inner);
      yy.push_back(std::move(v));
    }
    auto g2 = spray_at<J2>(f, std::span<const J2>(xx), std::span<const J2>(yy));
    out.spray.resize(n);
    out.nonlinear.resize(n * n);
    out.berwald.resize(n * n * n);
    for (std::size_t k = 0; k < n; ++k) {
      out.spray[k] = tower_value(g2[k]);
      for (std::size_t i = 0; i < n; ++i) {
        out.nonlinear[k * n + i] = g2[k].value().partial(i);
        for (std::size_t j = 0; j < n; ++j)
          out.berwald[(k * n + i) * n + j] = g2[k].partial(i).partial(j);
      }
    }
  }

  // metric, x-derivatives and y-derivatives of g
  auto m = metric_at<double>(f, x, y);
  std::vector<double> dgx(n * n * n), dgy(n * n * n);
  {
    std::vector<J1> xx, yy;
    for (std::size_t a = 0; a < n; ++a) {
      J1 v(x[a], n);
      v.partial(a) = 1.0;
      xx.push_back(std::move(v));
    }
    for (std::size_t b = 0; b < n; ++b) yy.emplace_back(y[b], n);
    auto mg = metric_at<J1>(f, std::span<const J1>(xx), std::span<const J1>(yy));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k)
          dgx[(i * n + j) * n + k] = mg.g[i * n + j].partial(k);
  }
  {
    std::vector<J1> xx, yy;
    for (std::size_t a = 0; a < n; ++a) xx.emplace_back(x[a], n);
    for (std::size_t b = 0; b < n; ++b) {
      J1 v(y[b], n);
      v.partial(b) = 1.0;
      yy.push_back(std::move(v));
    }
    auto mg = metric_at<J1>(f, std::span<const J1>(xx), std::span<const J1>(yy));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k)
          dgy[(i * n + j) * n + k] = mg.g[i * n + j].partial(k);
  }

  out.christoffel.resize(n * n * n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < n; ++t)
          acc += m.g_inv[k * n + t] * (dgx[(t * n + j) * n + i] + dgx[(i * n + t) * n + j] -
                                       dgx[(i * n + j) * n + t]);
        out.christoffel[(k * n + i) * n + j] = 0.5 * acc;
      }

  out.cartan_h.resize(n * n * n);
  out.cartan_v.resize(n * n * n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double corr = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
          double inner = 0.0;
          for (std::size_t t = 0; t < n; ++t)
            inner += dgy[(p * n + i) * n + t] * out.nonlinear[t * n + j] +
                     dgy[(j * n + p) * n + t] * out.nonlinear[t * n + i] -
                     dgy[(i * n + j) * n + t] * out.nonlinear[t * n + p];
          corr += m.g_inv[k * n + p] * inner;
        }
        out.cartan_h[(k * n + i) * n + j] =
            out.christoffel[(k * n + i) * n + j] - 0.5 * corr;
        double cv = 0.0;
        for (std::size_t t = 0; t < n; ++t)
          cv += m.g_inv[k * n + t] * dgy[(i * n + j) * n + t];
        out.cartan_v[(k * n + i) * n + j] = 0.5 * cv;
      }

  return out;
}

inline std::vector<double> berwald_coeffs(const FinslerStructure& s,
                                          std::span<const double> x,
                                          std::span<const double> y) {
  return connection_sample(s, x, y).berwald;
}

/// (Gamma*^k_ij, C^k_ij).
inline std::pair<std::vector<double>, std::vector<double>> cartan_coeffs(
    const FinslerStructure& s, std::span<const double> x, std::span<const double> y) {
  auto cs = connection_sample(s, x, y);
  return {std::move(cs.cartan_h), std::move(cs.cartan_v)};
}

// ---- derivatives of fields on the tangent bundle ---------------------------

/// delta_i f = df/dx_i - N^k_i df/dy_k for a vector-valued field functor
/// callable as std::vector<S>(span<const S> x, span<const S> y).
template <class Field>
std::vector<double> horizontal_derivative_components(const FinslerStructure& s, Field&& f,
                                                     std::span<const double> x,
                                                     std::span<const double> y,
                                                     std::size_t slot) {
  s.require_domain(x, y);
  const std::size_t n = y.size();
  auto nl = nonlinear_at<double>(s.field(), x, y);
  // seeds: 0 = x_slot, 1..n = y_k
  std::vector<J1> xx, yy;
  for (std::size_t a = 0; a < n; ++a) {
    J1 v(x[a], n + 1);
    if (a == slot) v.partial(0) = 1.0;
    xx.push_back(std::move(v));
  }
  for (std::size_t b = 0; b < n; ++b) {
    J1 v(y[b], n + 1);
    v.partial(1 + b) = 1.0;
    yy.push_back(std::move(v));
  }
  std::vector<J1> vals = f(std::span<const J1>(xx), std::span<const J1>(yy));
  std::vector<double> out(vals.size());
  for (std::size_t c = 0; c < vals.size(); ++c) {
    double d = vals[c].partial(0);
    for (std::size_t k = 0; k < n; ++k) d -= nl[k * n + slot] * vals[c].partial(1 + k);
    out[c] = d;
  }
  return out;
}

template <class Field>
double horizontal_derivative(const FinslerStructure& s, Field&& f,
                             std::span<const double> x, std::span<const double> y,
                             std::size_t slot) {
  auto wrap = [&](auto xs, auto ys) {
    using S = std::decay_t<decltype(xs[0])>;
    return std::vector<S>{f(xs, ys)};
  };
  return horizontal_derivative_components(s, wrap, x, y, slot)[0];
}

/// Plain vertical derivative d(.)/dy_slot of a vector-valued field functor.
template <class Field>
std::vector<double> vertical_derivative_components(const FinslerStructure& s, Field&& f,
                                                   std::span<const double> x,
                                                   std::span<const double> y,
                                                   std::size_t slot) {
  s.require_domain(x, y);
  const std::size_t n = y.size();
  std::vector<J1> xx, yy;
  for (std::size_t a = 0; a < n; ++a) xx.emplace_back(x[a], 1);
  for (std::size_t b = 0; b < n; ++b) {
    J1 v(y[b], 1);
    if (b == slot) v.partial(0) = 1.0;
    yy.push_back(std::move(v));
  }
  std::vector<J1> vals = f(std::span<const J1>(xx), std::span<const J1>(yy));
  std::vector<double> out(vals.size());
  for (std::size_t c = 0; c < vals.size(); ++c) out[c] = vals[c].partial(0);
  return out;
}

enum class DerivKind { horizontal, vertical };
enum class ConnectionChoice { cartan, berwald };
enum class IndexVariance { covariant, contravariant };

/// Covariant derivative of a tensor field of rank <= 2 in the Cartan (or
/// Berwald) connection. Horizontal kind: delta-derivative with Gamma* (or
/// G^k_ij) corrections; vertical kind: plain y-derivative with C (or zero)
/// corrections. One correction term per index, sign by variance.
template <class Field>
std::vector<double> covariant_derivative(const FinslerStructure& s, Field&& T,
                                         std::span<const IndexVariance> variances,
                                         std::span<const double> x,
                                         std::span<const double> y, std::size_t slot,
                                         DerivKind kind,
                                         ConnectionChoice conn = ConnectionChoice::cartan) {
  const std::size_t rank = variances.size();
  if (rank > 2)
    throw DomainError("covariant_derivative supports tensors of rank <= 2");
  const std::size_t n = y.size();

  std::vector<double> base =
      kind == DerivKind::horizontal
          ? horizontal_derivative_components(s, T, x, y, slot)
          : vertical_derivative_components(s, T, x, y, slot);
  if (rank == 0) return base;

  auto cs = connection_sample(s, x, y);
  const std::vector<double>* coeff = nullptr;
  std::vector<double> zeros;
  if (kind == DerivKind::horizontal)
    coeff = conn == ConnectionChoice::cartan ? &cs.cartan_h : &cs.berwald;
  else if (conn == ConnectionChoice::cartan)
    coeff = &cs.cartan_v;
  else {
    zeros.assign(n * n * n, 0.0);  // Berwald connection has no vertical part
    coeff = &zeros;
  }
  auto gamma = [&](std::size_t k, std::size_t i, std::size_t j) {
    return (*coeff)[(k * n + i) * n + j];
  };

  std::vector<double> tval;
  {
    std::vector<double> xd(x.begin(), x.end()), yd(y.begin(), y.end());
    tval = T(std::span<const double>(xd), std::span<const double>(yd));
  }

  std::vector<double> out = base;
  if (rank == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      double corr = 0.0;
      for (std::size_t t = 0; t < n; ++t)
        corr += (variances[0] == IndexVariance::covariant)
                    ? -gamma(t, i, slot) * tval[t]
                    : gamma(i, t, slot) * tval[t];
      out[i] += corr;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double corr = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
          corr += (variances[0] == IndexVariance::covariant)
                      ? -gamma(t, i, slot) * tval[t * n + j]
                      : gamma(i, t, slot) * tval[t * n + j];
          corr += (variances[1] == IndexVariance::covariant)
                      ? -gamma(t, j, slot) * tval[i * n + t]
                      : gamma(j, t, slot) * tval[i * n + t];
        }
        out[i * n + j] += corr;
      }
  }
  return out;
}

/// The metric as a field functor, for compatibility checks.
struct MetricFieldFn {
  const ScalarFieldTM* f;
  template <class S>
  std::vector<S> operator()(std::span<const S> x, std::span<const S> y) const {
    return metric_at<S>(*f, x, y).g;
  }
};

// ---- chart transformation ---------------------------------------------------

/// Expression-backed coordinate change x -> x'; Jacobian and second
/// derivatives come from the derivative tower applied to the components.
struct ChartMap {
  int n = 0;
  std::vector<ExprAst> forward;  // n components over x0..x{n-1}

  static ChartMap from_strings(const std::vector<std::string>& comps, int n) {
    ChartMap m;
    m.n = n;
    for (const auto& s : comps) m.forward.push_back(parse(s, n));
    if (static_cast<int>(m.forward.size()) != n)
      throw ConfigError("chart map needs n components");
    return m;
  }

  template <class S>
  std::vector<S> eval(std::span<const S> x) const {
    std::vector<S> out;
    out.reserve(forward.size());
    std::span<const S> no_y;
    for (const auto& e : forward) out.push_back(e.evaluate<S>(x, no_y));
    return out;
  }
};

struct SprayTransformResult {
  std::vector<double> mapped_x;  // x' = phi(x)
  std::vector<double> mapped_y;  // y' = J y
  std::vector<double> direct;    // G' of the pushed structure at (x', y')
  std::vector<double> law_rhs;   // J G - 1/2 H(y, y)
  double max_residual = 0.0;
};

namespace detail {

// F'(x', y') = F(xi(x'), J(xi)^{-1} y') with xi the second-order local
// inverse Taylor model of the chart around the test point. The spray needs
// derivatives of F' only up to total order two in x', which the model
// matches exactly.
class PushedField : public ScalarFieldBase<PushedField> {
public:
  PushedField(const ScalarFieldTM& base, const ChartMap& map, std::vector<double> x0,
              std::vector<double> xp0, std::vector<double> jinv, std::vector<double> hess)
      : base_(base), map_(map), x0_(std::move(x0)), xp0_(std::move(xp0)),
        jinv_(std::move(jinv)), hess_(std::move(hess)) {}

  int dimension() const override { return base_.dimension(); }

  template <class S>
  S ev(std::span<const S> xp, std::span<const S> yp) const {
    const std::size_t n = xp.size();
    std::vector<S> u(n, tower_constant_like(0.0, xp[0]));
    for (std::size_t a = 0; a < n; ++a) {
      S acc = tower_constant_like(0.0, xp[0]);
      for (std::size_t b = 0; b < n; ++b) acc += jinv_[a * n + b] * (xp[b] - xp0_[b]);
      u[a] = acc;
    }
    std::vector<S> xi(n, tower_constant_like(0.0, xp[0]));
    for (std::size_t a = 0; a < n; ++a) {
      S second = tower_constant_like(0.0, xp[0]);
      for (std::size_t b = 0; b < n; ++b) {
        S hb = tower_constant_like(0.0, xp[0]);
        for (std::size_t c = 0; c < n; ++c)
          for (std::size_t d = 0; d < n; ++d)
            hb += hess_[(b * n + c) * n + d] * u[c] * u[d];
        second += jinv_[a * n + b] * hb;
      }
      xi[a] = x0_[a] + u[a] - 0.5 * second;
    }
    // Jacobian of the chart at xi, in tower arithmetic
    using S1 = Jet<S>;
    std::vector<S1> xj;
    xj.reserve(n);
    for (std::size_t a = 0; a < n; ++a) {
      S1 v(xi[a], n);
      v.partial(a) = tower_constant_like(1.0, xi[a]);
      xj.push_back(std::move(v));
    }
    auto mapped = map_.eval(std::span<const S1>(xj));
    std::vector<S> jac(n * n, tower_constant_like(0.0, xp[0]));
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) jac[a * n + b] = mapped[a].partial(b);
    auto jac_inv = invert_matrix(std::span<const S>(jac), n);
    std::vector<S> w(n, tower_constant_like(0.0, xp[0]));
    for (std::size_t a = 0; a < n; ++a) {
      S acc = tower_constant_like(0.0, xp[0]);
      for (std::size_t b = 0; b < n; ++b) acc += jac_inv.inverse[a * n + b] * yp[b];
      w[a] = acc;
    }
    return base_.eval(std::span<const S>(xi), std::span<const S>(w));
  }

private:
  const ScalarFieldTM& base_;
  const ChartMap& map_;
  std::vector<double> x0_, xp0_;
  std::vector<double> jinv_;  // J(x0)^{-1}
  std::vector<double> hess_;  // d2 phi / dx dx at x0
};

}  // namespace detail

/// Connection identity suite over a sampling plan: Berwald contractions,
/// the Cartan condition, metric compatibility (h and v), two-path agreement
/// for N, lower-index symmetries, and the Riemannian reduction when the
/// provenance warrants it.
inline ValidationReport connection_validate(const FinslerStructure& s,
                                            const SamplerPlan& plan) {
  const int n = s.dimension();
  struct Acc {
    double max_res = 0.0;
    std::size_t used = 0;
  };
  Acc berwald_n, berwald_2g, cartan_n, n_paths, compat_h, compat_v, lower_sym, riem_red,
      riem_cv;
  const bool riemannian = s.metric_is_quadratic();

  SampleStream stream(plan, n);
  std::size_t used = 0, skipped = 0, attempts = 0;
  const std::size_t max_attempts = plan.count * 16 + 64;
  const std::vector<IndexVariance> cov2{IndexVariance::covariant, IndexVariance::covariant};
  MetricFieldFn gfield{&s.field()};

  while (used < plan.count && attempts < max_attempts) {
    ++attempts;
    auto [xv, yv] = stream.next();
    std::span<const double> x(xv), y(yv);
    if (!s.in_domain(x, y)) {
      ++skipped;
      continue;
    }
    try {
      auto cs = connection_sample(s, x, y);
      auto nl1 = nonlinear_at<double>(s.field(), x, y);
      double nscale = 1.0;
      for (double v : cs.nonlinear) nscale = std::max(nscale, std::abs(v));

      for (int k = 0; k < n; ++k) {
        double gyy = 0.0;
        for (int i = 0; i < n; ++i) {
          double ny = 0.0, gammay = 0.0;
          for (int j = 0; j < n; ++j) {
            ny += cs.b_at(k, i, j) * y[j];
            gammay += cs.ch_at(k, i, j) * y[j];
            gyy += cs.b_at(k, i, j) * y[i] * y[j];
          }
          berwald_n.max_res =
              std::max(berwald_n.max_res, std::abs(ny - cs.n_at(k, i)) / nscale);
          cartan_n.max_res =
              std::max(cartan_n.max_res, std::abs(gammay - cs.n_at(k, i)) / nscale);
          n_paths.max_res = std::max(
              n_paths.max_res, std::abs(nl1[k * n + i] - cs.n_at(k, i)) / nscale);
        }
        berwald_2g.max_res =
            std::max(berwald_2g.max_res,
                     std::abs(gyy - 2.0 * cs.spray[k]) / std::max(1.0, std::abs(2.0 * cs.spray[k])));
      }
      berwald_n.used++;
      berwald_2g.used++;
      cartan_n.used++;
      n_paths.used++;

      double sym = 0.0;
      for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
          for (int j = i; j < n; ++j) {
            sym = std::max(sym, std::abs(cs.b_at(k, i, j) - cs.b_at(k, j, i)));
            sym = std::max(sym, std::abs(cs.chr_at(k, i, j) - cs.chr_at(k, j, i)));
            sym = std::max(sym, std::abs(cs.ch_at(k, i, j) - cs.ch_at(k, j, i)));
            sym = std::max(sym, std::abs(cs.cv_at(k, i, j) - cs.cv_at(k, j, i)));
          }
      lower_sym.max_res = std::max(lower_sym.max_res, sym);
      lower_sym.used++;

      for (std::size_t slot = 0; slot < static_cast<std::size_t>(n); ++slot) {
        auto h = covariant_derivative(s, gfield, cov2, x, y, slot, DerivKind::horizontal);
        auto v = covariant_derivative(s, gfield, cov2, x, y, slot, DerivKind::vertical);
        for (double r : h) compat_h.max_res = std::max(compat_h.max_res, std::abs(r));
        for (double r : v) compat_v.max_res = std::max(compat_v.max_res, std::abs(r));
      }
      compat_h.used++;
      compat_v.used++;

      if (riemannian) {
        double d = 0.0, cv = 0.0;
        for (int k = 0; k < n; ++k)
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
              d = std::max(d, std::abs(cs.b_at(k, i, j) - cs.chr_at(k, i, j)));
              d = std::max(d, std::abs(cs.ch_at(k, i, j) - cs.chr_at(k, i, j)));
              cv = std::max(cv, std::abs(cs.cv_at(k, i, j)));
            }
        riem_red.max_res = std::max(riem_red.max_res, d);
        riem_red.used++;
        riem_cv.max_res = std::max(riem_cv.max_res, cv);
        riem_cv.used++;
      }
      ++used;
    } catch (const DomainError&) {
      ++skipped;
    } catch (const EvalError&) {
      ++skipped;
    } catch (const DegeneracyError&) {
      // finsler_core's nondegeneracy check owns this defect; the connection
      // identities are not evaluable on such samples
      ++skipped;
    } catch (const ConditioningError&) {
      ++skipped;
    }
  }

  ValidationReport rep;
  auto add = [&](const std::string& name, const Acc& a, double tol) {
    IdentityCheck c;
    c.name = name;
    c.tolerance = tol;
    c.max_residual = a.max_res;
    c.samples = a.used;
    c.skipped = skipped;
    c.pass = a.used > 0 && a.max_res <= tol;
    rep.checks.push_back(c);
    rep.all_pass = rep.all_pass && c.pass;
  };
  add("conn_berwald_contracts_to_N", berwald_n, 1e-9);
  add("conn_berwald_contracts_to_2G", berwald_2g, 1e-9);
  add("conn_cartan_condition_N", cartan_n, 1e-8);
  add("conn_N_two_paths", n_paths, 1e-10);
  add("conn_metric_compat_h", compat_h, 1e-8);
  add("conn_metric_compat_v", compat_v, 1e-8);
  add("conn_lower_index_symmetry", lower_sym, 1e-12);
  if (riemannian) {
    add("conn_riemannian_reduction", riem_red, 1e-8);
    add("conn_riemannian_cartan_v_zero", riem_cv, 1e-10);
  }
  return rep;
}

/// Push the structure through the chart, compute G' directly, and compare
/// with the transformation law G'^k = J^k_m G^m - 1/2 H^k_{ij} y^i y^j.
inline SprayTransformResult transform_spray_check(const FinslerStructure& s,
                                                  const ChartMap& map,
                                                  std::span<const double> x,
                                                  std::span<const double> y) {
  s.require_domain(x, y);
  const std::size_t n = y.size();
  if (map.n != static_cast<int>(n))
    throw ConfigError("chart map dimension mismatch");

  // chart values, Jacobian, second derivatives at x
  std::vector<double> xp(n), jac(n * n), hess(n * n * n);
  {
    std::vector<J2> xx;
    for (std::size_t a = 0; a < n; ++a) {
      J1 l1(x[a], n);
      l1.partial(a) = 1.0;
      J2 v(l1, n);
      v.partial(a) = tower_constant_like(1.0, l1);
      xx.push_back(std::move(v));
    }
    auto mapped = map.eval(std::span<const J2>(xx));
    for (std::size_t a = 0; a < n; ++a) {
      xp[a] = tower_value(mapped[a]);
      for (std::size_t b = 0; b < n; ++b) {
        jac[a * n + b] = mapped[a].value().partial(b);
        for (std::size_t c = 0; c < n; ++c)
          hess[(a * n + b) * n + c] = mapped[a].partial(b).partial(c);
      }
    }
  }
  auto jinv = [&] {
    auto inv = invert_matrix(std::span<const double>(jac), n);
    if (std::abs(inv.det) <= 1e-10)
      throw DegeneracyError("chart Jacobian is not invertible at the test point");
    return inv.inverse;
  }();

  SprayTransformResult res;
  res.mapped_x = xp;
  res.mapped_y.assign(n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) res.mapped_y[a] += jac[a * n + b] * y[b];

  auto g = spray_at<double>(s.field(), x, y);
  res.law_rhs.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t m = 0; m < n; ++m) acc += jac[k * n + m] * g[m];
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) quad += hess[(k * n + i) * n + j] * y[i] * y[j];
    res.law_rhs[k] = acc - 0.5 * quad;
  }

  detail::PushedField pushed(s.field(), map, {x.begin(), x.end()}, xp, jinv, hess);
  res.direct = spray_at<double>(pushed, std::span<const double>(res.mapped_x),
                                std::span<const double>(res.mapped_y));

  res.max_residual = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    res.max_residual = std::max(res.max_residual, std::abs(res.direct[k] - res.law_rhs[k]));
  return res;
}

}  // namespace finsler
