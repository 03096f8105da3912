#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "finsler/connections.hpp"
#include "finsler/errors.hpp"
#include "finsler/expr.hpp"
#include "finsler/structure.hpp"

namespace finsler {

inline constexpr double kFourPi = 12.566370614359172953850573533118;

/// Covector potential A_alpha(x) or A_alpha(x, y) on a 4-dimensional base,
/// expression-backed.
struct PotentialField {
  static constexpr int n = 4;
  std::vector<ExprAst> components;  // exactly 4
  bool y_dependence = false;

  static PotentialField from_strings(const std::vector<std::string>& comps) {
    if (comps.size() != 4)
      throw ConfigError("potential needs exactly 4 components");
    PotentialField p;
    for (const auto& s : comps) p.components.push_back(parse(s, 4));
    for (const auto& c : p.components)
      if (c.depends_on_y()) p.y_dependence = true;
    return p;
  }

  template <class S>
  std::vector<S> eval(std::span<const S> x, std::span<const S> y) const {
    std::vector<S> out;
    out.reserve(4);
    for (const auto& c : components) out.push_back(c.evaluate<S>(x, y));
    return out;
  }
};

enum class CurrentConvention { paper_riemann, paper_finsler };

inline const char* to_string(CurrentConvention c) {
  return c == CurrentConvention::paper_riemann ? "paper-riemann" : "paper-finsler";
}

/// Field strengths at one point of the tangent bundle: the horizontal 2-form
/// block F_{ab}, the horizontal-vertical block F_{a b-bar}, and their raised
/// versions, together with the metric used for raising.
struct FieldSample {
  std::vector<double> x, y;
  std::vector<double> f_hh;     // 4x4, antisymmetric
  std::vector<double> f_hv;     // 4x4, no symmetry
  std::vector<double> f_hh_up;  // F^{ab}
  std::vector<double> f_hv_up;  // F^{a b-bar}
  MetricSample metric;

  double hh(int a, int b) const { return f_hh[a * 4 + b]; }
  double hv(int a, int b) const { return f_hv[a * 4 + b]; }
};

struct CurrentSample {
  std::vector<double> x, y;
  std::vector<double> j;  // 4
  CurrentConvention convention = CurrentConvention::paper_riemann;
  double c = 1.0;
};

namespace detail {

inline void require_four(const FinslerStructure& s) {
  if (s.dimension() != 4)
    throw ConfigError("electrodynamics requires a 4-dimensional structure");
}

template <class S>
std::vector<S> raise_both(const std::vector<S>& t, const std::vector<S>& g_inv,
                          const S& zero_like) {
  std::vector<S> out(16, zero_like);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      S acc = zero_like;
      for (int m = 0; m < 4; ++m)
        for (int v = 0; v < 4; ++v) acc += g_inv[a * 4 + m] * g_inv[b * 4 + v] * t[m * 4 + v];
      out[a * 4 + b] = acc;
    }
  return out;
}

/// F_hv block at tower scalars: F_{a b-bar} = -dA_a/dy^b.
template <class S>
std::vector<S> f_hv_at(const PotentialField& A, std::span<const S> x, std::span<const S> y) {
  using S1 = Jet<S>;
  std::vector<S1> xx, yy;
  for (int a = 0; a < 4; ++a) xx.emplace_back(x[a], 4);
  for (int b = 0; b < 4; ++b) {
    S1 v(y[b], 4);
    v.partial(b) = tower_constant_like(1.0, y[b]);
    yy.push_back(std::move(v));
  }
  auto av = A.eval(std::span<const S1>(xx), std::span<const S1>(yy));
  std::vector<S> out(16, tower_constant_like(0.0, y[0]));
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) out[a * 4 + b] = -av[a].partial(b);
  return out;
}

/// F_hh block at tower scalars: F_{ab} = delta_a A_b - delta_b A_a with the
/// structure's nonlinear connection inside the delta-derivative.
template <class S>
std::vector<S> f_hh_at(const PotentialField& A, const ScalarFieldTM& f,
                       std::span<const S> x, std::span<const S> y) {
  using S1 = Jet<S>;
  // seeds 0..3: x, 4..7: y
  std::vector<S1> xx, yy;
  for (int a = 0; a < 4; ++a) {
    S1 v(x[a], 8);
    v.partial(a) = tower_constant_like(1.0, x[a]);
    xx.push_back(std::move(v));
  }
  for (int b = 0; b < 4; ++b) {
    S1 v(y[b], 8);
    v.partial(4 + b) = tower_constant_like(1.0, y[b]);
    yy.push_back(std::move(v));
  }
  auto av = A.eval(std::span<const S1>(xx), std::span<const S1>(yy));
  std::vector<S> nl;
  if (A.y_dependence) {
    nl = nonlinear_at<S>(f, x, y);
  } else {
    // delta A = dA when A has no y-dependence; skip the spray machinery
    nl.assign(16, tower_constant_like(0.0, y[0]));
  }
  auto delta = [&](int slot, int comp) {
    S d = av[comp].partial(slot);
    if (A.y_dependence)
      for (int k = 0; k < 4; ++k) d -= nl[k * 4 + slot] * av[comp].partial(4 + k);
    return d;
  };
  std::vector<S> out(16, tower_constant_like(0.0, y[0]));
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) out[a * 4 + b] = delta(a, b) - delta(b, a);
  return out;
}

}  // namespace detail

// ---- Riemannian pipeline ----------------------------------------------------

/// F_{ab} = d_a A_b - d_b A_a from plain partials; requires an x-only
/// potential. Raising uses g at (x, y_ref); for quadratic-provenance metrics
/// the reference direction is irrelevant.
inline FieldSample field_strength_riemann(const PotentialField& A,
                                          const FinslerStructure& s,
                                          std::span<const double> x,
                                          std::span<const double> y_ref) {
  detail::require_four(s);
  if (A.y_dependence)
    throw WrongOperationError(
        "potential depends on y: use field_strength_finsler for the Finsler pipeline");
  FieldSample out;
  out.x.assign(x.begin(), x.end());
  out.y.assign(y_ref.begin(), y_ref.end());
  out.metric = metric_tensor(s, x, y_ref);

  std::vector<J1> xx, yy;
  for (int a = 0; a < 4; ++a) {
    J1 v(x[a], 4);
    v.partial(a) = 1.0;
    xx.push_back(std::move(v));
  }
  for (int b = 0; b < 4; ++b) yy.emplace_back(y_ref[b], 4);
  auto av = A.eval(std::span<const J1>(xx), std::span<const J1>(yy));
  out.f_hh.assign(16, 0.0);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      out.f_hh[a * 4 + b] = av[b].partial(a) - av[a].partial(b);
  out.f_hv.assign(16, 0.0);
  out.f_hh_up = detail::raise_both(out.f_hh, out.metric.g_inv, 0.0);
  out.f_hv_up.assign(16, 0.0);
  return out;
}

/// Cyclic first-equation residual d_c F_ab + d_a F_bc + d_b F_ca (the
/// Christoffel terms cancel in the cyclic sum for a symmetric connection, so
/// plain partials realize the covariant statement exactly).
inline std::vector<double> first_equation_residual_riemann(const PotentialField& A,
                                                           std::span<const double> x) {
  if (A.y_dependence)
    throw WrongOperationError("cyclic Riemannian residual needs an x-only potential");
  std::vector<J2> xx, yy;
  for (int a = 0; a < 4; ++a) {
    J1 l1(x[a], 4);
    l1.partial(a) = 1.0;
    J2 v(l1, 4);
    v.partial(a) = tower_constant_like(1.0, l1);
    xx.push_back(std::move(v));
  }
  for (int b = 0; b < 4; ++b) yy.emplace_back(J1(0.0, 4), 4);
  auto av = A.eval(std::span<const J2>(xx), std::span<const J2>(yy));
  // dF_ab/dx_c = d_c d_a A_b - d_c d_b A_a
  auto df = [&](int c, int a, int b) {
    return av[b].partial(a).partial(c) - av[a].partial(b).partial(c);
  };
  std::vector<double> out(64, 0.0);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        out[(a * 4 + b) * 4 + c] = df(c, a, b) + df(a, b, c) + df(b, c, a);
  return out;
}

/// j^b = (c/4pi) (1/v) d_a (v F^{ab}) with v = sqrt|det g|; the metric must
/// be y-independent (Riemannian/quadratic provenance).
inline CurrentSample source_current_riemann(
    const PotentialField& A, const FinslerStructure& s, std::span<const double> x,
    std::span<const double> y_ref, double c_light = 1.0,
    CurrentConvention convention = CurrentConvention::paper_riemann) {
  detail::require_four(s);
  if (!s.metric_is_quadratic())
    throw WrongOperationError("source_current_riemann needs a y-independent metric");
  if (A.y_dependence)
    throw WrongOperationError("source_current_riemann needs an x-only potential");

  // composite P^{ab}(x) = v(x) F^{ab}(x), differentiated in x through the
  // tower; F needs second x-derivatives of A, so A is evaluated one jet
  // level deeper than the metric
  std::vector<J1> xx, yy;
  for (int a = 0; a < 4; ++a) {
    J1 v(x[a], 4);
    v.partial(a) = 1.0;
    xx.push_back(std::move(v));
  }
  for (int b = 0; b < 4; ++b) yy.emplace_back(y_ref[b], 4);
  std::span<const J1> xs(xx), ys(yy);

  auto m = metric_at<J1>(s.field(), xs, ys);
  using std::abs;
  using std::sqrt;
  J1 vol = sqrt(abs(m.det));

  std::vector<J2> xx2, yy2;
  for (int a = 0; a < 4; ++a) {
    J1 l1(x[a], 4);
    l1.partial(a) = 1.0;
    J2 v(l1, 4);
    v.partial(a) = tower_constant_like(1.0, l1);
    xx2.push_back(std::move(v));
  }
  for (int b = 0; b < 4; ++b) yy2.emplace_back(J1(y_ref[b], 4), 4);
  auto av = A.eval(std::span<const J2>(xx2), std::span<const J2>(yy2));
  std::vector<J1> f_hh(16, tower_constant_like(0.0, vol));
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      f_hh[a * 4 + b] = av[b].partial(a) - av[a].partial(b);
  auto up = detail::raise_both(f_hh, m.g_inv, tower_constant_like(0.0, vol));

  const double sign = convention == CurrentConvention::paper_riemann ? 1.0 : -1.0;
  const double v0 = tower_value(vol);
  CurrentSample out;
  out.x.assign(x.begin(), x.end());
  out.y.assign(y_ref.begin(), y_ref.end());
  out.convention = convention;
  out.c = c_light;
  out.j.assign(4, 0.0);
  for (int b = 0; b < 4; ++b) {
    double div = 0.0;
    for (int a = 0; a < 4; ++a) {
      J1 comp = vol * up[a * 4 + b];
      div += comp.partial(a);
    }
    out.j[b] = sign * (c_light / kFourPi) * div / v0;
  }
  return out;
}

// ---- Finsler pipeline --------------------------------------------------------

/// Horizontal block via delta-derivatives, vertical block as minus the plain
/// y-gradient of A; raising with g(x, y).
inline FieldSample field_strength_finsler(const PotentialField& A,
                                          const FinslerStructure& s,
                                          std::span<const double> x,
                                          std::span<const double> y) {
  detail::require_four(s);
  s.require_domain(x, y);
  FieldSample out;
  out.x.assign(x.begin(), x.end());
  out.y.assign(y.begin(), y.end());
  out.metric = metric_tensor(s, x, y);
  out.f_hh = detail::f_hh_at<double>(A, s.field(), x, y);
  out.f_hv = detail::f_hv_at<double>(A, x, y);
  out.f_hh_up = detail::raise_both(out.f_hh, out.metric.g_inv, 0.0);
  out.f_hv_up = detail::raise_both(out.f_hv, out.metric.g_inv, 0.0);
  return out;
}

/// Cyclic residual of the paper's mixed first equation,
/// R[a][b][c] = F_{a-bar b;c} + F_{c a-bar;b} + F_{bc;a-bar},
/// with horizontal Cartan derivatives on unbarred differentiation indices and
/// the vertical one on the barred index. Vanishing is asserted by callers
/// only in the correspondence regime.
inline std::vector<double> first_equation_residual_finsler(const PotentialField& A,
                                                           const FinslerStructure& s,
                                                           std::span<const double> x,
                                                           std::span<const double> y) {
  detail::require_four(s);
  s.require_domain(x, y);
  const std::vector<IndexVariance> cov2{IndexVariance::covariant, IndexVariance::covariant};

  // Phi_{ab} = F_{a-bar b} = -F_hv[b][a]; Psi_{ab} = F_{a b-bar} = F_hv[a][b]
  auto phi_field = [&A](auto xs, auto ys) {
    using S = std::decay_t<decltype(xs[0])>;
    auto hv = detail::f_hv_at<S>(A, xs, ys);
    std::vector<S> out(16, tower_constant_like(0.0, xs[0]));
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) out[a * 4 + b] = -hv[b * 4 + a];
    return out;
  };
  auto psi_field = [&A](auto xs, auto ys) {
    using S = std::decay_t<decltype(xs[0])>;
    return detail::f_hv_at<S>(A, xs, ys);
  };
  auto hh_field = [&A, &s](auto xs, auto ys) {
    using S = std::decay_t<decltype(xs[0])>;
    return detail::f_hh_at<S>(A, s.field(), xs, ys);
  };

  std::vector<double> out(64, 0.0);
  // T1[slot c]: nabla_c Phi ; T2[slot b]: nabla_b Psi ; T3[slot a]: vdot F_hh
  std::vector<std::vector<double>> t1(4), t2(4), t3(4);
  for (std::size_t slot = 0; slot < 4; ++slot) {
    t1[slot] = covariant_derivative(s, phi_field, cov2, x, y, slot, DerivKind::horizontal);
    t2[slot] = covariant_derivative(s, psi_field, cov2, x, y, slot, DerivKind::horizontal);
    t3[slot] = covariant_derivative(s, hh_field, cov2, x, y, slot, DerivKind::vertical);
  }
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        out[(a * 4 + b) * 4 + c] =
            t1[c][a * 4 + b] + t2[b][c * 4 + a] + t3[a][b * 4 + c];
  return out;
}

/// j^a = -(c/4pi)(1/v) [ delta_b (v F^{ab}) + ddot_b (v F^{a b-bar}) ] with
/// v = sqrt|det g(x, y)|. The leading sign can be overridden to +(c/4pi) for
/// cross-comparison with the Riemannian form.
inline CurrentSample source_current_finsler(
    const PotentialField& A, const FinslerStructure& s, std::span<const double> x,
    std::span<const double> y, double c_light = 1.0,
    CurrentConvention convention = CurrentConvention::paper_finsler) {
  detail::require_four(s);
  s.require_domain(x, y);

  auto p_field = [&A, &s](auto xs, auto ys) {
    using S = std::decay_t<decltype(xs[0])>;
    auto m = metric_at<S>(s.field(), xs, ys);
    using std::abs;
    using std::sqrt;
    S vol = sqrt(abs(m.det));
    auto hh = detail::f_hh_at<S>(A, s.field(), xs, ys);
    auto up = detail::raise_both(hh, m.g_inv, tower_constant_like(0.0, vol));
    for (auto& c : up) c = vol * c;
    return up;
  };
  auto q_field = [&A, &s](auto xs, auto ys) {
    using S = std::decay_t<decltype(xs[0])>;
    auto m = metric_at<S>(s.field(), xs, ys);
    using std::abs;
    using std::sqrt;
    S vol = sqrt(abs(m.det));
    auto hv = detail::f_hv_at<S>(A, xs, ys);
    auto up = detail::raise_both(hv, m.g_inv, tower_constant_like(0.0, vol));
    for (auto& c : up) c = vol * c;
    return up;
  };

  const double v0 = metric_tensor(s, x, y).volume_factor;
  std::vector<double> jsum(4, 0.0);
  for (std::size_t b = 0; b < 4; ++b) {
    auto dp = horizontal_derivative_components(s, p_field, x, y, b);
    auto dq = vertical_derivative_components(s, q_field, x, y, b);
    for (int a = 0; a < 4; ++a) jsum[a] += dp[a * 4 + b] + dq[a * 4 + b];
  }

  const double sign = convention == CurrentConvention::paper_finsler ? -1.0 : 1.0;
  CurrentSample out;
  out.x.assign(x.begin(), x.end());
  out.y.assign(y.begin(), y.end());
  out.convention = convention;
  out.c = c_light;
  out.j.assign(4, 0.0);
  for (int a = 0; a < 4; ++a) out.j[a] = sign * (c_light / kFourPi) * jsum[a] / v0;
  return out;
}

// ---- correspondence ----------------------------------------------------------

/// Max discrepancies between the Finsler and Riemannian pipelines for an
/// x-only potential over a quadratic structure. The currents are compared
/// under the paper's own per-equation sign conventions, which agree: the
/// summed index sits in the opposite slot of the antisymmetric F^{ab} in the
/// two divergence forms, which absorbs the printed sign flip.
struct CorrespondenceReport {
  double f_hh_max_diff = 0.0;
  double f_hv_max_abs = 0.0;
  double residual_riemann_max_abs = 0.0;
  double residual_finsler_max_abs = 0.0;
  double current_max_diff = 0.0;
  std::size_t samples = 0;
};

inline CorrespondenceReport correspondence_report(
    const PotentialField& A, const FinslerStructure& s,
    std::span<const std::pair<std::vector<double>, std::vector<double>>> sample_set,
    double c_light = 1.0) {
  detail::require_four(s);
  if (A.y_dependence)
    throw WrongOperationError("correspondence check needs an x-only potential");
  if (!s.metric_is_quadratic())
    throw WrongOperationError("correspondence check needs a quadratic structure");

  CorrespondenceReport rep;
  for (const auto& [x, y] : sample_set) {
    std::span<const double> xs(x), ys(y);
    auto fr = field_strength_riemann(A, s, xs, ys);
    auto ff = field_strength_finsler(A, s, xs, ys);
    for (int i = 0; i < 16; ++i) {
      rep.f_hh_max_diff = std::max(rep.f_hh_max_diff, std::abs(ff.f_hh[i] - fr.f_hh[i]));
      rep.f_hv_max_abs = std::max(rep.f_hv_max_abs, std::abs(ff.f_hv[i]));
    }
    auto rr = first_equation_residual_riemann(A, xs);
    auto rf = first_equation_residual_finsler(A, s, xs, ys);
    for (double v : rr) rep.residual_riemann_max_abs = std::max(rep.residual_riemann_max_abs, std::abs(v));
    for (double v : rf) rep.residual_finsler_max_abs = std::max(rep.residual_finsler_max_abs, std::abs(v));
    auto jr = source_current_riemann(A, s, xs, ys, c_light);
    auto jf = source_current_finsler(A, s, xs, ys, c_light);
    for (int a = 0; a < 4; ++a)
      rep.current_max_diff = std::max(rep.current_max_diff, std::abs(jf.j[a] - jr.j[a]));
    ++rep.samples;
  }
  return rep;
}

}  // namespace finsler
