#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/expr.hpp"
#include "finsler/jet.hpp"
#include "finsler/linalg.hpp"
#include "finsler/sampler.hpp"

namespace finsler {

enum class MetricKind { positive_definite, alternating };
enum class Provenance { riemannian, randers, quadratic_constant, perturbed_quadratic, expression };

/// Type-erased scalar field on the tangent bundle, evaluable at every tower
/// depth the engine composes (plain doubles up to fourth-order jets).
class ScalarFieldTM {
public:
  virtual ~ScalarFieldTM() = default;
  virtual int dimension() const = 0;
  virtual double eval(std::span<const double> x, std::span<const double> y) const = 0;
  virtual J1 eval(std::span<const J1> x, std::span<const J1> y) const = 0;
  virtual J2 eval(std::span<const J2> x, std::span<const J2> y) const = 0;
  virtual J3 eval(std::span<const J3> x, std::span<const J3> y) const = 0;
  virtual J4 eval(std::span<const J4> x, std::span<const J4> y) const = 0;
};

template <class Derived>
class ScalarFieldBase : public ScalarFieldTM {
public:
  double eval(std::span<const double> x, std::span<const double> y) const override {
    return self().template ev<double>(x, y);
  }
  J1 eval(std::span<const J1> x, std::span<const J1> y) const override {
    return self().template ev<J1>(x, y);
  }
  J2 eval(std::span<const J2> x, std::span<const J2> y) const override {
    return self().template ev<J2>(x, y);
  }
  J3 eval(std::span<const J3> x, std::span<const J3> y) const override {
    return self().template ev<J3>(x, y);
  }
  J4 eval(std::span<const J4> x, std::span<const J4> y) const override {
    return self().template ev<J4>(x, y);
  }

private:
  const Derived& self() const { return static_cast<const Derived&>(*this); }
};

/// n x n matrix of x-expressions (entries may be constants).
struct MatrixExprField {
  int n = 0;
  std::vector<ExprAst> entries;  // row-major n*n

  static MatrixExprField from_strings(const std::vector<std::string>& rows_flat, int n) {
    MatrixExprField f;
    f.n = n;
    for (const auto& s : rows_flat) f.entries.push_back(parse(s, n));
    if (static_cast<int>(f.entries.size()) != n * n)
      throw ConfigError("matrix field needs n*n entries");
    return f;
  }

  static MatrixExprField constant(const std::vector<double>& m, int n) {
    std::vector<std::string> rows;
    for (double v : m) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      rows.push_back(v < 0 ? "(" + std::string(buf) + ")" : std::string(buf));
    }
    return from_strings(rows, n);
  }

  template <class S>
  std::vector<S> eval(std::span<const S> x, std::span<const S> y) const {
    std::vector<S> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.evaluate<S>(x, y));
    return out;
  }
};

/// n-vector of x-expressions.
struct VectorExprField {
  int n = 0;
  std::vector<ExprAst> entries;

  static VectorExprField from_strings(const std::vector<std::string>& comps, int n) {
    VectorExprField f;
    f.n = n;
    for (const auto& s : comps) f.entries.push_back(parse(s, n));
    if (static_cast<int>(f.entries.size()) != n)
      throw ConfigError("vector field needs n entries");
    return f;
  }

  template <class S>
  std::vector<S> eval(std::span<const S> x, std::span<const S> y) const {
    std::vector<S> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.evaluate<S>(x, y));
    return out;
  }
};

namespace fields {

// F = a_ij(x) y^i y^j
class RiemannianField : public ScalarFieldBase<RiemannianField> {
public:
  RiemannianField(MatrixExprField a) : a_(std::move(a)) {}
  int dimension() const override { return a_.n; }
  template <class S>
  S ev(std::span<const S> x, std::span<const S> y) const {
    auto a = a_.eval(x, y);
    const int n = a_.n;
    S acc = tower_constant_like(0.0, y[0]);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) acc += a[i * n + j] * y[i] * y[j];
    return acc;
  }
  const MatrixExprField& a_field() const { return a_; }

private:
  MatrixExprField a_;
};

// F = (sqrt(a_ij(x) y^i y^j) + b_i(x) y^i)^2
class RandersField : public ScalarFieldBase<RandersField> {
public:
  RandersField(MatrixExprField a, VectorExprField b) : a_(std::move(a)), b_(std::move(b)) {}
  int dimension() const override { return a_.n; }
  template <class S>
  S ev(std::span<const S> x, std::span<const S> y) const {
    using std::sqrt;
    auto a = a_.eval(x, y);
    auto b = b_.eval(x, y);
    const int n = a_.n;
    S ayy = tower_constant_like(0.0, y[0]);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) ayy += a[i * n + j] * y[i] * y[j];
    S l = sqrt(ayy);
    for (int i = 0; i < n; ++i) l += b[i] * y[i];
    return l * l;
  }
  const MatrixExprField& a_field() const { return a_; }
  const VectorExprField& b_field() const { return b_; }

private:
  MatrixExprField a_;
  VectorExprField b_;
};

// F = q(y) + eps * y_dir^4 / q(y), q = Q_ij y^i y^j
class PerturbedQuadraticField : public ScalarFieldBase<PerturbedQuadraticField> {
public:
  PerturbedQuadraticField(std::vector<double> q, int n, double eps, int dir)
      : q_(std::move(q)), n_(n), eps_(eps), dir_(dir) {}
  int dimension() const override { return n_; }
  template <class S>
  S ev(std::span<const S>, std::span<const S> y) const {
    S q = tower_constant_like(0.0, y[0]);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) q += q_[i * n_ + j] * y[i] * y[j];
    S w = y[dir_] * y[dir_];
    return q + eps_ * (w * w) / q;
  }
  const std::vector<double>& quadratic_form() const { return q_; }
  double epsilon() const { return eps_; }

private:
  std::vector<double> q_;
  int n_;
  double eps_;
  int dir_;
};

class ExpressionField : public ScalarFieldBase<ExpressionField> {
public:
  ExpressionField(ExprAst ast) : ast_(std::move(ast)) {}
  int dimension() const override { return ast_.dimension(); }
  template <class S>
  S ev(std::span<const S> x, std::span<const S> y) const {
    return ast_.evaluate<S>(x, y);
  }
  const ExprAst& ast() const { return ast_; }

private:
  ExprAst ast_;
};

}  // namespace fields

/// g_ij, inverse, determinant, and volume factor at one (x, y).
struct MetricSample {
  std::vector<double> x, y;
  std::vector<double> g;      // n*n, exactly symmetric
  std::vector<double> g_inv;  // n*n
  double det_g = 0.0;
  double volume_factor = 0.0;  // sqrt(|det g|)
  std::pair<int, int> signature{0, 0};

  double at(int i, int j) const { return g[i * static_cast<int>(y.size()) + j]; }
};

/// Fully symmetric C_ijk at one (x, y), stored raw (no symmetrization) so the
/// permutation residual is a genuine consistency check on the tower.
struct CartanTensorSample {
  std::vector<double> x, y;
  std::vector<double> c;  // n*n*n

  double at(int i, int j, int k) const {
    const int n = static_cast<int>(y.size());
    return c[(i * n + j) * n + k];
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : c) m = std::max(m, std::abs(v));
    return m;
  }
  double max_asymmetry() const {
    const int n = static_cast<int>(y.size());
    double m = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          m = std::max(m, std::abs(at(i, j, k) - at(j, i, k)));
          m = std::max(m, std::abs(at(i, j, k) - at(k, j, i)));
          m = std::max(m, std::abs(at(i, j, k) - at(i, k, j)));
        }
    return m;
  }
};

struct IdentityCheck {
  std::string name;
  double tolerance = 0.0;
  double max_residual = 0.0;
  std::size_t samples = 0;
  std::size_t skipped = 0;
  bool pass = true;
};

struct ValidationReport {
  std::vector<IdentityCheck> checks;
  bool all_pass = true;

  const IdentityCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

/// A Finsler structure: dimension, kind, provenance, the fundamental function
/// F(x, y) (degree-2 homogeneous), and smoothness-domain metadata.
class FinslerStructure {
public:
  int dimension() const { return field_->dimension(); }
  MetricKind kind() const { return kind_; }
  Provenance provenance() const { return prov_; }
  const ScalarFieldTM& field() const { return *field_; }
  const std::string& name() const { return name_; }

  /// Riemannian in the wide sense: metric has no y-dependence.
  bool metric_is_quadratic() const {
    return prov_ == Provenance::riemannian || prov_ == Provenance::quadratic_constant;
  }

  // -- smoothness-domain metadata ------------------------------------------

  double slit_epsilon(std::span<const double> x) const {
    double nx = 0.0;
    for (double v : x) nx += v * v;
    return 1e-8 * (1.0 + std::sqrt(nx));
  }

  bool x_in_domain(std::span<const double> x) const {
    return !x_domain_ || x_domain_(x);
  }

  bool in_domain(std::span<const double> x, std::span<const double> y) const {
    if (!x_in_domain(x)) return false;
    double ny2 = 0.0;
    for (double v : y) ny2 += v * v;
    double eps = slit_epsilon(x);
    if (ny2 < eps * eps) return false;
    if (null_cone_guard_ > 0.0) {
      double f = field_->eval(x, y);
      if (std::abs(f) < null_cone_guard_ * ny2) return false;
    }
    return true;
  }

  void require_domain(std::span<const double> x, std::span<const double> y) const {
    if (!x_in_domain(x))
      throw DomainError("point outside the structure's x-domain");
    double ny2 = 0.0;
    for (double v : y) ny2 += v * v;
    double eps = slit_epsilon(x);
    if (ny2 < eps * eps)
      throw DomainError("direction inside the slit-bundle guard");
    if (null_cone_guard_ > 0.0) {
      double f = field_->eval(x, y);
      if (std::abs(f) < null_cone_guard_ * ny2)
        throw DomainError("direction too close to the null cone");
    }
  }

  /// Signature at the reference sample; empty when the reference metric is
  /// itself degenerate (validation then fails nondegeneracy instead).
  std::optional<std::pair<int, int>> signature() const { return signature_; }
  const std::vector<double>& reference_x() const { return x_ref_; }
  const std::vector<double>& reference_y() const { return y_ref_; }

  // -- provenance payloads (used by oracles and validation) -----------------

  const MatrixExprField* riemannian_a() const {
    if (auto* f = dynamic_cast<const fields::RiemannianField*>(field_.get()))
      return &f->a_field();
    return nullptr;
  }
  const fields::RandersField* randers() const {
    return dynamic_cast<const fields::RandersField*>(field_.get());
  }

  // -- factories -------------------------------------------------------------

  static FinslerStructure euclidean(int n);
  static FinslerStructure minkowski();
  static FinslerStructure quadratic_constant(std::vector<double> q, int n);
  static FinslerStructure poincare_half_plane();
  static FinslerStructure riemannian(MatrixExprField a,
                                     std::vector<double> x_ref = {});
  static FinslerStructure randers(MatrixExprField a, VectorExprField b,
                                  std::vector<double> x_ref = {});
  static FinslerStructure perturbed_minkowski(double eps, int direction = 1);
  static FinslerStructure expression(ExprAst f, MetricKind kind,
                                     std::vector<double> x_ref = {},
                                     std::vector<double> y_ref = {});

private:
  FinslerStructure() = default;

  void finish_init();

  std::shared_ptr<const ScalarFieldTM> field_;
  MetricKind kind_ = MetricKind::positive_definite;
  Provenance prov_ = Provenance::expression;
  std::string name_;
  std::function<bool(std::span<const double>)> x_domain_;
  double null_cone_guard_ = 0.0;  // 0 disables; fraction of |y|^2
  std::vector<double> x_ref_, y_ref_;
  std::optional<std::pair<int, int>> signature_;
};

// ---- generic metric machinery (shared with the connection module) ---------

template <class S>
struct TowerMetric {
  std::vector<S> g;      // n*n
  std::vector<S> g_inv;  // n*n
  S det;
};

namespace detail {

/// Lift plain coordinates into an S-tower of constants shaped like `like`.
template <class S>
std::vector<S> lift_constants(std::span<const double> v, const S& like) {
  std::vector<S> out;
  out.reserve(v.size());
  for (double c : v) out.push_back(tower_constant_like(c, like));
  return out;
}

/// F evaluated with two extra y-seeded jet levels on top of S.
template <class S>
Jet<Jet<S>> eval_yy(const ScalarFieldTM& f, std::span<const S> x, std::span<const S> y) {
  using S1 = Jet<S>;
  using S2 = Jet<S1>;
  const std::size_t n = y.size();
  std::vector<S2> xx, yy;
  xx.reserve(n);
  yy.reserve(n);
  for (std::size_t a = 0; a < n; ++a)
    xx.emplace_back(S1(x[a], n), n);
  for (std::size_t b = 0; b < n; ++b) {
    S1 inner(y[b], n);
    inner.partial(b) = tower_constant_like(1.0, y[b]);
    S2 v(inner, n);
    v.partial(b) = tower_constant_like(1.0, inner);
    yy.push_back(std::move(v));
  }
  return f.eval(std::span<const S2>(xx), std::span<const S2>(yy));
}

}  // namespace detail

/// g_ij = 1/2 d^2F/dy^i dy^j, its inverse and determinant, at tower scalars.
/// Throws DegeneracyError when |det g| (value slot) falls below the scaled
/// threshold.
template <class S>
TowerMetric<S> metric_at(const ScalarFieldTM& f, std::span<const S> x, std::span<const S> y) {
  const std::size_t n = y.size();
  auto r = detail::eval_yy(f, x, y);
  TowerMetric<S> m;
  m.g.reserve(n * n);
  m.g.assign(n * n, tower_constant_like(0.0, y[0]));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      S gij = 0.5 * r.partial(i).partial(j);
      m.g[i * n + j] = gij;
      m.g[j * n + i] = gij;
    }
  double scale = 0.0;
  for (const auto& v : m.g) scale = std::max(scale, std::abs(tower_value(v)));
  auto inv = invert_matrix(std::span<const S>(m.g), n);
  double dv = std::abs(tower_value(inv.det));
  if (dv < 1e-12 * std::pow(scale, static_cast<double>(n)))
    throw DegeneracyError("metric tensor is numerically degenerate (|det| = " +
                          std::to_string(dv) + ")");
  m.g_inv = std::move(inv.inverse);
  m.det = std::move(inv.det);
  return m;
}

// ---- finsler_core operations ----------------------------------------------

/// F(x, y); slit-guarded.
inline double eval_F(const FinslerStructure& s, std::span<const double> x,
                     std::span<const double> y) {
  s.require_domain(x, y);
  return s.field().eval(x, y);
}

/// L = sqrt(F); positive-definite structures only.
inline double eval_L(const FinslerStructure& s, std::span<const double> x,
                     std::span<const double> y) {
  if (s.kind() != MetricKind::positive_definite)
    throw UnsupportedKindError("L is defined only for positive-definite structures");
  double f = eval_F(s, x, y);
  if (f < 0.0) throw DomainError("F < 0 on a positive-definite structure");
  return std::sqrt(f);
}

inline MetricSample metric_tensor(const FinslerStructure& s, std::span<const double> x,
                                  std::span<const double> y) {
  s.require_domain(x, y);
  const std::size_t n = y.size();
  auto m = metric_at<double>(s.field(), x, y);
  double cond = one_norm(m.g, n) * one_norm(m.g_inv, n);
  if (cond > 1e12)
    throw ConditioningError("metric condition estimate " + std::to_string(cond) +
                            " exceeds 1e12");
  MetricSample out;
  out.x.assign(x.begin(), x.end());
  out.y.assign(y.begin(), y.end());
  out.g = std::move(m.g);
  out.g_inv = std::move(m.g_inv);
  out.det_g = m.det;
  out.volume_factor = std::sqrt(std::abs(m.det));
  out.signature = matrix_signature(out.g, n);
  return out;
}

inline CartanTensorSample cartan_tensor(const FinslerStructure& s,
                                        std::span<const double> x,
                                        std::span<const double> y) {
  s.require_domain(x, y);
  const std::size_t n = y.size();
  // third y-derivatives, extracted raw at all index orders
  std::vector<J3> xx, yy;
  for (std::size_t a = 0; a < n; ++a) xx.emplace_back(J2(J1(x[a], n), n), n);
  for (std::size_t b = 0; b < n; ++b) {
    J1 l1(y[b], n);
    l1.partial(b) = 1.0;
    J2 l2(l1, n);
    l2.partial(b) = tower_constant_like(1.0, l1);
    J3 v(l2, n);
    v.partial(b) = tower_constant_like(1.0, l2);
    yy.push_back(std::move(v));
  }
  J3 r = s.field().eval(std::span<const J3>(xx), std::span<const J3>(yy));
  CartanTensorSample out;
  out.x.assign(x.begin(), x.end());
  out.y.assign(y.begin(), y.end());
  out.c.resize(n * n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        out.c[(i * n + j) * n + k] = 0.25 * r.partial(i).partial(j).partial(k);
  return out;
}

/// r with L(x, r*u) = 1 for a unit direction u; the asymmetric "unit sphere"
/// radius of the direction-dependent norm.
inline double indicatrix_radius(const FinslerStructure& s, std::span<const double> x,
                                std::span<const double> u) {
  if (s.kind() != MetricKind::positive_definite)
    throw UnsupportedKindError("indicatrix is defined only for positive-definite structures");
  double l = eval_L(s, x, u);
  double r = 1.0 / l;
  std::vector<double> ru(u.begin(), u.end());
  for (auto& v : ru) v *= r;
  double check = eval_L(s, x, ru);
  if (std::abs(check - 1.0) > 1e-12)
    throw DomainError("indicatrix residual " + std::to_string(check - 1.0) +
                      " exceeds 1e-12");
  return r;
}

/// Run the defining-condition identity suite over a sampling plan.
ValidationReport validate(const FinslerStructure& s, const SamplerPlan& plan);

// ---- factory implementations ----------------------------------------------

inline void FinslerStructure::finish_init() {
  std::span<const double> xr(x_ref_), yr(y_ref_);
  if (!in_domain(xr, yr))
    throw ConfigError("reference sample of structure '" + name_ +
                      "' lies outside its domain");
  try {
    auto m = metric_at<double>(*field_, xr, yr);
    signature_ = matrix_signature(m.g, static_cast<std::size_t>(dimension()));
  } catch (const Error&) {
    // degenerate or non-evaluable reference metric: leave the signature
    // unknown and let validation report the defect
    signature_.reset();
  }
}

inline FinslerStructure FinslerStructure::euclidean(int n) {
  std::vector<double> q(n * n, 0.0);
  for (int i = 0; i < n; ++i) q[i * n + i] = 1.0;
  auto s = quadratic_constant(std::move(q), n);
  s.name_ = "euclidean";
  return s;
}

inline FinslerStructure FinslerStructure::minkowski() {
  std::vector<double> q(16, 0.0);
  q[0] = 1.0;
  q[5] = q[10] = q[15] = -1.0;
  auto s = quadratic_constant(std::move(q), 4);
  s.name_ = "minkowski";
  return s;
}

inline FinslerStructure FinslerStructure::quadratic_constant(std::vector<double> q, int n) {
  FinslerStructure s;
  bool positive = true;
  {
    auto sig = matrix_signature(q, n);
    positive = (sig.second == 0);
  }
  s.field_ = std::make_shared<fields::RiemannianField>(MatrixExprField::constant(q, n));
  s.kind_ = positive ? MetricKind::positive_definite : MetricKind::alternating;
  s.prov_ = Provenance::quadratic_constant;
  s.name_ = "quadratic";
  if (!positive) s.null_cone_guard_ = 1e-3;
  s.x_ref_.assign(n, 0.0);
  s.y_ref_.assign(n, 0.0);
  s.y_ref_[0] = 1.0;
  for (int i = 1; i < n; ++i) s.y_ref_[i] = 0.1 / (i + 1);
  s.finish_init();
  return s;
}

inline FinslerStructure FinslerStructure::poincare_half_plane() {
  auto a = MatrixExprField::from_strings({"1/x1^2", "0", "0", "1/x1^2"}, 2);
  FinslerStructure s;
  s.field_ = std::make_shared<fields::RiemannianField>(std::move(a));
  s.kind_ = MetricKind::positive_definite;
  s.prov_ = Provenance::riemannian;
  s.name_ = "poincare_half_plane";
  s.x_domain_ = [](std::span<const double> x) { return x[1] > 0.0; };
  s.x_ref_ = {0.0, 1.0};
  s.y_ref_ = {1.0, 0.05};
  s.finish_init();
  return s;
}

inline FinslerStructure FinslerStructure::riemannian(MatrixExprField a,
                                                     std::vector<double> x_ref) {
  const int n = a.n;
  FinslerStructure s;
  s.field_ = std::make_shared<fields::RiemannianField>(std::move(a));
  s.kind_ = MetricKind::positive_definite;
  s.prov_ = Provenance::riemannian;
  s.name_ = "riemannian";
  s.x_ref_ = x_ref.empty() ? std::vector<double>(n, 0.0) : std::move(x_ref);
  s.y_ref_.assign(n, 0.0);
  s.y_ref_[0] = 1.0;
  for (int i = 1; i < n; ++i) s.y_ref_[i] = 0.1 / (i + 1);
  s.finish_init();
  return s;
}

inline FinslerStructure FinslerStructure::randers(MatrixExprField a, VectorExprField b,
                                                  std::vector<double> x_ref) {
  const int n = a.n;
  FinslerStructure s;
  s.field_ = std::make_shared<fields::RandersField>(std::move(a), std::move(b));
  s.kind_ = MetricKind::positive_definite;
  s.prov_ = Provenance::randers;
  s.name_ = "randers";
  s.x_ref_ = x_ref.empty() ? std::vector<double>(n, 0.0) : std::move(x_ref);
  s.y_ref_.assign(n, 0.0);
  s.y_ref_[0] = 1.0;
  for (int i = 1; i < n; ++i) s.y_ref_[i] = 0.1 / (i + 1);
  s.finish_init();
  return s;
}

inline FinslerStructure FinslerStructure::perturbed_minkowski(double eps, int direction) {
  std::vector<double> q(16, 0.0);
  q[0] = 1.0;
  q[5] = q[10] = q[15] = -1.0;
  FinslerStructure s;
  s.field_ = std::make_shared<fields::PerturbedQuadraticField>(std::move(q), 4, eps, direction);
  s.kind_ = MetricKind::alternating;
  s.prov_ = Provenance::perturbed_quadratic;
  s.name_ = "perturbed_minkowski";
  // the metric perturbation grows like eps/q^3 as |F|/|y|^2 -> q, so the
  // guard has to keep the quadratic part dominant
  s.null_cone_guard_ = 0.3;
  s.x_ref_.assign(4, 0.0);
  s.y_ref_ = {1.0, 0.3, 0.2, -0.1};
  s.finish_init();
  return s;
}

inline FinslerStructure FinslerStructure::expression(ExprAst f, MetricKind kind,
                                                     std::vector<double> x_ref,
                                                     std::vector<double> y_ref) {
  const int n = f.dimension();
  FinslerStructure s;
  s.field_ = std::make_shared<fields::ExpressionField>(std::move(f));
  s.kind_ = kind;
  s.prov_ = Provenance::expression;
  s.name_ = "expression";
  if (kind == MetricKind::alternating) s.null_cone_guard_ = 1e-3;
  s.x_ref_ = x_ref.empty() ? std::vector<double>(n, 0.0) : std::move(x_ref);
  if (y_ref.empty()) {
    s.y_ref_.assign(n, 0.0);
    s.y_ref_[0] = 1.0;
    for (int i = 1; i < n; ++i) s.y_ref_[i] = 0.1 / (i + 1);
  } else {
    s.y_ref_ = std::move(y_ref);
  }
  s.finish_init();
  return s;
}

// ---- validation ------------------------------------------------------------

inline ValidationReport validate(const FinslerStructure& s, const SamplerPlan& plan) {
  const int n = s.dimension();
  const bool positive = s.kind() == MetricKind::positive_definite;

  struct Acc {
    double max_res = 0.0;
    std::size_t used = 0;
  };
  Acc euler1, euler2, deg0, hom_f, hom_l, hom_g, positivity, nondeg, sig_const,
      cart_sym, cart_contr, randers_bound;

  SampleStream stream(plan, n);
  std::size_t used = 0, skipped = 0, attempts = 0;
  const std::size_t max_attempts = plan.count * 16 + 64;
  std::optional<std::pair<int, int>> reference_signature = s.signature();

  while (used < plan.count && attempts < max_attempts) {
    ++attempts;
    auto [x, y] = stream.next();
    std::span<const double> xs(x), ys(y);
    if (!s.in_domain(xs, ys)) {
      ++skipped;
      continue;
    }
    try {
      // one order-3 evaluation yields F, F_y, g, and dg/dy
      auto cs = cartan_tensor(s, xs, ys);
      std::vector<double> g(n * n);
      double f_val;
      std::vector<double> f_y(n);
      {
        std::vector<J2> xx, yy;
        for (int a = 0; a < n; ++a) xx.emplace_back(J1(x[a], n), n);
        for (int b = 0; b < n; ++b) {
          J1 l1(y[b], n);
          l1.partial(b) = 1.0;
          J2 v(l1, n);
          v.partial(b) = tower_constant_like(1.0, l1);
          yy.push_back(std::move(v));
        }
        J2 r = s.field().eval(std::span<const J2>(xx), std::span<const J2>(yy));
        f_val = tower_value(r);
        for (int i = 0; i < n; ++i) f_y[i] = r.value().partial(i);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) g[i * n + j] = 0.5 * r.partial(std::min(i, j)).partial(std::max(i, j));
      }
      double g_norm = 0.0;
      for (double v : g) g_norm = std::max(g_norm, std::abs(v));
      double abs_f = std::abs(f_val);

      // Euler degree-2: y^i dF/dy^i = 2F
      double r1 = 0.0;
      for (int i = 0; i < n; ++i) r1 += y[i] * f_y[i];
      euler1.max_res = std::max(euler1.max_res, std::abs(r1 - 2.0 * f_val) / abs_f);
      euler1.used++;

      // g y y = F
      double gyy = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) gyy += g[i * n + j] * y[i] * y[j];
      euler2.max_res = std::max(euler2.max_res, std::abs(gyy - f_val) / abs_f);
      euler2.used++;

      // degree-0 metric: y^k dg_ij/dy^k = 0 (dg = 2C)
      double d0 = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int k = 0; k < n; ++k) acc += 2.0 * cs.at(i, j, k) * y[k];
          d0 = std::max(d0, std::abs(acc));
        }
      deg0.max_res = std::max(deg0.max_res, d0 / g_norm);
      deg0.used++;

      // homogeneity of F (and L for positive kind), lambda in {0.5, 2} and
      // additionally -1 for alternating structures
      std::vector<double> lambdas{0.5, 2.0};
      if (!positive) lambdas.push_back(-1.0);
      for (double lam : lambdas) {
        std::vector<double> ly(y);
        for (auto& v : ly) v *= lam;
        double fl = s.field().eval(xs, std::span<const double>(ly));
        hom_f.max_res = std::max(hom_f.max_res,
                                 std::abs(fl - lam * lam * f_val) / (lam * lam * abs_f));
      }
      hom_f.used++;
      if (positive) {
        for (double lam : {0.5, 2.0}) {
          std::vector<double> ly(y);
          for (auto& v : ly) v *= lam;
          double ll = std::sqrt(s.field().eval(xs, std::span<const double>(ly)));
          double l0 = std::sqrt(f_val);
          hom_l.max_res = std::max(hom_l.max_res, std::abs(ll - lam * l0) / (lam * l0));
        }
        hom_l.used++;
        positivity.max_res = std::max(positivity.max_res, f_val > 0.0 ? 0.0 : 1.0);
        positivity.used++;
      }

      // g(x, lambda y) = g(x, y)
      for (double lam : {0.5, 2.0}) {
        std::vector<double> ly(y);
        for (auto& v : ly) v *= lam;
        auto ml = metric_at<double>(s.field(), xs, std::span<const double>(ly));
        double dmax = 0.0;
        for (int i = 0; i < n * n; ++i) dmax = std::max(dmax, std::abs(ml.g[i] - g[i]));
        hom_g.max_res = std::max(hom_g.max_res, dmax / g_norm);
      }
      hom_g.used++;

      // nondegeneracy and signature constancy
      auto ms = metric_tensor(s, xs, ys);
      nondeg.max_res = std::max(nondeg.max_res, 0.0);
      nondeg.used++;
      if (!reference_signature) reference_signature = ms.signature;
      sig_const.max_res = std::max(sig_const.max_res,
                                   ms.signature == *reference_signature ? 0.0 : 1.0);
      sig_const.used++;

      // Cartan tensor consistency
      cart_sym.max_res = std::max(cart_sym.max_res,
                                  cs.max_asymmetry() / std::max(1.0, cs.max_abs()));
      cart_sym.used++;
      double contr = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int k = 0; k < n; ++k) acc += cs.at(i, j, k) * y[k];
          contr = std::max(contr, std::abs(acc));
        }
      cart_contr.max_res = std::max(cart_contr.max_res, contr / std::max(1.0, g_norm));
      cart_contr.used++;

      // Randers positivity bound b a^{-1} b < 1
      if (const auto* rd = s.randers()) {
        auto a = rd->a_field().eval(xs, ys);
        auto b = rd->b_field().eval(xs, ys);
        auto ainv = invert_matrix(std::span<const double>(a), n);
        double bab = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) bab += b[i] * ainv.inverse[i * n + j] * b[j];
        randers_bound.max_res = std::max(randers_bound.max_res, bab);
        randers_bound.used++;
      }

      ++used;
    } catch (const DegeneracyError&) {
      nondeg.max_res = std::max(nondeg.max_res, 1.0);
      nondeg.used++;
      ++used;
    } catch (const ConditioningError&) {
      nondeg.max_res = std::max(nondeg.max_res, 1.0);
      nondeg.used++;
      ++used;
    } catch (const DomainError&) {
      ++skipped;
    } catch (const EvalError&) {
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
  add("euler_yFy_eq_2F", euler1, 1e-9);
  add("euler_gyy_eq_F", euler2, 1e-9);
  add("metric_degree0_in_y", deg0, 1e-9);
  add("homogeneity_F", hom_f, 1e-12);
  if (positive) {
    add("homogeneity_L", hom_l, 1e-12);
    add("positivity_F", positivity, 0.5);
  }
  add("homogeneity_g", hom_g, 1e-10);
  add("nondegeneracy", nondeg, 0.5);
  add("signature_constancy", sig_const, 0.5);
  add("cartan_symmetry", cart_sym, 1e-12);
  add("cartan_contraction_y", cart_contr, 1e-9);
  if (s.randers()) add("randers_b_bound", randers_bound, 1.0 - 1e-12);
  return rep;
}

}  // namespace finsler
