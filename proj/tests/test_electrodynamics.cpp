#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "fd_maxwell_oracle.hpp"
#include "finsler/electrodynamics.hpp"
#include "finsler/structure.hpp"
#include "test_support.hpp"

using namespace finsler;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::span<const double> sp(const std::vector<double>& v) { return {v.data(), v.size()}; }

PotentialField plane_wave() {
  return PotentialField::from_strings({"0", "0", "sin(2*(x0 - x1))", "0"});
}

PotentialField coulomb() {
  return PotentialField::from_strings({"(x1^2 + x2^2 + x3^2)^(-0.5)", "0", "0", "0"});
}

// A0 = g_{0b}(y) y^b = y0 (1 - eps y1^4 / Q^2) on the perturbed Minkowski
// structure with eps = 0.01
PotentialField perturbed_a0() {
  return PotentialField::from_strings(
      {"y0*(1 - 0.01*y1^4/(y0^2 - y1^2 - y2^2 - y3^2)^2)", "0", "0", "0"});
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

const std::vector<double> kX{0.3, 0.1, -0.2, 0.4};
const std::vector<double> kYRef{1.0, 0.2, 0.1, -0.3};

}  // namespace

TEST_CASE("field_strength_riemann: constant potential and the plane wave") {
  auto mk = FinslerStructure::minkowski();
  auto constant = PotentialField::from_strings({"1", "2", "-0.5", "3"});
  auto f0 = field_strength_riemann(constant, mk, sp(kX), sp(kYRef));
  CHECK(max_abs(f0.f_hh) == 0.0);
  CHECK(max_abs(f0.f_hv) == 0.0);

  auto wave = plane_wave();
  CHECK_FALSE(wave.y_dependence);
  auto fs = field_strength_riemann(wave, mk, sp(kX), sp(kYRef));
  const double u = 2.0 * (kX[0] - kX[1]);
  CHECK_THAT(fs.hh(0, 2), WithinRel(2.0 * std::cos(u), 1e-13));
  CHECK_THAT(fs.hh(1, 2), WithinRel(-2.0 * std::cos(u), 1e-13));
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      CHECK_THAT(fs.hh(a, b) + fs.hh(b, a), WithinAbs(0.0, 1e-14));
      bool active = (a == 0 && b == 2) || (a == 2 && b == 0) || (a == 1 && b == 2) ||
                    (a == 2 && b == 1);
      if (!active) CHECK_THAT(fs.hh(a, b), WithinAbs(0.0, 1e-14));
    }
}

TEST_CASE("field_strength_riemann: gauge invariance and wrong-operation error") {
  auto mk = FinslerStructure::minkowski();
  auto wave = plane_wave();
  // chi = x0 x1: A -> A + d(chi) = A + (x1, x0, 0, 0)
  auto gauged = PotentialField::from_strings({"x1", "x0", "sin(2*(x0 - x1))", "0"});
  auto f1 = field_strength_riemann(wave, mk, sp(kX), sp(kYRef));
  auto f2 = field_strength_riemann(gauged, mk, sp(kX), sp(kYRef));
  for (int i = 0; i < 16; ++i) CHECK_THAT(f2.f_hh[i], WithinAbs(f1.f_hh[i], 1e-12));

  auto ydep = PotentialField::from_strings({"y1", "0", "0", "0"});
  CHECK(ydep.y_dependence);
  CHECK_THROWS_AS(field_strength_riemann(ydep, mk, sp(kX), sp(kYRef)), WrongOperationError);
}

TEST_CASE("first_equation_residual_riemann vanishes to rounding") {
  auto wave = plane_wave();
  CHECK(max_abs(first_equation_residual_riemann(wave, sp(kX))) <= 1e-12);

  // random degree-3 polynomial potential, fixed seed
  std::mt19937_64 rng(2024u);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::string> comps;
    for (int c = 0; c < 4; ++c) {
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "%.6f*x0^3 + %.6f*x1^2*x2 + %.6f*x2*x3 + %.6f*x%d",
                    coef(rng), coef(rng), coef(rng), coef(rng), c);
      comps.push_back(buf);
    }
    auto poly = PotentialField::from_strings(comps);
    CHECK(max_abs(first_equation_residual_riemann(poly, sp(kX))) <= 1e-10);
  }

  std::vector<double> away{0.2, 1.1, -0.4, 0.7};
  CHECK(max_abs(first_equation_residual_riemann(coulomb(), sp(away))) <= 1e-10);
}

TEST_CASE("source_current_riemann: vacuum solutions and the polynomial current") {
  auto mk = FinslerStructure::minkowski();

  auto jw = source_current_riemann(plane_wave(), mk, sp(kX), sp(kYRef));
  CHECK(max_abs(jw.j) <= 1e-8);

  std::vector<double> at{0.0, 1.0, 0.0, 0.0};
  auto jc = source_current_riemann(coulomb(), mk, sp(at), sp(kYRef));
  CHECK(max_abs(jc.j) <= 1e-6);

  // A = (0, x0^2, 0, 0): F_01 = 2 x0, j^1 = -c/(2 pi)
  auto poly = PotentialField::from_strings({"0", "x0^2", "0", "0"});
  auto jp = source_current_riemann(poly, mk, sp(kX), sp(kYRef));
  CHECK_THAT(jp.j[1], WithinRel(-1.0 / (2.0 * M_PI), 1e-10));
  CHECK_THAT(jp.j[0], WithinAbs(0.0, 1e-12));
  CHECK_THAT(jp.j[2], WithinAbs(0.0, 1e-12));
  CHECK_THAT(jp.j[3], WithinAbs(0.0, 1e-12));
  // confirm against a finite-difference evaluation of (c/4pi) dF^{01}/dx0
  auto f01_up = [&](std::span<const double> xv) {
    return field_strength_riemann(poly, mk, xv, sp(kYRef)).f_hh_up[0 * 4 + 1];
  };
  std::vector<std::size_t> slots{0};
  auto fd = fd_oracle(f01_up, kX, slots, 1, 1e-5);
  CHECK_THAT(jp.j[1], WithinAbs(fd.d1[0] / kFourPi, 1e-9));

  // current conservation for the polynomial family: d_a j^a = 0
  std::mt19937_64 rng(77u);
  std::uniform_real_distribution<double> coef(-0.6, 0.6);
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.6f*x0^2*x1 + %.6f*x2^3 + %.6f*x1*x3", coef(rng),
                coef(rng), coef(rng));
  auto fam = PotentialField::from_strings({buf, "0.3*x0^3", "x3^2", "0.2*x1*x2"});
  double div = 0.0;
  for (int a = 0; a < 4; ++a) {
    auto ja = [&](std::span<const double> xv) {
      return source_current_riemann(fam, mk, xv, sp(kYRef)).j[a];
    };
    std::vector<std::size_t> sl{static_cast<std::size_t>(a)};
    auto d = fd_oracle(ja, kX, sl, 1, 1e-4);
    div += d.d1[0];
  }
  CHECK_THAT(div, WithinAbs(0.0, 1e-6));

  // c enters linearly
  auto j2 = source_current_riemann(poly, mk, sp(kX), sp(kYRef), 2.0);
  CHECK_THAT(j2.j[1], WithinRel(2.0 * jp.j[1], 1e-13));
}

TEST_CASE("field_strength_finsler: correspondence and antisymmetry") {
  auto mk = FinslerStructure::minkowski();
  auto wave = plane_wave();
  auto fr = field_strength_riemann(wave, mk, sp(kX), sp(kYRef));
  auto ff = field_strength_finsler(wave, mk, sp(kX), sp(kYRef));
  for (int i = 0; i < 16; ++i) {
    CHECK_THAT(ff.f_hh[i], WithinAbs(fr.f_hh[i], 1e-12));
    CHECK_THAT(ff.f_hv[i], WithinAbs(0.0, 1e-12));
  }

  auto pm = FinslerStructure::perturbed_minkowski(0.01);
  auto a0 = perturbed_a0();
  CHECK(a0.y_dependence);
  std::vector<double> y{1.0, 0.3, 0.2, -0.1};
  auto fp = field_strength_finsler(a0, pm, sp(kX), sp(y));
  // F_hv matches the FD oracle of -dA0/dy^b
  auto a0v = [&](std::span<const double> yv) {
    return a0.components[0].evaluate<double>(sp(kX), yv);
  };
  std::vector<std::size_t> slots{0, 1, 2, 3};
  auto fd = fd_oracle(a0v, y, slots, 1, 1e-4);
  for (int b = 0; b < 4; ++b) CHECK_THAT(fp.hv(0, b), WithinAbs(-fd.d1[b], 1e-6));
  // antisymmetry of F_hh holds by construction even with y-dependence
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      CHECK_THAT(fp.hh(a, b) + fp.hh(b, a), WithinAbs(0.0, 1e-12));
}

TEST_CASE("first_equation_residual_finsler: correspondence regime and reports") {
  auto mk = FinslerStructure::minkowski();
  auto wave = plane_wave();
  CHECK(max_abs(first_equation_residual_finsler(wave, mk, sp(kX), sp(kYRef))) <= 1e-10);

  // x-only potential on a 4D Randers structure: connection nontrivial,
  // residual recorded, no pass/fail asserted
  auto a = MatrixExprField::from_strings(
      {"1", "0", "0", "0", "0", "1", "0", "0", "0", "0", "1", "0", "0", "0", "0", "1"}, 4);
  auto b = VectorExprField::from_strings({"0.2 + 0.1*sin(x1)", "0", "0", "0"}, 4);
  auto randers4 = FinslerStructure::randers(std::move(a), std::move(b));
  std::vector<double> yr{0.9, 0.4, 0.1, 0.2};
  auto res = first_equation_residual_finsler(wave, randers4, sp(kX), sp(yr));
  double r = max_abs(res);
  INFO("x-only potential on 4D Randers: max residual " << r);
  CHECK(std::isfinite(r));

  auto pm = FinslerStructure::perturbed_minkowski(0.01);
  auto a0 = perturbed_a0();
  std::vector<double> y{1.0, 0.3, 0.2, -0.1};
  auto res2 = first_equation_residual_finsler(a0, pm, sp(kX), sp(y));
  double r2 = max_abs(res2);
  // x-independent structure and potential: every delta-term drops and metric
  // compatibility kills the connection terms, so this residual is exactly 0
  CHECK(r2 == 0.0);

  // a potential mixing x and y dependence leaves a genuine residual
  // (observed ~2.2e-2); the equation is reported, not asserted, here
  auto mixed = PotentialField::from_strings(
      {"sin(x1)*(1 + 0.05*y1^2/(y0^2 - y1^2 - y2^2 - y3^2))", "0.1*x0*y0", "0", "0"});
  std::vector<double> xm{0.3, 0.5, -0.2, 0.1};
  auto res3 = first_equation_residual_finsler(mixed, pm, sp(xm), sp(y));
  double r3 = max_abs(res3);
  INFO("mixed x,y potential on perturbed Minkowski: max residual " << r3);
  CHECK(std::isfinite(r3));
  CHECK(r3 > 1e-3);
}

TEST_CASE("source_current_finsler: zero potential, correspondence, convention flag") {
  auto mk = FinslerStructure::minkowski();
  auto zero = PotentialField::from_strings({"0", "0", "0", "0"});
  auto j0 = source_current_finsler(zero, mk, sp(kX), sp(kYRef));
  CHECK(max_abs(j0.j) == 0.0);

  // verbatim paper conventions agree in the correspondence regime: the
  // summed index sits in the opposite slot of the antisymmetric F^{ab},
  // which absorbs the printed sign flip between the two equations
  auto poly = PotentialField::from_strings({"0", "x0^2", "0", "0"});
  auto jr = source_current_riemann(poly, mk, sp(kX), sp(kYRef));
  auto jf = source_current_finsler(poly, mk, sp(kX), sp(kYRef));
  for (int a = 0; a < 4; ++a) CHECK_THAT(jf.j[a], WithinAbs(jr.j[a], 1e-8));
  CHECK(jf.convention == CurrentConvention::paper_finsler);

  // overriding the leading sign flips the result exactly
  auto jf_flip = source_current_finsler(poly, mk, sp(kX), sp(kYRef), 1.0,
                                        CurrentConvention::paper_riemann);
  for (int a = 0; a < 4; ++a) CHECK_THAT(jf_flip.j[a], WithinAbs(-jf.j[a], 1e-15));
}

TEST_CASE("source_current_finsler: y-dependent potential matches the FD pipeline") {
  auto pm = FinslerStructure::perturbed_minkowski(0.01);
  auto a0 = perturbed_a0();
  std::vector<double> x{0.3, 0.5, -0.2, 0.1}, y{1.0, 0.3, 0.2, -0.1};
  auto j = source_current_finsler(a0, pm, sp(x), sp(y));

  fdmax::FdMaxwellPipeline oracle(pm, a0);
  auto jfd = oracle.current(sp(x), sp(y));
  for (int a = 0; a < 4; ++a) {
    INFO("component " << a << ": tower " << j.j[a] << " vs fd " << jfd[a]);
    CHECK_THAT(j.j[a], WithinAbs(jfd[a], 1e-5));
  }
}

TEST_CASE("gauge invariance of the Finsler pipeline") {
  auto pm = FinslerStructure::perturbed_minkowski(0.01);
  auto base = perturbed_a0();
  // chi(x) = sin(x0) x2: d(chi) = (cos(x0) x2, 0, sin(x0), 0)
  auto gauged = PotentialField::from_strings(
      {"y0*(1 - 0.01*y1^4/(y0^2 - y1^2 - y2^2 - y3^2)^2) + cos(x0)*x2", "0", "sin(x0)",
       "0"});
  std::vector<double> y{1.0, 0.3, 0.2, -0.1};
  auto f1 = field_strength_finsler(base, pm, sp(kX), sp(y));
  auto f2 = field_strength_finsler(gauged, pm, sp(kX), sp(y));
  for (int i = 0; i < 16; ++i) {
    CHECK_THAT(f2.f_hh[i], WithinAbs(f1.f_hh[i], 1e-10));
    CHECK_THAT(f2.f_hv[i], WithinAbs(f1.f_hv[i], 1e-10));
  }
  auto j1 = source_current_finsler(base, pm, sp(kX), sp(y));
  auto j2 = source_current_finsler(gauged, pm, sp(kX), sp(y));
  for (int a = 0; a < 4; ++a) CHECK_THAT(j2.j[a], WithinAbs(j1.j[a], 1e-10));
}

TEST_CASE("correspondence_report: plane wave, Coulomb, zero potential") {
  auto mk = FinslerStructure::minkowski();
  std::vector<std::pair<std::vector<double>, std::vector<double>>> samples;
  SamplerPlan plan;
  plan.count = 5;
  plan.seed = 99;
  SampleStream stream(plan, 4);
  while (samples.size() < 5) {
    auto [x, y] = stream.next();
    if (!mk.in_domain(sp(x), sp(y))) continue;
    samples.emplace_back(x, y);
  }

  auto rep = correspondence_report(plane_wave(), mk, samples);
  CHECK(rep.samples == 5);
  CHECK(rep.f_hh_max_diff <= 1e-8);
  CHECK(rep.f_hv_max_abs <= 1e-12);
  CHECK(rep.residual_riemann_max_abs <= 1e-8);
  CHECK(rep.residual_finsler_max_abs <= 1e-8);
  CHECK(rep.current_max_diff <= 1e-8);

  // Coulomb needs samples away from the spatial origin
  std::vector<std::pair<std::vector<double>, std::vector<double>>> coulomb_samples;
  for (const auto& [x, y] : samples) {
    auto xs = x;
    xs[1] += 2.0;  // push |r| away from 0
    coulomb_samples.emplace_back(xs, y);
  }
  auto repc = correspondence_report(coulomb(), mk, coulomb_samples);
  CHECK(repc.f_hh_max_diff <= 1e-6);
  CHECK(repc.f_hv_max_abs <= 1e-12);
  CHECK(repc.current_max_diff <= 1e-6);

  auto zero = PotentialField::from_strings({"0", "0", "0", "0"});
  auto repz = correspondence_report(zero, mk, samples);
  CHECK(repz.f_hh_max_diff == 0.0);
  CHECK(repz.f_hv_max_abs == 0.0);
  CHECK(repz.residual_riemann_max_abs == 0.0);
  CHECK(repz.residual_finsler_max_abs == 0.0);
  CHECK(repz.current_max_diff == 0.0);
}

TEST_CASE("raising and lowering round-trip on field samples") {
  auto pm = FinslerStructure::perturbed_minkowski(0.01);
  auto a0 = perturbed_a0();
  std::vector<double> y{1.0, 0.3, 0.2, -0.1};
  auto fs = field_strength_finsler(a0, pm, sp(kX), sp(y));
  auto lower = [&](const std::vector<double>& up) {
    std::vector<double> out(16, 0.0);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        double acc = 0.0;
        for (int m = 0; m < 4; ++m)
          for (int v = 0; v < 4; ++v)
            acc += fs.metric.g[a * 4 + m] * fs.metric.g[b * 4 + v] * up[m * 4 + v];
        out[a * 4 + b] = acc;
      }
    return out;
  };
  auto hh_back = lower(fs.f_hh_up);
  auto hv_back = lower(fs.f_hv_up);
  for (int i = 0; i < 16; ++i) {
    CHECK_THAT(hh_back[i], WithinAbs(fs.f_hh[i], 1e-10));
    CHECK_THAT(hv_back[i], WithinAbs(fs.f_hv[i], 1e-10));
  }
}

TEST_CASE("convention registry is recorded on every current sample") {
  auto mk = FinslerStructure::minkowski();
  auto poly = PotentialField::from_strings({"0", "x0^2", "0", "0"});
  auto jr = source_current_riemann(poly, mk, sp(kX), sp(kYRef));
  CHECK(jr.convention == CurrentConvention::paper_riemann);
  CHECK(std::string(to_string(jr.convention)) == "paper-riemann");
  auto jf = source_current_finsler(poly, mk, sp(kX), sp(kYRef));
  CHECK(std::string(to_string(jf.convention)) == "paper-finsler");
  CHECK(jr.c == 1.0);
}
