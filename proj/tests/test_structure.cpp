#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "finsler/derive.hpp"
#include "finsler/structure.hpp"
#include "test_support.hpp"

using namespace finsler;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
std::span<const double> sp(const std::vector<double>& v) { return {v.data(), v.size()}; }
}  // namespace

TEST_CASE("eval_F: Euclidean quadratic") {
  auto s = FinslerStructure::euclidean(3);
  std::vector<double> x{0, 0, 0}, y{1, 2, 2};
  CHECK(eval_F(s, sp(x), sp(y)) == 9.0);
  CHECK(eval_L(s, sp(x), sp(y)) == 3.0);
  REQUIRE(s.signature().has_value());
  CHECK(*s.signature() == std::pair<int, int>(3, 0));
}

TEST_CASE("eval_F: Randers with constant b") {
  auto s = testsup::randers_constant_b();
  std::vector<double> x{0, 0}, y{1, 0};
  CHECK_THAT(eval_L(s, sp(x), sp(y)), WithinRel(1.3, 1e-15));
  CHECK_THAT(eval_F(s, sp(x), sp(y)), WithinRel(1.69, 1e-15));
}

TEST_CASE("eval_F: degree-2 homogeneity at lambda = 2") {
  for (const auto& s : testsup::shipped_structures()) {
    SampleStream stream(testsup::plan_for(s, 20, 11), s.dimension());
    std::size_t used = 0;
    while (used < 20) {
      auto [x, y] = stream.next();
      if (!s.in_domain(sp(x), sp(y))) continue;
      double f = eval_F(s, sp(x), sp(y));
      std::vector<double> y2(y);
      for (auto& v : y2) v *= 2.0;
      double f2 = eval_F(s, sp(x), sp(y2));
      CHECK(std::abs(f2 - 4.0 * f) <= 1e-12 * std::abs(4.0 * f));
      ++used;
    }
  }
}

TEST_CASE("eval_F: slit-bundle guard") {
  auto s = FinslerStructure::euclidean(2);
  std::vector<double> x{0, 0}, y{1e-10, 0};
  CHECK_THROWS_AS(eval_F(s, sp(x), sp(y)), DomainError);
}

TEST_CASE("metric_tensor: Euclidean and Minkowski") {
  auto e = FinslerStructure::euclidean(3);
  std::vector<double> x{0, 0, 0}, y{0.4, -1.0, 2.0};
  auto m = metric_tensor(e, sp(x), sp(y));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK_THAT(m.at(i, j), WithinAbs(i == j ? 1.0 : 0.0, 1e-14));
  CHECK_THAT(m.det_g, WithinRel(1.0, 1e-13));
  CHECK(m.signature == std::pair<int, int>(3, 0));

  auto mk = FinslerStructure::minkowski();
  std::vector<double> x4{0, 0, 0, 0}, y4{1.0, 0.2, 0.3, -0.1};
  auto mm = metric_tensor(mk, sp(x4), sp(y4));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK_THAT(mm.at(i, j), WithinAbs(i == j ? (i == 0 ? 1.0 : -1.0) : 0.0, 1e-14));
  CHECK_THAT(mm.det_g, WithinRel(-1.0, 1e-13));
  CHECK_THAT(mm.volume_factor, WithinRel(1.0, 1e-13));  // realizes sqrt(-g) = 1
  CHECK(mm.signature == std::pair<int, int>(1, 3));
}

TEST_CASE("metric_tensor: Randers vs frozen values and FD Hessian oracle") {
  auto s = testsup::randers_constant_b();
  std::vector<double> x{0, 0}, y{0.0, 1.0};
  auto m = metric_tensor(s, sp(x), sp(y));
  CHECK_THAT(m.at(0, 0), WithinRel(1.09, 1e-12));
  CHECK_THAT(m.at(0, 1), WithinRel(0.3, 1e-12));
  CHECK_THAT(m.at(1, 0), WithinRel(0.3, 1e-12));
  CHECK_THAT(m.at(1, 1), WithinRel(1.0, 1e-12));
  CHECK_THAT(m.det_g, WithinRel(1.0, 1e-12));

  // FD Hessian of F/2
  auto f = [&](std::span<const double> v) {
    return 0.5 * s.field().eval(sp(x), v);
  };
  std::vector<std::size_t> slots{0, 1};
  auto o = fd_oracle(f, y, slots, 2, 1e-4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK_THAT(m.at(i, j), WithinAbs(o.d2_at(i, j), 1e-6));

  // g g_inv = identity within 1e-10
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 2; ++k) acc += m.at(i, k) * m.g_inv[k * 2 + j];
      CHECK_THAT(acc, WithinAbs(i == j ? 1.0 : 0.0, 1e-10));
    }
}

TEST_CASE("metric_tensor: perturbed Minkowski vs frozen determinant") {
  auto s = FinslerStructure::perturbed_minkowski(0.01);
  std::vector<double> x{0, 0, 0, 0}, y{1.0, 0.3, 0.2, -0.1};
  auto m = metric_tensor(s, sp(x), sp(y));
  CHECK_THAT(m.at(0, 0), WithinRel(1.0003998704516583, 1e-12));
  CHECK_THAT(m.det_g, WithinRel(-0.9928460470064394, 1e-11));
  CHECK(m.signature == std::pair<int, int>(1, 3));
}

TEST_CASE("cartan_tensor: Riemannian provenance is Cartan-flat") {
  std::vector<FinslerStructure> flats;
  flats.push_back(FinslerStructure::euclidean(3));
  flats.push_back(FinslerStructure::minkowski());
  flats.push_back(FinslerStructure::poincare_half_plane());
  for (const auto& s : flats) {
    SampleStream stream(testsup::plan_for(s, 10, 5), s.dimension());
    std::size_t used = 0;
    while (used < 10) {
      auto [x, y] = stream.next();
      if (!s.in_domain(sp(x), sp(y))) continue;
      auto c = cartan_tensor(s, sp(x), sp(y));
      CHECK(c.max_abs() <= 1e-10);
      ++used;
    }
  }
}

TEST_CASE("cartan_tensor: Randers is strictly non-Riemannian") {
  auto s = testsup::randers_constant_b();
  std::vector<double> x{0, 0}, y{0.0, 1.0};
  auto c = cartan_tensor(s, sp(x), sp(y));
  // brute-force third-derivative oracle value: C_000 = 0.45 at y = (0, 1)
  CHECK_THAT(c.at(0, 0, 0), WithinRel(0.45, 1e-10));
  CHECK(c.max_abs() > 1e-3);
  CHECK_THAT(c.max_abs(), WithinRel(0.45, 1e-10));

  // cross-check the whole tensor against the FD oracle (C = F_yyy / 4)
  auto f = [&](std::span<const double> v) { return s.field().eval(sp(x), v); };
  std::vector<std::size_t> slots{0, 1};
  auto o = fd_oracle(f, y, slots, 3, 1e-3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        CHECK_THAT(c.at(i, j, k), WithinAbs(0.25 * o.d3_at(i, j, k), 1e-5));

  CHECK(c.max_asymmetry() <= 1e-12);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double contr = 0.0;
      for (int k = 0; k < 2; ++k) contr += c.at(i, j, k) * y[k];
      CHECK_THAT(contr, WithinAbs(0.0, 1e-9));
    }
}

TEST_CASE("indicatrix_radius") {
  auto e = FinslerStructure::euclidean(2);
  std::vector<double> x{0, 0}, u{1.0, 0.0};
  CHECK_THAT(indicatrix_radius(e, sp(x), sp(u)), WithinRel(1.0, 1e-14));

  auto s = testsup::randers_constant_b();
  std::vector<double> up{1.0, 0.0}, um{-1.0, 0.0};
  CHECK_THAT(indicatrix_radius(s, sp(x), sp(up)), WithinRel(1.0 / 1.3, 1e-13));
  CHECK_THAT(indicatrix_radius(s, sp(x), sp(um)), WithinRel(1.0 / 0.7, 1e-13));

  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> dir{nd(rng), nd(rng)};
    double norm = std::hypot(dir[0], dir[1]);
    for (auto& v : dir) v /= norm;
    double r = indicatrix_radius(s, sp(x), sp(dir));
    std::vector<double> ru(dir);
    for (auto& v : ru) v *= r;
    CHECK_THAT(eval_L(s, sp(x), sp(ru)), WithinAbs(1.0, 1e-12));
  }

  auto mk = FinslerStructure::minkowski();
  std::vector<double> x4{0, 0, 0, 0}, u4{1, 0, 0, 0};
  CHECK_THROWS_AS(indicatrix_radius(mk, sp(x4), sp(u4)), UnsupportedKindError);
}

TEST_CASE("validate: Euclidean is clean to 1e-12") {
  auto s = FinslerStructure::euclidean(3);
  SamplerPlan plan;
  plan.count = 100;
  plan.seed = 7;
  auto rep = validate(s, plan);
  CHECK(rep.all_pass);
  for (const auto& c : rep.checks) {
    INFO(c.name);
    if (c.name.rfind("euler", 0) == 0 || c.name.rfind("homog", 0) == 0)
      CHECK(c.max_residual <= 1e-12);
  }
}

TEST_CASE("validate: every shipped structure passes the identity suite") {
  for (const auto& s : testsup::shipped_structures()) {
    auto rep = validate(s, testsup::plan_for(s, 100, 7));
    INFO(s.name());
    for (const auto& c : rep.checks) {
      INFO(c.name << " residual " << c.max_residual << " tol " << c.tolerance);
      CHECK(c.pass);
    }
    CHECK(rep.all_pass);
  }
}

TEST_CASE("validate: inhomogeneous expression fails loudly") {
  auto s = FinslerStructure::expression(parse("y0^2 + y1", 2),
                                        MetricKind::positive_definite);
  SamplerPlan plan;
  plan.count = 50;
  plan.seed = 3;
  auto rep = validate(s, plan);
  CHECK_FALSE(rep.all_pass);
  const auto* hom = rep.find("homogeneity_F");
  REQUIRE(hom != nullptr);
  CHECK_FALSE(hom->pass);
  CHECK(hom->max_residual > 1e-3);
}

TEST_CASE("validate: out-of-domain samples are skipped, not fatal") {
  auto s = FinslerStructure::poincare_half_plane();
  SamplerPlan plan;
  plan.count = 40;
  plan.seed = 9;
  plan.box = {{-1.0, 1.0}, {-0.5, 1.5}};  // straddles the boundary x1 = 0
  auto rep = validate(s, plan);
  REQUIRE_FALSE(rep.checks.empty());
  CHECK(rep.checks.front().skipped > 0);
  CHECK(rep.all_pass);
}

TEST_CASE("alternating kind skips positivity and L") {
  auto mk = FinslerStructure::minkowski();
  SamplerPlan plan;
  plan.count = 30;
  plan.seed = 21;
  auto rep = validate(mk, plan);
  CHECK(rep.find("positivity_F") == nullptr);
  CHECK(rep.find("homogeneity_L") == nullptr);
  CHECK(rep.all_pass);
  std::vector<double> x{0, 0, 0, 0}, y{1, 0, 0, 0};
  CHECK_THROWS_AS(eval_L(mk, sp(x), sp(y)), UnsupportedKindError);
}

TEST_CASE("degenerate expression structure fails nondegeneracy in validate") {
  // F = (y0 + y1)^2 has a singular vertical Hessian everywhere
  auto s = FinslerStructure::expression(parse("(y0 + y1)^2", 2),
                                        MetricKind::positive_definite);
  CHECK_FALSE(s.signature().has_value());
  SamplerPlan plan;
  plan.count = 20;
  plan.seed = 13;
  auto rep = validate(s, plan);
  CHECK_FALSE(rep.all_pass);
  const auto* nd = rep.find("nondegeneracy");
  REQUIRE(nd != nullptr);
  CHECK_FALSE(nd->pass);
}
