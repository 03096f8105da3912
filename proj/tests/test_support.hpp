#pragma once

// Shared fixture structures used across the unit and acceptance suites.

#include <vector>

#include "finsler/structure.hpp"

namespace testsup {

// Randers with a = identity, constant b = (0.3, 0); x-independent.
inline finsler::FinslerStructure randers_constant_b() {
  auto a = finsler::MatrixExprField::from_strings({"1", "0", "0", "1"}, 2);
  auto b = finsler::VectorExprField::from_strings({"0.3", "0"}, 2);
  return finsler::FinslerStructure::randers(std::move(a), std::move(b));
}

// The shipped x-dependent Randers example: a = identity,
// b = (0.2 + 0.1*sin(x1), 0). ||b|| <= 0.3 everywhere, so positivity holds.
inline finsler::FinslerStructure randers_x_dependent() {
  auto a = finsler::MatrixExprField::from_strings({"1", "0", "0", "1"}, 2);
  auto b = finsler::VectorExprField::from_strings({"0.2 + 0.1*sin(x1)", "0"}, 2);
  return finsler::FinslerStructure::randers(std::move(a), std::move(b));
}

// Every structure the acceptance criteria quantify over.
inline std::vector<finsler::FinslerStructure> shipped_structures() {
  std::vector<finsler::FinslerStructure> out;
  out.push_back(finsler::FinslerStructure::euclidean(3));
  out.push_back(finsler::FinslerStructure::minkowski());
  out.push_back(finsler::FinslerStructure::poincare_half_plane());
  out.push_back(randers_x_dependent());
  out.push_back(finsler::FinslerStructure::perturbed_minkowski(0.01));
  return out;
}

// A box that keeps Poincare samples inside the half-plane; harmless for the
// other structures.
inline finsler::SamplerPlan plan_for(const finsler::FinslerStructure& s,
                                     std::size_t count, std::uint64_t seed) {
  finsler::SamplerPlan plan;
  plan.count = count;
  plan.seed = seed;
  if (s.name() == "poincare_half_plane")
    plan.box = {{-1.0, 1.0}, {0.5, 2.0}};
  return plan;
}

}  // namespace testsup
