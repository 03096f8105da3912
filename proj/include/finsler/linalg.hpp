#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/jet.hpp"

namespace finsler {

/// Inverse and determinant of a small dense matrix by Gauss-Jordan with
/// partial pivoting, generic over the scalar tower (pivot choice compares
/// value slots). Throws DegeneracyError on an exactly zero pivot; callers
/// apply their own scaled thresholds.
template <class S>
struct MatrixInverse {
  std::vector<S> inverse;  // n*n row-major
  S det;
};

template <class S>
MatrixInverse<S> invert_matrix(std::span<const S> a, std::size_t n) {
  std::vector<S> m(a.begin(), a.end());
  std::vector<S> inv(n * n, tower_constant_like(0.0, a[0]));
  for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = tower_constant_like(1.0, a[0]);
  S det = tower_constant_like(1.0, a[0]);

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::abs(tower_value(m[col * n + col]));
    for (std::size_t r = col + 1; r < n; ++r) {
      double v = std::abs(tower_value(m[r * n + col]));
      if (v > best) best = v, piv = r;
    }
    if (best == 0.0) throw DegeneracyError("singular matrix in invert_matrix");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(m[piv * n + c], m[col * n + c]);
        std::swap(inv[piv * n + c], inv[col * n + c]);
      }
      det = -det;
    }
    S p = m[col * n + col];
    det = det * p;
    for (std::size_t c = 0; c < n; ++c) {
      m[col * n + c] = m[col * n + c] / p;
      inv[col * n + c] = inv[col * n + c] / p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      S f = m[r * n + col];
      for (std::size_t c = 0; c < n; ++c) {
        m[r * n + c] = m[r * n + c] - f * m[col * n + c];
        inv[r * n + c] = inv[r * n + c] - f * inv[col * n + c];
      }
    }
  }
  return {std::move(inv), std::move(det)};
}

template <>
inline MatrixInverse<double> invert_matrix(std::span<const double> a, std::size_t n) {
  std::vector<double> m(a.begin(), a.end());
  std::vector<double> inv(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
  double det = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::abs(m[col * n + col]);
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(m[r * n + col]) > best) best = std::abs(m[r * n + col]), piv = r;
    if (best == 0.0) throw DegeneracyError("singular matrix in invert_matrix");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(m[piv * n + c], m[col * n + c]);
        std::swap(inv[piv * n + c], inv[col * n + c]);
      }
      det = -det;
    }
    double p = m[col * n + col];
    det *= p;
    for (std::size_t c = 0; c < n; ++c) m[col * n + c] /= p, inv[col * n + c] /= p;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = m[r * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        m[r * n + c] -= f * m[col * n + c];
        inv[r * n + c] -= f * inv[col * n + c];
      }
    }
  }
  return {std::move(inv), det};
}

inline double one_norm(std::span<const double> a, std::size_t n) {
  double best = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += std::abs(a[r * n + c]);
    best = std::max(best, s);
  }
  return best;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations (doubles
/// only; used for signature determination).
inline std::vector<double> symmetric_eigenvalues(std::span<const double> a, std::size_t n) {
  std::vector<double> m(a.begin(), a.end());
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += m[p * n + q] * m[p * n + q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = m[p * n + q];
        if (apq == 0.0) continue;
        double theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double mkp = m[k * n + p], mkq = m[k * n + q];
          m[k * n + p] = c * mkp - s * mkq;
          m[k * n + q] = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double mpk = m[p * n + k], mqk = m[q * n + k];
          m[p * n + k] = c * mpk - s * mqk;
          m[q * n + k] = s * mpk + c * mqk;
        }
      }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = m[i * n + i];
  return eig;
}

/// (p, q) = (#positive, #negative) eigenvalues.
inline std::pair<int, int> matrix_signature(std::span<const double> g, std::size_t n) {
  auto eig = symmetric_eigenvalues(g, n);
  int pos = 0, neg = 0;
  for (double e : eig) (e > 0.0 ? pos : neg)++;
  return {pos, neg};
}

}  // namespace finsler
