#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lsem/error.hpp"
#include "lsem/graph.hpp"
#include "lsem/matrix.hpp"
#include "lsem/scm.hpp"

namespace lsem {

struct RecoveryResult {
  Matrix lambda_hat;
  std::optional<Matrix> omega_hat;
  /// Per node: smallest relative pivot of the node's linear system; empty for
  /// nodes without parents.
  std::vector<std::optional<double>> min_pivots;
};

namespace detail {
inline void require_square(const Matrix& sigma, std::size_t n, const char* who) {
  if (sigma.rows() != n || sigma.cols() != n)
    throw Error(ErrorCode::ShapeMismatch, std::string(who) + ": covariance must be " + std::to_string(n) + " x " +
                                              std::to_string(n));
}
}  // namespace detail

/// One step of the path recurrence: the coefficient on edge i -> i+1 given
/// the upstream coefficient on edge i-1 -> i (ignored when i == 0).
///
///   Lambda(i,i+1) = (Sigma(i,i+1) - up * Sigma(i-1,i+1)) / (Sigma(i,i) - up * Sigma(i-1,i))
///
/// The denominator must be at least 1e-12 * |Sigma(i,i)| in magnitude.
inline double recurrence_step(const Matrix& sigma, std::size_t i, double upstream, double* relative_pivot = nullptr) {
  double num = sigma(i, i + 1);
  double den = sigma(i, i);
  if (i > 0) {
    num -= upstream * sigma(i - 1, i + 1);
    den -= upstream * sigma(i - 1, i);
  }
  const double scale = std::abs(sigma(i, i));
  if (!(std::abs(den) >= kSingularPivotThreshold * scale) || den == 0.0)
    throw Error(ErrorCode::NearSingularSystem,
                "recurrence denominator vanishes at node " + std::to_string(i + 1), i + 1);
  if (relative_pivot) *relative_pivot = scale > 0.0 ? std::abs(den) / scale : 0.0;
  return num / den;
}

/// Edge weights of a bow-free path 0 -> 1 -> ... -> n-1 from its covariance
/// via the two-term recurrence seeded with Sigma(0,1) / Sigma(0,0).
inline RecoveryResult recover_path_lambda(const Matrix& sigma, std::size_t n) {
  if (n < 2) throw Error(ErrorCode::InvalidSize, "path recovery needs n >= 2");
  detail::require_square(sigma, n, "recover_path_lambda");
  RecoveryResult out{Matrix(n, n), std::nullopt, std::vector<std::optional<double>>(n)};
  double upstream = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double pivot = 0.0;
    upstream = recurrence_step(sigma, i, upstream, &pivot);
    out.lambda_hat(i, i + 1) = upstream;
    out.min_pivots[i + 1] = pivot;
  }
  return out;
}

/// Edge weights of a general bow-free DAG. Nodes are visited in topological
/// order; for node v with parents P the system
///
///   sum_{c in P} M(p, c) lambda_c = M(p, v),   M = (I - Lambda_hat)^T Sigma,  p in P
///
/// expresses Omega(p, v) = 0 (no bidirected edge between v and a parent) and
/// only needs the already recovered columns of the parents.
inline RecoveryResult recover_bowfree_lambda(const Matrix& sigma, const MixedGraph& g) {
  const std::size_t n = g.size();
  detail::require_square(sigma, n, "recover_bowfree_lambda");
  if (!is_bow_free(g)) throw Error(ErrorCode::NotBowFree, "graph has a bow");
  const auto order = topological_order(g);

  std::vector<std::vector<std::size_t>> parents(n);
  for (const auto& [i, j] : g.directed()) parents[j].push_back(i);

  RecoveryResult out{Matrix(n, n), std::nullopt, std::vector<std::optional<double>>(n)};
  Matrix& lam = out.lambda_hat;

  // Row p of (I - Lambda_hat)^T Sigma, evaluated at column c.
  auto m_entry = [&](std::size_t p, std::size_t c) {
    double s = sigma(p, c);
    for (std::size_t k : parents[p]) s -= lam(k, p) * sigma(k, c);
    return s;
  };

  for (std::size_t v : order) {
    const auto& pa = parents[v];
    if (pa.empty()) continue;
    const std::size_t q = pa.size();
    Matrix a(q, q), b(q, 1);
    std::vector<double> scales(q);
    for (std::size_t r = 0; r < q; ++r) {
      for (std::size_t c = 0; c < q; ++c) a(r, c) = m_entry(pa[r], pa[c]);
      b(r, 0) = m_entry(pa[r], v);
      scales[r] = std::abs(sigma(pa[r], pa[r]));
    }
    DenseSolution sol;
    try {
      sol = solve_dense_checked(a, b, scales);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NearSingularSystem) throw;
      throw Error(ErrorCode::NearSingularSystem, "parent system singular at node " + std::to_string(v), v);
    }
    for (std::size_t r = 0; r < q; ++r) lam(pa[r], v) = sol.x(r, 0);
    out.min_pivots[v] = sol.min_relative_pivot;
  }
  return out;
}

/// Path recurrence when the directed part is a path, general solver otherwise.
inline RecoveryResult recover_lambda(const Matrix& sigma, const MixedGraph& g) {
  if (is_path(g)) return recover_path_lambda(sigma, g.size());
  return recover_bowfree_lambda(sigma, g);
}

/// Omega_hat = (I - Lambda_hat)^T Sigma (I - Lambda_hat), symmetrized.
/// Off-pattern entries are left as they come out; they measure how far Sigma
/// is from the hypothesised model.
inline Matrix recover_omega(const Matrix& sigma, const Matrix& lambda_hat) {
  if (!sigma.is_square()) throw Error(ErrorCode::ShapeMismatch, "recover_omega: covariance not square");
  require_same_shape(sigma, lambda_hat, "recover_omega: Sigma and Lambda shapes differ");
  const Matrix b = Matrix::identity(sigma.rows()) - lambda_hat;
  return symmetrized(mat_mul(mat_mul(transpose(b), sigma), b));
}

/// Largest residual of the identity behind the path recurrence, evaluated
/// on the exact covariance of `p`:
///   Lambda(i,i+1) * (Sigma(i,i) - Lambda(i-1,i) Sigma(i-1,i))
///     = Sigma(i,i+1) - Lambda(i-1,i) Sigma(i-1,i+1),   1 <= i <= n-2.
inline double verify_recurrence_identity(const Parameters& p) {
  require_path(p.graph);
  const Matrix sigma = forward_covariance(p);
  const Matrix& lam = p.lambda;
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < p.graph.size(); ++i) {
    const double lhs = -lam(i, i + 1) * lam(i - 1, i) * sigma(i - 1, i) + lam(i, i + 1) * sigma(i, i);
    const double rhs = -lam(i - 1, i) * sigma(i - 1, i + 1) + sigma(i, i + 1);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

}  // namespace lsem
