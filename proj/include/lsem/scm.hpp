#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lsem/error.hpp"
#include "lsem/graph.hpp"
#include "lsem/matrix.hpp"
#include "lsem/random.hpp"

namespace lsem {

/// Edge weights (Lambda) and noise covariance (Omega) over a mixed graph.
/// Lambda(i, j) is the coefficient of X_i in the equation for X_j, so
/// X = Lambda^T X + eta. When the instance came from the Gram-vector
/// generator the vectors (one per row) are kept for exact noise sampling.
struct Parameters {
  MixedGraph graph;
  Matrix lambda;
  Matrix omega;
  std::optional<Matrix> gram_vectors;
};

/// Shape, zero-pattern, diagonal positivity and PSD checks. Off-pattern
/// entries of Omega must be within `tol` of zero.
inline void validate_parameters(const Parameters& p, double tol = 1e-9) {
  const std::size_t n = p.graph.size();
  if (p.lambda.rows() != n || p.lambda.cols() != n || p.omega.rows() != n || p.omega.cols() != n)
    throw Error(ErrorCode::ShapeMismatch, "Lambda and Omega must be n x n");
  topological_order(p.graph);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (p.lambda(i, j) != 0.0 && !p.graph.has_directed(i, j))
        throw Error(ErrorCode::InvalidArgument,
                    "Lambda(" + std::to_string(i) + "," + std::to_string(j) + ") outside the directed pattern");
      if (i != j && std::abs(p.omega(i, j)) > tol && !p.graph.has_bidirected(i, j))
        throw Error(ErrorCode::InvalidArgument,
                    "Omega(" + std::to_string(i) + "," + std::to_string(j) + ") outside the bidirected pattern");
    }
  for (std::size_t i = 0; i < n; ++i)
    if (!(p.omega(i, i) > 0.0)) throw Error(ErrorCode::InvalidArgument, "Omega diagonal must be positive");
  if (!psd_check(p.omega, tol)) throw Error(ErrorCode::NonPsdOmega, "Omega is not positive semidefinite");
}

namespace detail {

/// I - Lambda restricted to the directed pattern.
inline Matrix identity_minus_lambda(const Parameters& p) {
  const std::size_t n = p.graph.size();
  if (p.lambda.rows() != n || p.lambda.cols() != n)
    throw Error(ErrorCode::ShapeMismatch, "Lambda must be n x n");
  Matrix a = Matrix::identity(n);
  for (const auto& [i, j] : p.graph.directed()) a(i, j) = -p.lambda(i, j);
  return a;
}

/// Omega restricted to its diagonal and the bidirected pattern.
inline Matrix masked_omega(const Parameters& p) {
  const std::size_t n = p.graph.size();
  if (p.omega.rows() != n || p.omega.cols() != n)
    throw Error(ErrorCode::ShapeMismatch, "Omega must be n x n");
  Matrix o(n, n);
  for (std::size_t i = 0; i < n; ++i) o(i, i) = p.omega(i, i);
  for (const auto& [i, j] : p.graph.bidirected()) {
    o(i, j) = p.omega(i, j);
    o(j, i) = p.omega(j, i);
  }
  return o;
}

}  // namespace detail

/// (I - Lambda)^{-1}, reading Lambda only on the directed pattern.
inline Matrix total_effects(const Parameters& p) {
  topological_order(p.graph);
  return unit_upper_triangular_inverse(detail::identity_minus_lambda(p));
}

/// Sigma = (I - Lambda)^{-T} Omega (I - Lambda)^{-1}, symmetrized.
inline Matrix forward_covariance(const Parameters& p) {
  const Matrix a = total_effects(p);
  const Matrix omega = detail::masked_omega(p);
  return symmetrized(mat_mul(mat_mul(transpose(a), omega), a));
}

/// Lower factor L with L L^T = Omega used to draw eta = L g. Uses the Gram
/// vectors when present (exact even for singular Omega), otherwise Cholesky
/// with 1e-12 diagonal jitter.
inline Matrix noise_factor(const Parameters& p) {
  if (p.gram_vectors && p.gram_vectors->rows() == p.graph.size()) return gram_factor(*p.gram_vectors);
  return cholesky_lower(detail::masked_omega(p), 1e-12);
}

/// m independent draws of X = (I - Lambda)^{-T} eta, eta ~ N(0, Omega), one
/// sample per row.
inline Matrix sample_observations(const Parameters& p, std::size_t m, Rng& rng) {
  const std::size_t n = p.graph.size();
  const Matrix a = total_effects(p);
  const Matrix l = noise_factor(p);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(m, n);
  std::vector<double> g(n), eta(n);
  for (std::size_t r = 0; r < m; ++r) {
    for (auto& x : g) x = normal(rng);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k <= i; ++k) s += l(i, k) * g[k];
      eta[i] = s;
    }
    auto row = out.row(r);
    for (std::size_t i = 0; i < n; ++i) {
      const double e = eta[i];
      if (e == 0.0) continue;
      auto arow = a.row(i);
      for (std::size_t j = 0; j < n; ++j) row[j] += e * arow[j];
    }
  }
  return out;
}

/// Second-moment estimate (1/m) sum x x^T. The model is zero-mean, so no
/// centering is applied; call center_columns first for raw external data.
inline Matrix sample_covariance(const Matrix& batch) {
  const std::size_t m = batch.rows();
  const std::size_t n = batch.cols();
  if (m == 0) throw Error(ErrorCode::EmptyBatch, "sample_covariance needs at least one sample");
  Matrix s(n, n);
  for (std::size_t r = 0; r < m; ++r) {
    auto x = batch.row(r);
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = x[i];
      for (std::size_t j = i; j < n; ++j) s(i, j) += xi * x[j];
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      s(i, j) /= static_cast<double>(m);
      s(j, i) = s(i, j);
    }
  return s;
}

inline Matrix center_columns(const Matrix& batch) {
  if (batch.rows() == 0) throw Error(ErrorCode::EmptyBatch, "center_columns needs at least one sample");
  Matrix out = batch;
  for (std::size_t j = 0; j < batch.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t r = 0; r < batch.rows(); ++r) mean += batch(r, j);
    mean /= static_cast<double>(batch.rows());
    for (std::size_t r = 0; r < batch.rows(); ++r) out(r, j) -= mean;
  }
  return out;
}

inline void require_path(const MixedGraph& g) {
  if (!is_path(g)) throw Error(ErrorCode::NotAPath, "operation requires a directed path 0 -> 1 -> ... -> n-1");
}

/// Product Lambda(l,l+1) * ... * Lambda(k-1,k) along the path, 1 when l >= k.
inline double cumulative_path_weight(const Parameters& p, std::size_t l, std::size_t k) {
  require_path(p.graph);
  if (l >= p.graph.size() || k >= p.graph.size())
    throw Error(ErrorCode::InvalidArgument, "path index out of range");
  double w = 1.0;
  for (std::size_t j = l; j < k; ++j) w *= p.lambda(j, j + 1);
  return w;
}

/// Sigma(i, j) on a path as the double sum over source pairs (k, k') of
/// W(k, i) W(k', j) Omega(k, k'), W being the cumulative path weight.
inline double sigma_entry_expansion(const Parameters& p, std::size_t i, std::size_t j) {
  require_path(p.graph);
  const std::size_t n = p.graph.size();
  if (i >= n || j >= n) throw Error(ErrorCode::InvalidArgument, "index out of range");
  const Matrix omega = detail::masked_omega(p);
  double s = 0.0;
  for (std::size_t k = 0; k <= i; ++k) {
    const double wk = cumulative_path_weight(p, k, i);
    for (std::size_t kp = 0; kp <= j; ++kp) s += wk * cumulative_path_weight(p, kp, j) * omega(k, kp);
  }
  return s;
}

}  // namespace lsem
