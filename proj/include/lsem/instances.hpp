#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lsem/error.hpp"
#include "lsem/graph.hpp"
#include "lsem/matrix.hpp"
#include "lsem/random.hpp"
#include "lsem/scm.hpp"

namespace lsem {

/// Lambda entries ~ U[-h, h]; Omega = Gram matrix of unit vectors in R^d.
struct GeneratorConfig {
  double h = 0.5;
  std::size_t d = 1000;
};

inline std::size_t default_dimension(std::size_t n) { return std::max<std::size_t>(1000, 4 * n); }

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) s += a[t] * b[t];
  return s;
}

/// Unit vectors, one per vertex, generated in `order`. Vertex v's vector is a
/// uniform direction on the sphere with its components along the vectors of
/// `constraints[v]` (all generated earlier) removed, then renormalized.
inline Matrix constrained_unit_vectors(std::size_t n, const std::vector<std::vector<std::size_t>>& constraints,
                                       const std::vector<std::size_t>& order, std::size_t d, Rng& rng) {
  if (d < 2) throw Error(ErrorCode::InvalidArgument, "vector dimension must be at least 2");
  constexpr int kMaxRedraws = 100;
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix v(n, d);
  std::vector<double> r(d);
  for (std::size_t i : order) {
    // Orthonormal basis of the constraint span.
    std::vector<std::vector<double>> basis;
    for (std::size_t c : constraints[i]) {
      std::vector<double> q(v.row(c).begin(), v.row(c).end());
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& b : basis) {
          const double k = dot(q, b);
          for (std::size_t t = 0; t < d; ++t) q[t] -= k * b[t];
        }
      const double qn = std::sqrt(dot(q, q));
      if (qn < 1e-12) continue;
      for (double& x : q) x /= qn;
      basis.push_back(std::move(q));
    }

    bool ok = false;
    for (int attempt = 0; attempt < kMaxRedraws && !ok; ++attempt) {
      for (double& x : r) x = normal(rng);
      double rn = std::sqrt(dot(r, r));
      for (double& x : r) x /= rn;
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& b : basis) {
          const double k = dot(r, b);
          for (std::size_t t = 0; t < d; ++t) r[t] -= k * b[t];
        }
      rn = std::sqrt(dot(r, r));
      if (rn < 1e-12) continue;
      for (double& x : r) x /= rn;
      ok = true;
    }
    if (!ok)
      throw Error(ErrorCode::DegenerateDraw, "projection residual vanished " + std::to_string(kMaxRedraws) +
                                                 " times for vertex " + std::to_string(i));
    std::copy(r.begin(), r.end(), v.row(i).begin());
  }
  return v;
}

}  // namespace detail

/// n unit vectors in R^d with v_i orthogonal to v_{i-1}; rows of the result.
inline Matrix orthogonal_chain_vectors(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<std::vector<std::size_t>> constraints(n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    order[i] = i;
    if (i > 0) constraints[i].push_back(i - 1);
  }
  return detail::constrained_unit_vectors(n, constraints, order, d, rng);
}

/// Random instance over a bow-free graph. Each vertex's Gram vector is drawn
/// orthogonal to the vectors of its parents, which zeroes Omega on every
/// directed pair; on a path this is the chain construction above. Lambda
/// entries on the directed pattern are i.i.d. U[-h, h].
inline Parameters random_parameters(const MixedGraph& g, const GeneratorConfig& cfg, Rng& rng) {
  if (!is_bow_free(g)) throw Error(ErrorCode::NotBowFree, "random_parameters needs a bow-free graph");
  if (!(cfg.h >= 0.0) || !std::isfinite(cfg.h)) throw Error(ErrorCode::InvalidArgument, "h must be nonnegative");
  if (cfg.d < 2) throw Error(ErrorCode::InvalidArgument, "d must be at least 2");
  const std::size_t width = g.max_in_degree();
  if (width > 1 && cfg.d < 4 * width)
    throw Error(ErrorCode::InvalidArgument, "d must be at least 4x the largest parent set (" +
                                                std::to_string(width) + ")");
  const std::size_t n = g.size();
  const auto order = topological_order(g);
  std::vector<std::vector<std::size_t>> parents(n);
  for (const auto& [i, j] : g.directed()) parents[j].push_back(i);

  Matrix v = detail::constrained_unit_vectors(n, parents, order, cfg.d, rng);

  Parameters p;
  p.graph = g;
  p.lambda = Matrix(n, n);
  if (cfg.h > 0.0) {
    std::uniform_real_distribution<double> u(-cfg.h, cfg.h);
    for (const auto& [i, j] : g.directed()) p.lambda(i, j) = u(rng);
  }

  p.omega = Matrix(n, n);
  bool exact_gram = true;
  for (std::size_t i = 0; i < n; ++i) {
    p.omega(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double w = 0.0;
      if (g.has_bidirected(i, j)) {
        w = detail::dot(v.row(i), v.row(j));
      } else if (!g.has_directed(i, j) && !g.has_directed(j, i)) {
        exact_gram = false;  // pattern zero that the construction does not produce
      }
      p.omega(i, j) = p.omega(j, i) = w;
    }
  }
  if (exact_gram) p.gram_vectors = std::move(v);
  return p;
}

/// The 4-node bow-free path whose edge 3 -> 4 (1-based) becomes 0/0 in the
/// recurrence as eps -> 0. Recovery is exact for eps > 0 but arbitrarily
/// ill-conditioned.
inline Parameters instability_instance(double eps) {
  if (!(eps >= 0.0)) throw Error(ErrorCode::InvalidArgument, "eps must be nonnegative");
  Parameters p;
  p.graph = path_graph(4);
  p.lambda = Matrix(4, 4);
  p.lambda(0, 1) = std::sqrt(2.0);
  p.lambda(1, 2) = -std::sqrt(2.0);
  p.lambda(2, 3) = 0.5;
  p.omega = Matrix{{1.0, 0.0, 0.5, 0.5},
                   {0.0, 1.0, 0.0, 0.5},
                   {0.5, 0.0, 1.0 + eps, 0.0},
                   {0.5, 0.5, 0.0, 1.0}};
  return p;
}

/// Fraction of random path instances with |Sigma(0,1)| >= Sigma(0,0).
inline double divergence_probe(double h, std::size_t trials, std::size_t d, Rng& rng, std::size_t n = 3) {
  if (!(h >= 0.0)) throw Error(ErrorCode::InvalidArgument, "h must be nonnegative");
  if (trials == 0) throw Error(ErrorCode::InvalidArgument, "trials must be positive");
  const MixedGraph g = path_graph(n);
  const std::uint64_t base = rng();
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng trial_rng(derive_seed(base, t));
    const Matrix sigma = forward_covariance(random_parameters(g, {h, d}, trial_rng));
    if (std::abs(sigma(0, 1)) >= sigma(0, 0)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

/// P_i = sum_{k <= i} W(k, i)^2 on a path, W the cumulative path weight
/// (W(i, i) = 1).
inline std::vector<double> path_weight_energy(const Parameters& p) {
  require_path(p.graph);
  const std::size_t n = p.graph.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 1.0;
    double w = 1.0;
    for (std::size_t k = i; k-- > 0;) {
      w *= p.lambda(k, k + 1);
      s += w * w;
    }
    out[i] = s;
  }
  return out;
}

}  // namespace lsem
