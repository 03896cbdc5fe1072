#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lsem/error.hpp"
#include "lsem/random.hpp"

namespace lsem {

using Edge = std::pair<std::size_t, std::size_t>;

/// A DAG of directed (causal) edges plus bidirected (correlated-noise) edges
/// on vertices 0..n-1. Vertex indices are 0-based; vertex i here is vertex
/// i+1 in the usual 1-based textbook numbering.
///
/// Edge lists are kept canonical: directed sorted lexicographically,
/// bidirected stored as (i, j) with i < j and sorted, no duplicates.
class MixedGraph {
 public:
  MixedGraph() = default;

  /// Validates indices and self-loops and canonicalizes the edge lists. Does
  /// not check acyclicity or bow-freeness; see topological_order / is_bow_free.
  MixedGraph(std::size_t n, std::vector<Edge> directed, std::vector<Edge> bidirected)
      : n_(n), directed_(std::move(directed)), bidirected_(std::move(bidirected)) {
    if (n_ == 0) throw Error(ErrorCode::InvalidSize, "graph must have at least one vertex");
    for (const auto& [i, j] : directed_) check_edge(i, j, "directed");
    for (auto& [i, j] : bidirected_) {
      check_edge(i, j, "bidirected");
      if (i > j) std::swap(i, j);
    }
    canonicalize(directed_);
    canonicalize(bidirected_);
  }

  std::size_t size() const noexcept { return n_; }
  const std::vector<Edge>& directed() const noexcept { return directed_; }
  const std::vector<Edge>& bidirected() const noexcept { return bidirected_; }

  bool has_directed(std::size_t from, std::size_t to) const {
    return std::binary_search(directed_.begin(), directed_.end(), Edge{from, to});
  }
  bool has_bidirected(std::size_t a, std::size_t b) const {
    if (a > b) std::swap(a, b);
    return std::binary_search(bidirected_.begin(), bidirected_.end(), Edge{a, b});
  }

  /// Parents of v in increasing index order.
  std::vector<std::size_t> parents(std::size_t v) const {
    std::vector<std::size_t> out;
    for (const auto& [i, j] : directed_)
      if (j == v) out.push_back(i);
    return out;
  }

  std::size_t max_in_degree() const {
    std::vector<std::size_t> deg(n_, 0);
    for (const auto& e : directed_) ++deg[e.second];
    return n_ == 0 ? 0 : *std::max_element(deg.begin(), deg.end());
  }

  bool operator==(const MixedGraph&) const = default;

 private:
  void check_edge(std::size_t i, std::size_t j, const char* kind) const {
    if (i >= n_ || j >= n_)
      throw Error(ErrorCode::InvalidArgument, std::string(kind) + " edge index out of range");
    if (i == j) throw Error(ErrorCode::InvalidArgument, std::string(kind) + " self-loop");
  }
  static void canonicalize(std::vector<Edge>& edges) {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  }

  std::size_t n_ = 0;
  std::vector<Edge> directed_;
  std::vector<Edge> bidirected_;
};

/// No vertex pair carries both a directed and a bidirected edge.
inline bool is_bow_free(const MixedGraph& g) {
  return std::none_of(g.directed().begin(), g.directed().end(),
                      [&](const Edge& e) { return g.has_bidirected(e.first, e.second); });
}

/// Kahn's algorithm, smallest ready vertex first.
inline std::vector<std::size_t> topological_order(const MixedGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::size_t> indeg(n, 0);
  std::vector<std::vector<std::size_t>> children(n);
  for (const auto& [i, j] : g.directed()) {
    ++indeg[j];
    children[i].push_back(j);
  }
  std::vector<std::size_t> ready;  // min-heap on vertex index
  auto cmp = std::greater<>();
  for (std::size_t v = 0; v < n; ++v)
    if (indeg[v] == 0) ready.push_back(v);
  std::make_heap(ready.begin(), ready.end(), cmp);
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    std::pop_heap(ready.begin(), ready.end(), cmp);
    const std::size_t v = ready.back();
    ready.pop_back();
    order.push_back(v);
    for (std::size_t c : children[v])
      if (--indeg[c] == 0) {
        ready.push_back(c);
        std::push_heap(ready.begin(), ready.end(), cmp);
      }
  }
  if (order.size() != n) throw Error(ErrorCode::CycleDetected, "directed edges contain a cycle");
  return order;
}

/// Directed part is exactly 0 -> 1 -> ... -> n-1.
inline bool is_path(const MixedGraph& g) {
  const std::size_t n = g.size();
  if (n < 2 || g.directed().size() != n - 1) return false;
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (g.directed()[i] != Edge{i, i + 1}) return false;
  return true;
}

/// Every pair not joined by a directed edge (in either direction).
inline std::vector<Edge> bow_free_complement(std::size_t n, const std::vector<Edge>& directed) {
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (const auto& [i, j] : directed) adj[i][j] = adj[j][i] = true;
  std::vector<Edge> out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (!adj[i][j]) out.emplace_back(i, j);
  return out;
}

/// Bow-free path: i -> i+1, and a bidirected edge on every pair at distance >= 2.
inline MixedGraph path_graph(std::size_t n) {
  if (n < 2) throw Error(ErrorCode::InvalidSize, "path_graph needs n >= 2");
  std::vector<Edge> directed;
  for (std::size_t i = 0; i + 1 < n; ++i) directed.emplace_back(i, i + 1);
  auto bidirected = bow_free_complement(n, directed);
  return MixedGraph(n, std::move(directed), std::move(bidirected));
}

namespace detail {
inline std::vector<Edge> layer_edges(std::size_t n, std::size_t k) {
  if (k == 0 || n == 0 || n % k != 0)
    throw Error(ErrorCode::InvalidSize, "layer width must be positive and divide n");
  std::vector<Edge> directed;
  for (std::size_t layer = 0; layer + 1 < n / k; ++layer)
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) directed.emplace_back(layer * k + a, (layer + 1) * k + b);
  std::sort(directed.begin(), directed.end());
  return directed;
}
}  // namespace detail

/// n/k consecutive layers of k vertices; every vertex of a layer points at
/// every vertex of the next; bidirected edges on all remaining pairs.
inline MixedGraph clique_of_paths(std::size_t n, std::size_t k) {
  auto directed = detail::layer_edges(n, k);
  auto bidirected = bow_free_complement(n, directed);
  return MixedGraph(n, std::move(directed), std::move(bidirected));
}

/// clique_of_paths with each directed edge dropped independently with
/// probability p; the bidirected set is the complement of what survives.
inline MixedGraph layered_graph(std::size_t n, std::size_t k, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "drop probability must lie in [0, 1]");
  auto all = detail::layer_edges(n, k);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Edge> kept;
  for (const auto& e : all)
    if (!(u(rng) < p)) kept.push_back(e);
  auto bidirected = bow_free_complement(n, kept);
  return MixedGraph(n, std::move(kept), std::move(bidirected));
}

}  // namespace lsem
