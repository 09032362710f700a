#include "spathmm/graph.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "spathmm/errors.hpp"

namespace spathmm {

NeighborhoodGraph build_graph(int n_sites, std::span<const std::pair<int, int>> edges) {
  if (n_sites <= 0) {
    fail(ErrorCode::RangeError, "n_sites must be positive, got " + std::to_string(n_sites));
  }
  NeighborhoodGraph g;
  g.n_sites = n_sites;
  g.degrees.assign(static_cast<std::size_t>(n_sites), 0);
  g.edges.reserve(edges.size());

  std::set<std::pair<int, int>> seen;
  for (const auto& [a, b] : edges) {
    if (a < 0 || a >= n_sites || b < 0 || b >= n_sites) {
      fail(ErrorCode::IndexOutOfRange,
           "edge (" + std::to_string(a) + "," + std::to_string(b) + ") outside [0," +
               std::to_string(n_sites) + ")");
    }
    if (a == b) {
      fail(ErrorCode::SelfLoop, "site " + std::to_string(a) + " paired with itself");
    }
    const std::pair<int, int> e{std::min(a, b), std::max(a, b)};
    if (!seen.insert(e).second) {
      fail(ErrorCode::DuplicateEdge,
           "edge (" + std::to_string(e.first) + "," + std::to_string(e.second) +
               ") appears more than once");
    }
    g.edges.push_back(e);
    ++g.degrees[static_cast<std::size_t>(e.first)];
    ++g.degrees[static_cast<std::size_t>(e.second)];
  }

  // Connectivity via union-find.
  std::vector<int> parent(static_cast<std::size_t>(n_sites));
  for (int i = 0; i < n_sites; ++i) parent[static_cast<std::size_t>(i)] = i;
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (const auto& [a, b] : g.edges) {
    parent[static_cast<std::size_t>(find(a))] = find(b);
  }
  const int root = find(0);
  for (int i = 1; i < n_sites; ++i) {
    if (find(i) != root) {
      fail(ErrorCode::DisconnectedGraph,
           "site " + std::to_string(i) + " is not connected to site 0");
    }
  }
  return g;
}

double quadratic_form(const NeighborhoodGraph& graph, std::span<const double> phi) {
  if (static_cast<int>(phi.size()) != graph.n_sites) {
    fail(ErrorCode::LengthMismatch,
         "phi has length " + std::to_string(phi.size()) + ", graph has " +
             std::to_string(graph.n_sites) + " sites");
  }
  double acc = 0.0;
  for (const auto& [a, b] : graph.edges) {
    const double d = phi[static_cast<std::size_t>(a)] - phi[static_cast<std::size_t>(b)];
    acc += d * d;
  }
  return acc;
}

NeighborhoodGraph make_path_graph(int n_sites) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < n_sites; ++i) edges.emplace_back(i, i + 1);
  return build_graph(n_sites, edges);
}

NeighborhoodGraph make_grid_graph(int rows, int cols) {
  if (rows <= 0 || cols <= 0) {
    fail(ErrorCode::RangeError, "grid dimensions must be positive");
  }
  std::vector<std::pair<int, int>> edges;
  auto at = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) edges.emplace_back(at(r, c), at(r, c + 1));
      if (r + 1 < rows) edges.emplace_back(at(r, c), at(r + 1, c));
    }
  }
  return build_graph(rows * cols, edges);
}

}  // namespace spathmm
