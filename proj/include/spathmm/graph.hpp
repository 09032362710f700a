#pragma once

#include <span>
#include <utility>
#include <vector>

namespace spathmm {

/// Site adjacency for the areal model. Edges are unordered, unique pairs of
/// distinct sites; the structure is immutable once built, so concurrent reads
/// from parallel chains are safe.
struct NeighborhoodGraph {
  int n_sites = 0;
  std::vector<std::pair<int, int>> edges;  // normalized a < b
  std::vector<int> degrees;
};

/// Validates and builds the neighborhood graph. Rejects self loops, duplicate
/// pairs, out-of-range indices, and disconnected graphs (an improper spatial
/// prior on a disconnected graph would need one constraint per component).
NeighborhoodGraph build_graph(int n_sites, std::span<const std::pair<int, int>> edges);

/// phi' (D - W) phi, evaluated as the sum over edges of squared differences.
/// The dense matrices are never formed.
double quadratic_form(const NeighborhoodGraph& graph, std::span<const double> phi);

/// Convenience builders for simulation scenarios and tests.
NeighborhoodGraph make_path_graph(int n_sites);
NeighborhoodGraph make_grid_graph(int rows, int cols);

}  // namespace spathmm
