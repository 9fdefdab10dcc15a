#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "latreg/geo.hpp"

namespace latreg {

/// Undirected edge between node indices, always stored with u < v.
struct GraphEdge {
  std::size_t u = 0;
  std::size_t v = 0;
  double weight = 0.0;
};

/// Adjacency of cells. Nodes are kept sorted by cell id so node index order
/// equals lexical cell order; every deterministic tie-break relies on that.
class ContiguityGraph {
 public:
  ContiguityGraph() = default;

  /// `cells` may come in any order; `edges` index into `cells` as given.
  /// Duplicate edges collapse, self-loops are rejected.
  ContiguityGraph(std::vector<CellId> cells,
                  std::span<const std::pair<std::size_t, std::size_t>> edges);

  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }
  const std::vector<CellId>& cells() const { return cells_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t node) const { return adjacency_[node]; }
  std::optional<std::size_t> index_of(const CellId& cell) const;
  bool adjacent(std::size_t a, std::size_t b) const;

  /// Per-node feature vectors (all the same dimension). Edge weights become
  /// the Euclidean distance between endpoint features.
  void set_features(std::vector<std::vector<double>> features);
  const std::vector<std::vector<double>>& features() const { return features_; }
  std::size_t feature_dim() const { return features_.empty() ? 0 : features_.front().size(); }

  /// Subgraph on the given node indices (features carried over).
  ContiguityGraph induced(std::span<const std::size_t> nodes) const;

  /// Component label per node, numbered in order of each component's lowest node.
  std::vector<std::size_t> component_labels() const;
  std::size_t component_count() const;

 private:
  std::vector<CellId> cells_;
  std::vector<GraphEdge> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<std::vector<double>> features_;
};

/// Hex mode: edges between present axial neighbours. Polygon mode: edges
/// between units sharing a boundary segment (rook) or any vertex (queen).
/// Throws EmptyCellSet.
ContiguityGraph build_contiguity(std::span<const CellId> cells, const Tessellation& tess,
                                 Contiguity mode = Contiguity::Rook);

}  // namespace latreg
