#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "latreg/geo.hpp"
#include "latreg/graph.hpp"

namespace latreg {

/// Assignment of cells to clusters. `cells` is sorted; `labels` runs parallel.
struct Clustering {
  std::vector<CellId> cells;
  std::vector<int> labels;
  int n_clusters = 0;
  std::size_t floor = 1;

  std::optional<int> label_of(const CellId& cell) const;
  std::size_t size() const { return cells.size(); }
};

/// Sorts by cell and renumbers clusters 0..N-1 in order of their smallest cell.
Clustering canonicalize(std::vector<CellId> cells, std::vector<int> labels, std::size_t floor = 1);

/// Keeps only `cells` (which must all be present). The partition is kept and
/// labels are canonicalized again over the remaining cells.
Clustering restrict_to(const Clustering& c, std::span<const CellId> cells);

enum class Objective { Ssd, MaxEdgeWeight };

std::string_view to_string(Objective objective);
Objective parse_objective(std::string_view name);

/// Attaches feature vectors to a copy of `topology`. Multi-metric features are
/// z-scored per column across cells first; single metrics are used raw.
ContiguityGraph with_features(const ContiguityGraph& topology, std::vector<std::vector<double>> features);

/// Kruskal over (weight, u, v); one tree per connected component.
std::vector<GraphEdge> minimum_spanning_tree(const ContiguityGraph& g);

/// SKATER: prune the spanning forest one edge at a time until `n_clusters`
/// components exist, never creating a component smaller than `floor`.
/// Throws TooManyComponents and InfeasibleFloor.
Clustering skater_partition(const ContiguityGraph& g, int n_clusters, std::size_t floor = 1,
                            Objective objective = Objective::Ssd);

/// Throws NotAdjacent when the cells do not share an edge in `g`.
bool boundary_exists(const Clustering& c, const ContiguityGraph& g, const CellId& a, const CellId& b);
std::size_t boundary_edge_count(const Clustering& c, const ContiguityGraph& g);

/// Every cluster induces a connected subgraph of `g`.
bool clusters_connected(const Clustering& c, const ContiguityGraph& g);

/// Within-cluster sum of squared deviations of the graph features.
double total_ssd(const Clustering& c, const ContiguityGraph& g);

void write_clustering_csv(std::ostream& out, const Clustering& c);
/// "cell,label" rows; labels are canonicalized on read.
Clustering read_clustering_csv(std::istream& in);

}  // namespace latreg
