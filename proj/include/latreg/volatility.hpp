#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "latreg/aggregate.hpp"
#include "latreg/graph.hpp"
#include "latreg/regionalize.hpp"

namespace latreg {

/// Block bootstrap with one cell per block: every cell independently draws
/// as many values as it holds, with replacement, from its own values.
/// Throws EmptyCell.
CellValues bootstrap_replicate(const CellValues& cell_values, std::uint64_t seed);

/// Relabels `replicate` so that its clusters take the reference labels they
/// overlap most (optimal one-to-one assignment on the contingency table).
/// Unmatched clusters get fresh labels after the reference's largest.
/// Throws CellSetMismatch.
Clustering align_labels(const Clustering& replicate, const Clustering& reference);

/// Minimum-cost perfect assignment on a square cost matrix; returns the
/// column chosen for each row.
std::vector<std::size_t> solve_assignment(const std::vector<std::vector<double>>& cost);

/// Fraction of unordered replicate pairs disagreeing on a cell, from the
/// per-label counts of that cell: 1 - sum f(f-1) / (B(B-1)).
double volatility_from_counts(std::span<const std::size_t> label_counts);

struct VolatilityOptions {
  int n_clusters = 7;
  std::size_t floor = 2;
  Objective objective = Objective::Ssd;
  Metric metric = Metric::P10;
  int replicates = 1000;
  std::uint64_t seed = 0;
  bool keep_replicate_labels = false;
};

struct VolatilityMap {
  std::vector<CellId> cells;       // graph node order
  std::vector<double> volatility;  // in [0, 1]
  int n_replicates = 0;
  Clustering reference;
  // replicate_labels[b][i]: aligned label of cells[i] in replicate b, kept
  // only when requested.
  std::vector<std::vector<int>> replicate_labels;
};

/// Bootstrap volatility of each cell's cluster assignment. `cell_values`
/// must hold values for every node of `topology`.
VolatilityMap volatility_map(const CellValues& cell_values, const ContiguityGraph& topology,
                             const VolatilityOptions& options = {});

/// Per-node features for a single metric; throws InvalidArgument when the
/// metric is undefined for a cell.
std::vector<std::vector<double>> metric_features(const CellValues& cell_values, const ContiguityGraph& topology,
                                                 Metric metric);

void write_volatility_csv(std::ostream& out, const VolatilityMap& map);

}  // namespace latreg
