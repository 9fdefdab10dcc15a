#pragma once

// Independent reference implementations and fixtures shared by the unit
// tests and the acceptance runner. Oracles here are deliberately naive.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "latreg/geo.hpp"
#include "latreg/graph.hpp"
#include "latreg/regionalize.hpp"
#include "latreg/synth.hpp"

namespace oracle {

using latreg::CellId;
using latreg::HexCellId;

// ARI by walking all n(n-1)/2 pairs.
inline double pair_counting_ari(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j];
      const bool sb = b[i] == b[j];
      if (sa && sb) ++n11;
      else if (sa) ++n10;
      else if (sb) ++n01;
      else ++n00;
    }
  }
  const double pairs = n11 + n10 + n01 + n00;
  const double index = n11;
  const double expected = (n11 + n10) * (n11 + n01) / pairs;
  const double max = ((n11 + n10) + (n11 + n01)) / 2.0;
  if (max == expected) {
    // Same partition up to relabelling iff no pair disagrees.
    return (n10 == 0 && n01 == 0) ? 1.0 : 0.0;
  }
  return (index - expected) / (max - expected);
}

struct WeightedEdge {
  std::size_t u, v;
  double w;
};

inline bool spans(std::size_t n, const std::vector<WeightedEdge>& edges, const std::vector<std::size_t>& pick) {
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x];
    return x;
  };
  for (auto i : pick) {
    const auto a = find(edges[i].u);
    const auto b = find(edges[i].v);
    if (a == b) return false;
    parent[a] = b;
  }
  return true;
}

// Minimum spanning tree weight over every (n-1)-subset of edges.
inline double exhaustive_mst_weight(std::size_t n, const std::vector<WeightedEdge>& edges) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t m = edges.size();
  std::vector<bool> choose(m, false);
  std::fill(choose.begin(), choose.begin() + static_cast<long>(n - 1), true);
  do {
    std::vector<std::size_t> pick;
    double w = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (choose[i]) {
        pick.push_back(i);
        w += edges[i].w;
      }
    }
    if (spans(n, edges, pick)) best = std::min(best, w);
  } while (std::prev_permutation(choose.begin(), choose.end()));
  return best;
}

inline double ssd(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double s = 0.0;
  for (double v : values) s += (v - mean) * (v - mean);
  return s;
}

// Lowest total SSD over single tree-edge removals leaving both sides >= floor.
inline double best_single_cut_ssd(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& tree,
                                  const std::vector<double>& x, std::size_t floor) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t cut = 0; cut < tree.size(); ++cut) {
    std::vector<int> side(n, -1);
    side[0] = 0;
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t e = 0; e < tree.size(); ++e) {
        if (e == cut) continue;
        auto [a, b] = tree[e];
        if (side[a] == 0 && side[b] != 0) side[b] = 0, changed = true;
        if (side[b] == 0 && side[a] != 0) side[a] = 0, changed = true;
      }
    }
    std::vector<double> left, right;
    for (std::size_t i = 0; i < n; ++i) (side[i] == 0 ? left : right).push_back(x[i]);
    if (left.size() < floor || right.size() < floor) continue;
    best = std::min(best, ssd(left) + ssd(right));
  }
  return best;
}

// V_i from the literal definition: fraction of ordered replicate pairs that
// disagree on cell i.
inline double literal_volatility(const std::vector<std::vector<int>>& labels, std::size_t cell) {
  const std::size_t B = labels.size();
  if (B < 2) return 0.0;
  double disagree = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < B; ++c) {
      if (b != c && labels[b][cell] != labels[c][cell]) disagree += 1.0;
    }
  }
  return disagree / static_cast<double>(B * (B - 1));
}

}  // namespace oracle

namespace fixture {

using latreg::CellId;
using latreg::HexCellId;

// Connected hexagon patch grown from (0,0) by random frontier picks.
inline std::vector<CellId> random_hex_patch(std::mt19937_64& rng, std::size_t size) {
  std::set<HexCellId> patch{{0, 0}};
  std::vector<HexCellId> order{{0, 0}};
  while (patch.size() < size) {
    const auto& from = order[std::uniform_int_distribution<std::size_t>(0, order.size() - 1)(rng)];
    const auto nbs = latreg::cell_neighbors(from);
    const auto nb = nbs[std::uniform_int_distribution<std::size_t>(0, 5)(rng)];
    if (patch.insert(nb).second) order.push_back(nb);
  }
  return {patch.begin(), patch.end()};
}

inline latreg::ContiguityGraph hex_graph(const std::vector<CellId>& cells) {
  return latreg::build_contiguity(cells, latreg::Tessellation::hex(latreg::kDefaultHexEdgeM, {0.0, 0.0}));
}

inline std::vector<std::vector<double>> scalar_features(const std::vector<double>& x) {
  std::vector<std::vector<double>> f;
  for (double v : x) f.push_back({v});
  return f;
}

// Irregular polygon units: hexagons covering `bounds` grouped into random
// connected blobs of 1..max_size cells, each blob outlined as one unit.
inline std::vector<latreg::PolygonUnit> merged_hex_units(const latreg::GridBounds& bounds, double edge,
                                                         std::size_t max_size, std::uint64_t seed) {
  using latreg::HexCellId;
  std::set<HexCellId> cover;
  const double step_y = 1.5 * edge;
  const double step_x = std::sqrt(3.0) * edge;
  for (double y = bounds.min_y - step_y; y <= bounds.max_y + step_y; y += step_y / 2) {
    for (double x = bounds.min_x - step_x; x <= bounds.max_x + step_x; x += step_x / 2) {
      cover.insert(latreg::hex_cell_at({x, y}, edge));
    }
  }
  std::mt19937_64 rng(seed);
  std::set<HexCellId> free(cover.begin(), cover.end());
  std::vector<latreg::PolygonUnit> units;
  for (const auto& start : cover) {
    if (!free.count(start)) continue;
    const auto target = std::uniform_int_distribution<std::size_t>(1, max_size)(rng);
    std::vector<HexCellId> blob{start};
    free.erase(start);
    for (std::size_t tries = 0; blob.size() < target && tries < 32; ++tries) {
      const auto& from = blob[std::uniform_int_distribution<std::size_t>(0, blob.size() - 1)(rng)];
      const auto nb = latreg::cell_neighbors(from)[std::uniform_int_distribution<std::size_t>(0, 5)(rng)];
      if (free.erase(nb)) blob.push_back(nb);
    }
    latreg::PolygonUnit unit;
    unit.id = "u" + std::to_string(units.size());
    unit.rings = latreg::merge_hex_outline(blob, edge);
    units.push_back(std::move(unit));
  }
  return units;
}

// Planted label of each cell: region of the cell's centre.
inline latreg::Clustering planted_labels(const latreg::PlantedScenario& s, const latreg::Tessellation& tess,
                                         const std::vector<CellId>& cells) {
  std::vector<int> labels;
  for (const auto& c : cells) labels.push_back(static_cast<int>(latreg::planted_region(s, tess.cell_center(c))));
  return latreg::canonicalize(cells, labels);
}

}  // namespace fixture
