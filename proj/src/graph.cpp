#include "latreg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "latreg/error.hpp"

namespace latreg {

namespace {

using PointKey = std::pair<long long, long long>;

PointKey point_key(PlanarPoint p) { return {std::llround(p.x * 1e3), std::llround(p.y * 1e3)}; }

}  // namespace

ContiguityGraph::ContiguityGraph(std::vector<CellId> cells,
                                 std::span<const std::pair<std::size_t, std::size_t>> edges) {
  std::vector<std::size_t> order(cells.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cells[a] < cells[b]; });
  std::vector<std::size_t> rank(cells.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    rank[order[i]] = i;
    if (i > 0 && cells[order[i]] == cells[order[i - 1]]) {
      throw Error(ErrorCode::InvalidArgument, "duplicate cell " + format_cell(cells[order[i]]));
    }
  }
  cells_.reserve(cells.size());
  for (auto idx : order) cells_.push_back(std::move(cells[idx]));

  std::set<std::pair<std::size_t, std::size_t>> unique;
  for (const auto& [a, b] : edges) {
    if (a >= rank.size() || b >= rank.size()) {
      throw Error(ErrorCode::InvalidArgument, "edge endpoint out of range");
    }
    if (a == b) throw Error(ErrorCode::InvalidArgument, "self-loop on " + format_cell(cells_[rank[a]]));
    const auto u = std::min(rank[a], rank[b]);
    const auto v = std::max(rank[a], rank[b]);
    unique.emplace(u, v);
  }
  adjacency_.assign(cells_.size(), {});
  edges_.reserve(unique.size());
  for (const auto& [u, v] : unique) {
    edges_.push_back({u, v, 0.0});
    adjacency_[u].push_back(v);
    adjacency_[v].push_back(u);
  }
  for (auto& list : adjacency_) std::sort(list.begin(), list.end());
}

std::optional<std::size_t> ContiguityGraph::index_of(const CellId& cell) const {
  const auto it = std::lower_bound(cells_.begin(), cells_.end(), cell);
  if (it == cells_.end() || !(*it == cell)) return std::nullopt;
  return static_cast<std::size_t>(it - cells_.begin());
}

bool ContiguityGraph::adjacent(std::size_t a, std::size_t b) const {
  if (a >= size() || b >= size()) return false;
  const auto& list = adjacency_[a];
  return std::binary_search(list.begin(), list.end(), b);
}

void ContiguityGraph::set_features(std::vector<std::vector<double>> features) {
  if (features.size() != cells_.size()) {
    throw Error(ErrorCode::InvalidArgument, "feature count does not match node count");
  }
  const std::size_t dim = features.empty() ? 0 : features.front().size();
  for (const auto& f : features) {
    if (f.size() != dim || dim == 0) {
      throw Error(ErrorCode::InvalidArgument, "feature vectors must share a positive dimension");
    }
    for (double x : f) {
      if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "non-finite feature value");
    }
  }
  features_ = std::move(features);
  for (auto& e : edges_) {
    double sum = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = features_[e.u][k] - features_[e.v][k];
      sum += d * d;
    }
    e.weight = std::sqrt(sum);
  }
}

ContiguityGraph ContiguityGraph::induced(std::span<const std::size_t> nodes) const {
  std::vector<std::size_t> kept(nodes.begin(), nodes.end());
  std::sort(kept.begin(), kept.end());
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
  std::vector<std::size_t> remap(size(), SIZE_MAX);
  std::vector<CellId> cells;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    remap[kept[i]] = i;
    cells.push_back(cells_[kept[i]]);
  }
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& e : edges_) {
    if (remap[e.u] != SIZE_MAX && remap[e.v] != SIZE_MAX) edges.emplace_back(remap[e.u], remap[e.v]);
  }
  ContiguityGraph sub(std::move(cells), edges);
  if (!features_.empty()) {
    std::vector<std::vector<double>> f;
    f.reserve(kept.size());
    for (auto idx : kept) f.push_back(features_[idx]);
    sub.set_features(std::move(f));
  }
  return sub;
}

std::vector<std::size_t> ContiguityGraph::component_labels() const {
  std::vector<std::size_t> label(size(), SIZE_MAX);
  std::size_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < size(); ++start) {
    if (label[start] != SIZE_MAX) continue;
    label[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const auto node = stack.back();
      stack.pop_back();
      for (auto nb : adjacency_[node]) {
        if (label[nb] == SIZE_MAX) {
          label[nb] = next;
          stack.push_back(nb);
        }
      }
    }
    ++next;
  }
  return label;
}

std::size_t ContiguityGraph::component_count() const {
  const auto labels = component_labels();
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

ContiguityGraph build_contiguity(std::span<const CellId> cells, const Tessellation& tess, Contiguity mode) {
  if (cells.empty()) throw Error(ErrorCode::EmptyCellSet, "cannot build contiguity over no cells");
  std::vector<CellId> nodes(cells.begin(), cells.end());
  std::map<CellId, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) index.emplace(nodes[i], i);

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  if (tess.kind() == TessellationKind::Hex) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto* hex = std::get_if<HexCellId>(&nodes[i]);
      if (hex == nullptr) throw Error(ErrorCode::InvalidArgument, "polygon unit in a hex tessellation");
      for (const auto& nb : cell_neighbors(*hex)) {
        const auto it = index.find(CellId{nb});
        if (it != index.end() && i < it->second) edges.emplace_back(i, it->second);
      }
    }
    return ContiguityGraph(std::move(nodes), edges);
  }

  // Polygon units: bucket boundary segments (or vertices for queen) by key,
  // then connect every pair of distinct units sharing a bucket.
  std::map<std::pair<PointKey, PointKey>, std::vector<std::size_t>> by_segment;
  std::map<PointKey, std::vector<std::size_t>> by_vertex;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (const auto& ring : tess.cell_rings(nodes[i])) {
      for (std::size_t k = 0; k + 1 < ring.size(); ++k) {
        const auto a = point_key(ring[k]);
        const auto b = point_key(ring[k + 1]);
        if (mode == Contiguity::Queen) {
          by_vertex[a].push_back(i);
        } else if (!(a == b)) {
          by_segment[{std::min(a, b), std::max(a, b)}].push_back(i);
        }
      }
    }
  }
  auto connect = [&](std::vector<std::size_t>& owners) {
    std::sort(owners.begin(), owners.end());
    owners.erase(std::unique(owners.begin(), owners.end()), owners.end());
    for (std::size_t x = 0; x < owners.size(); ++x) {
      for (std::size_t y = x + 1; y < owners.size(); ++y) edges.emplace_back(owners[x], owners[y]);
    }
  };
  for (auto& [key, owners] : by_segment) connect(owners);
  for (auto& [key, owners] : by_vertex) connect(owners);
  return ContiguityGraph(std::move(nodes), edges);
}

}  // namespace latreg
