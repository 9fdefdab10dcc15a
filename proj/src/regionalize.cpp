#include "latreg/regionalize.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <istream>
#include <ostream>
#include <string>

#include "latreg/csv.hpp"
#include "latreg/error.hpp"

namespace latreg {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

struct Split {
  bool found = false;
  double score = 0.0;
  std::size_t u = 0;  // tree edge, u < v
  std::size_t v = 0;
  std::size_t child = 0;  // root of the side that becomes a new cluster
  std::size_t cluster = 0;
};

bool better(const Split& cand, const Split& best) {
  if (!best.found) return true;
  if (cand.score != best.score) return cand.score > best.score;
  return std::make_pair(cand.u, cand.v) < std::make_pair(best.u, best.v);
}

}  // namespace

std::optional<int> Clustering::label_of(const CellId& cell) const {
  const auto it = std::lower_bound(cells.begin(), cells.end(), cell);
  if (it == cells.end() || !(*it == cell)) return std::nullopt;
  return labels[static_cast<std::size_t>(it - cells.begin())];
}

Clustering canonicalize(std::vector<CellId> cells, std::vector<int> labels, std::size_t floor) {
  if (cells.size() != labels.size()) throw Error(ErrorCode::InvalidArgument, "cells and labels differ in length");
  std::vector<std::size_t> order(cells.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cells[a] < cells[b]; });
  Clustering out;
  out.floor = floor;
  std::map<int, int> renumber;
  for (auto idx : order) {
    const auto [it, inserted] = renumber.try_emplace(labels[idx], static_cast<int>(renumber.size()));
    out.cells.push_back(std::move(cells[idx]));
    out.labels.push_back(it->second);
  }
  for (std::size_t i = 1; i < out.cells.size(); ++i) {
    if (out.cells[i] == out.cells[i - 1]) {
      throw Error(ErrorCode::InvalidArgument, "duplicate cell " + format_cell(out.cells[i]));
    }
  }
  out.n_clusters = static_cast<int>(renumber.size());
  return out;
}

Clustering restrict_to(const Clustering& c, std::span<const CellId> cells) {
  std::vector<CellId> kept;
  std::vector<int> labels;
  for (const auto& cell : cells) {
    const auto label = c.label_of(cell);
    if (!label) throw Error(ErrorCode::CellSetMismatch, "cell " + format_cell(cell) + " not in clustering");
    kept.push_back(cell);
    labels.push_back(*label);
  }
  return canonicalize(std::move(kept), std::move(labels), c.floor);
}

std::string_view to_string(Objective objective) {
  return objective == Objective::Ssd ? "ssd" : "max-edge-weight";
}

Objective parse_objective(std::string_view name) {
  if (name == "ssd") return Objective::Ssd;
  if (name == "max-edge-weight" || name == "max_edge_weight") return Objective::MaxEdgeWeight;
  throw Error(ErrorCode::InvalidArgument, "unknown objective '" + std::string(name) + "'");
}

ContiguityGraph with_features(const ContiguityGraph& topology, std::vector<std::vector<double>> features) {
  ContiguityGraph g = topology;
  if (!features.empty() && features.front().size() > 1) {
    const std::size_t dim = features.front().size();
    const auto n = static_cast<double>(features.size());
    for (std::size_t k = 0; k < dim; ++k) {
      double mean = 0.0;
      for (const auto& f : features) mean += f.at(k);
      mean /= n;
      double var = 0.0;
      for (const auto& f : features) var += (f[k] - mean) * (f[k] - mean);
      const double sd = std::sqrt(var / n);
      for (auto& f : features) f[k] = sd > 0.0 ? (f[k] - mean) / sd : 0.0;
    }
  }
  g.set_features(std::move(features));
  return g;
}

std::vector<GraphEdge> minimum_spanning_tree(const ContiguityGraph& g) {
  if (g.empty()) throw Error(ErrorCode::EmptyCellSet, "spanning tree of an empty graph");
  std::vector<GraphEdge> edges = g.edges();
  std::sort(edges.begin(), edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
    if (a.weight != b.weight) return a.weight < b.weight;
    return std::make_pair(a.u, a.v) < std::make_pair(b.u, b.v);
  });
  DisjointSets sets(g.size());
  std::vector<GraphEdge> tree;
  for (const auto& e : edges) {
    if (sets.unite(e.u, e.v)) tree.push_back(e);
  }
  return tree;
}

Clustering skater_partition(const ContiguityGraph& g, int n_clusters, std::size_t floor, Objective objective) {
  const std::size_t n = g.size();
  if (n == 0) throw Error(ErrorCode::EmptyCellSet, "cannot partition an empty graph");
  if (n_clusters < 1) throw Error(ErrorCode::InvalidArgument, "n_clusters must be >= 1");
  if (floor < 1) throw Error(ErrorCode::InvalidArgument, "floor must be >= 1");
  if (g.feature_dim() == 0) throw Error(ErrorCode::InvalidArgument, "graph has no features");
  const auto target = static_cast<std::size_t>(n_clusters);
  const auto components = g.component_labels();
  const std::size_t n_components = *std::max_element(components.begin(), components.end()) + 1;
  if (n_components > target) {
    throw Error(ErrorCode::TooManyComponents, std::to_string(n_components) + " components exceed " +
                                                  std::to_string(n_clusters) + " clusters");
  }
  if (target * floor > n) {
    throw Error(ErrorCode::InfeasibleFloor, std::to_string(n_clusters) + " clusters of at least " +
                                                std::to_string(floor) + " cells need more than " +
                                                std::to_string(n) + " cells");
  }

  std::vector<std::size_t> cluster = components;
  std::vector<std::size_t> sizes(n_components, 0);
  for (auto c : cluster) ++sizes[c];
  for (std::size_t c = 0; c < n_components; ++c) {
    if (sizes[c] < floor) {
      throw Error(ErrorCode::InfeasibleFloor, "a disconnected component has fewer than " + std::to_string(floor) +
                                                  " cells");
    }
  }

  std::vector<std::vector<std::pair<std::size_t, double>>> tree(n);
  for (const auto& e : minimum_spanning_tree(g)) {
    tree[e.u].emplace_back(e.v, e.weight);
    tree[e.v].emplace_back(e.u, e.weight);
  }

  const auto& features = g.features();
  const std::size_t dim = g.feature_dim();
  std::size_t n_current = n_components;
  std::vector<std::size_t> parent(n), order, subtree_size(n);
  std::vector<double> parent_weight(n);
  std::vector<std::vector<double>> subtree_sum(n, std::vector<double>(dim));
  std::vector<double> mean(dim);

  while (n_current < target) {
    Split best;
    for (std::size_t c = 0; c < n_current; ++c) {
      // Root each cluster's tree at its smallest node and order it parent-first.
      std::size_t root = n;
      std::size_t count = 0;
      std::fill(mean.begin(), mean.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (cluster[i] != c) continue;
        if (root == n) root = i;
        ++count;
        for (std::size_t k = 0; k < dim; ++k) mean[k] += features[i][k];
      }
      if (count < 2 * floor) continue;
      for (auto& m : mean) m /= static_cast<double>(count);

      order.clear();
      order.push_back(root);
      parent[root] = n;
      for (std::size_t head = 0; head < order.size(); ++head) {
        const auto node = order[head];
        for (const auto& [next, w] : tree[node]) {
          if (next == parent[node]) continue;
          parent[next] = node;
          parent_weight[next] = w;
          order.push_back(next);
        }
      }
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const auto node = *it;
        subtree_size[node] = 1;
        for (std::size_t k = 0; k < dim; ++k) subtree_sum[node][k] = features[node][k] - mean[k];
        for (const auto& [next, w] : tree[node]) {
          if (next == parent[node]) continue;
          subtree_size[node] += subtree_size[next];
          for (std::size_t k = 0; k < dim; ++k) subtree_sum[node][k] += subtree_sum[next][k];
        }
      }
      for (std::size_t idx = 1; idx < order.size(); ++idx) {
        const auto child = order[idx];
        const std::size_t inner = subtree_size[child];
        const std::size_t outer = count - inner;
        if (inner < floor || outer < floor) continue;
        Split cand;
        cand.found = true;
        cand.u = std::min(child, parent[child]);
        cand.v = std::max(child, parent[child]);
        cand.child = child;
        cand.cluster = c;
        if (objective == Objective::Ssd) {
          // With deviations from the cluster mean, the SSD decrease of a cut is
          // |sum_inner|^2 * (1/inner + 1/outer).
          double norm2 = 0.0;
          for (std::size_t k = 0; k < dim; ++k) norm2 += subtree_sum[child][k] * subtree_sum[child][k];
          cand.score = norm2 * (1.0 / static_cast<double>(inner) + 1.0 / static_cast<double>(outer));
        } else {
          cand.score = parent_weight[child];
        }
        if (better(cand, best)) best = cand;
      }
    }
    if (!best.found) {
      throw Error(ErrorCode::InfeasibleFloor, "no split keeps every cluster at >= " + std::to_string(floor) +
                                                  " cells before reaching " + std::to_string(n_clusters) +
                                                  " clusters");
    }
    // Detach the child's side of the cut edge into a new cluster.
    auto drop = [&](std::size_t a, std::size_t b) {
      auto& list = tree[a];
      list.erase(std::find_if(list.begin(), list.end(), [&](const auto& entry) { return entry.first == b; }));
    };
    drop(best.u, best.v);
    drop(best.v, best.u);
    std::vector<std::size_t> stack{best.child};
    cluster[best.child] = n_current;
    while (!stack.empty()) {
      const auto node = stack.back();
      stack.pop_back();
      for (const auto& [next, w] : tree[node]) {
        if (cluster[next] != n_current) {
          cluster[next] = n_current;
          stack.push_back(next);
        }
      }
    }
    ++n_current;
  }

  std::vector<int> labels(cluster.begin(), cluster.end());
  return canonicalize(g.cells(), std::move(labels), floor);
}

bool boundary_exists(const Clustering& c, const ContiguityGraph& g, const CellId& a, const CellId& b) {
  const auto ia = g.index_of(a);
  const auto ib = g.index_of(b);
  if (!ia || !ib || !g.adjacent(*ia, *ib)) {
    throw Error(ErrorCode::NotAdjacent, format_cell(a) + " and " + format_cell(b) + " are not adjacent");
  }
  const auto la = c.label_of(a);
  const auto lb = c.label_of(b);
  if (!la || !lb) throw Error(ErrorCode::CellSetMismatch, "cell missing from clustering");
  return *la != *lb;
}

std::size_t boundary_edge_count(const Clustering& c, const ContiguityGraph& g) {
  std::size_t count = 0;
  for (const auto& e : g.edges()) {
    if (boundary_exists(c, g, g.cells()[e.u], g.cells()[e.v])) ++count;
  }
  return count;
}

bool clusters_connected(const Clustering& c, const ContiguityGraph& g) {
  std::vector<int> label(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto l = c.label_of(g.cells()[i]);
    if (!l) return false;
    label[i] = *l;
  }
  std::vector<bool> seen_label(static_cast<std::size_t>(c.n_clusters), false);
  std::vector<bool> visited(g.size(), false);
  for (std::size_t start = 0; start < g.size(); ++start) {
    if (visited[start]) continue;
    const auto l = static_cast<std::size_t>(label[start]);
    if (seen_label[l]) return false;  // second disjoint piece of the same cluster
    seen_label[l] = true;
    std::vector<std::size_t> stack{start};
    visited[start] = true;
    while (!stack.empty()) {
      const auto node = stack.back();
      stack.pop_back();
      for (auto nb : g.neighbors(node)) {
        if (!visited[nb] && label[nb] == label[start]) {
          visited[nb] = true;
          stack.push_back(nb);
        }
      }
    }
  }
  return true;
}

double total_ssd(const Clustering& c, const ContiguityGraph& g) {
  const std::size_t dim = g.feature_dim();
  const auto k = static_cast<std::size_t>(c.n_clusters);
  std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> counts(k, 0);
  std::vector<int> label(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    label[i] = c.label_of(g.cells()[i]).value();
    ++counts[static_cast<std::size_t>(label[i])];
    for (std::size_t d = 0; d < dim; ++d) sums[static_cast<std::size_t>(label[i])][d] += g.features()[i][d];
  }
  double ssd = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto l = static_cast<std::size_t>(label[i]);
    for (std::size_t d = 0; d < dim; ++d) {
      const double dev = g.features()[i][d] - sums[l][d] / static_cast<double>(counts[l]);
      ssd += dev * dev;
    }
  }
  return ssd;
}

void write_clustering_csv(std::ostream& out, const Clustering& c) {
  out << "cell,label\n";
  for (std::size_t i = 0; i < c.cells.size(); ++i) {
    csv::write_record(out, {format_cell(c.cells[i]), std::to_string(c.labels[i])});
  }
}

Clustering read_clustering_csv(std::istream& in) {
  std::size_t line = 0;
  const auto header = csv::read_record(in, line);
  if (!header || header->size() < 2 || (*header)[0] != "cell" || (*header)[1] != "label") {
    throw Error(ErrorCode::MissingColumn, "expected a 'cell,label' header");
  }
  std::vector<CellId> cells;
  std::vector<int> labels;
  while (const auto row = csv::read_record(in, line)) {
    if (row->size() == 1 && row->front().empty()) continue;
    if (row->size() < 2) throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line) + ": missing label");
    cells.push_back(parse_cell((*row)[0]));
    try {
      labels.push_back(std::stoi((*row)[1]));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line) + ": bad label");
    }
  }
  return canonicalize(std::move(cells), std::move(labels));
}

}  // namespace latreg
