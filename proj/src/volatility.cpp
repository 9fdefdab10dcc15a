#include "latreg/volatility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "latreg/csv.hpp"
#include "latreg/error.hpp"
#include "latreg/parallel.hpp"
#include "latreg/rng.hpp"

namespace latreg {

CellValues bootstrap_replicate(const CellValues& cell_values, std::uint64_t seed) {
  Rng rng(seed);
  CellValues out;
  for (const auto& [cell, values] : cell_values) {
    if (values.empty()) throw Error(ErrorCode::EmptyCell, "cell " + format_cell(cell) + " has no values");
    std::vector<double> draw(values.size());
    for (auto& v : draw) v = values[static_cast<std::size_t>(uniform_below(rng, values.size()))];
    out.emplace_hint(out.end(), cell, std::move(draw));
  }
  return out;
}

std::vector<std::size_t> solve_assignment(const std::vector<std::vector<double>>& cost) {
  // Kuhn-Munkres with potentials, O(n^3). Rows and columns are 1-based inside.
  const std::size_t n = cost.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t row = 1; row <= n; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[col0] = true;
      const std::size_t r = match[col0];
      double delta = kInf;
      std::size_t col1 = 0;
      for (std::size_t col = 1; col <= n; ++col) {
        if (used[col]) continue;
        const double cur = cost[r - 1][col - 1] - u[r] - v[col];
        if (cur < minv[col]) {
          minv[col] = cur;
          way[col] = col0;
        }
        if (minv[col] < delta) {
          delta = minv[col];
          col1 = col;
        }
      }
      for (std::size_t col = 0; col <= n; ++col) {
        if (used[col]) {
          u[match[col]] += delta;
          v[col] -= delta;
        } else {
          minv[col] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t col = 1; col <= n; ++col) {
    if (match[col] != 0) assignment[match[col] - 1] = col - 1;
  }
  return assignment;
}

Clustering align_labels(const Clustering& replicate, const Clustering& reference) {
  if (replicate.cells != reference.cells) {
    throw Error(ErrorCode::CellSetMismatch, "replicate and reference cover different cells");
  }
  std::vector<int> rep_labels(replicate.labels);
  std::sort(rep_labels.begin(), rep_labels.end());
  rep_labels.erase(std::unique(rep_labels.begin(), rep_labels.end()), rep_labels.end());
  std::vector<int> ref_labels(reference.labels);
  std::sort(ref_labels.begin(), ref_labels.end());
  ref_labels.erase(std::unique(ref_labels.begin(), ref_labels.end()), ref_labels.end());

  auto position = [](const std::vector<int>& sorted, int label) {
    return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), label) - sorted.begin());
  };
  const std::size_t size = std::max(rep_labels.size(), ref_labels.size());
  std::vector<std::vector<double>> cost(size, std::vector<double>(size, 0.0));
  for (std::size_t i = 0; i < replicate.cells.size(); ++i) {
    cost[position(rep_labels, replicate.labels[i])][position(ref_labels, reference.labels[i])] -= 1.0;
  }
  const auto assignment = solve_assignment(cost);

  std::map<int, int> relabel;
  int fresh = ref_labels.empty() ? 0 : ref_labels.back() + 1;
  for (std::size_t r = 0; r < rep_labels.size(); ++r) {
    const std::size_t col = assignment[r];
    relabel[rep_labels[r]] = col < ref_labels.size() ? ref_labels[col] : fresh++;
  }
  Clustering out = replicate;
  for (auto& l : out.labels) l = relabel.at(l);
  return out;
}

double volatility_from_counts(std::span<const std::size_t> label_counts) {
  std::size_t total = 0;
  for (auto f : label_counts) total += f;
  if (total < 2) return 0.0;
  double agree = 0.0;
  for (auto f : label_counts) agree += static_cast<double>(f) * static_cast<double>(f > 0 ? f - 1 : 0);
  const double b = static_cast<double>(total);
  return 1.0 - agree / (b * (b - 1.0));
}

std::vector<std::vector<double>> metric_features(const CellValues& cell_values, const ContiguityGraph& topology,
                                                 Metric metric) {
  std::vector<std::vector<double>> features;
  features.reserve(topology.size());
  for (const auto& cell : topology.cells()) {
    const auto it = cell_values.find(cell);
    if (it == cell_values.end() || it->second.empty()) {
      throw Error(ErrorCode::EmptyCell, "no values for cell " + format_cell(cell));
    }
    const auto value = metric_value(summarize_cell(cell, it->second), metric);
    if (!value) {
      throw Error(ErrorCode::InvalidArgument,
                  std::string(to_string(metric)) + " undefined for cell " + format_cell(cell));
    }
    features.push_back({*value});
  }
  return features;
}

VolatilityMap volatility_map(const CellValues& cell_values, const ContiguityGraph& topology,
                             const VolatilityOptions& options) {
  if (options.replicates < 1) throw Error(ErrorCode::InvalidArgument, "replicates must be >= 1");
  const auto reference_graph = with_features(topology, metric_features(cell_values, topology, options.metric));
  VolatilityMap out;
  out.cells = topology.cells();
  out.n_replicates = options.replicates;
  out.reference = skater_partition(reference_graph, options.n_clusters, options.floor, options.objective);

  const auto replicates = static_cast<std::size_t>(options.replicates);
  std::vector<std::vector<int>> labels(replicates);
  parallel_for(replicates, [&](std::size_t b) {
    const auto sample = bootstrap_replicate(cell_values, mix_seed(options.seed, b));
    const auto g = with_features(topology, metric_features(sample, topology, options.metric));
    const auto clustering = skater_partition(g, options.n_clusters, options.floor, options.objective);
    labels[b] = align_labels(clustering, out.reference).labels;
  });

  out.volatility.resize(out.cells.size());
  for (std::size_t i = 0; i < out.cells.size(); ++i) {
    std::map<int, std::size_t> counts;
    for (const auto& rep : labels) ++counts[rep[i]];
    std::vector<std::size_t> f;
    for (const auto& [label, count] : counts) f.push_back(count);
    out.volatility[i] = volatility_from_counts(f);
  }
  if (options.keep_replicate_labels) out.replicate_labels = std::move(labels);
  return out;
}

void write_volatility_csv(std::ostream& out, const VolatilityMap& map) {
  out << "cell,volatility\n";
  for (std::size_t i = 0; i < map.cells.size(); ++i) {
    csv::write_record(out, {format_cell(map.cells[i]), csv::format_number(map.volatility[i])});
  }
}

}  // namespace latreg
