#include "latreg/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "latreg/csv.hpp"
#include "latreg/error.hpp"
#include "latreg/parallel.hpp"
#include "latreg/rng.hpp"

namespace latreg {

namespace {

std::int64_t choose2(std::int64_t n) { return n * (n - 1) / 2; }

double morans_statistic(std::span<const double> z, const ContiguityGraph& g, SpatialWeights weights,
                        double denominator, double s0) {
  double num = 0.0;
  if (weights == SpatialWeights::Binary) {
    for (const auto& e : g.edges()) num += 2.0 * z[e.u] * z[e.v];
  } else {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto& nbs = g.neighbors(i);
      if (nbs.empty()) continue;
      double local = 0.0;
      for (auto j : nbs) local += z[j];
      num += z[i] * local / static_cast<double>(nbs.size());
    }
  }
  return static_cast<double>(g.size()) / s0 * num / denominator;
}

}  // namespace

double adjusted_rand_index(const Clustering& a, const Clustering& b) {
  if (a.cells != b.cells) throw Error(ErrorCode::CellSetMismatch, "clusterings cover different cells");
  std::map<std::pair<int, int>, std::int64_t> table;
  std::map<int, std::int64_t> rows, cols;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    ++table[{a.labels[i], b.labels[i]}];
    ++rows[a.labels[i]];
    ++cols[b.labels[i]];
  }
  // Pair counts are integers; scaling (Index - Expected) / (Max - Expected)
  // by 2 * C(n, 2) keeps both sides integral, so the only rounding is the
  // final division.
  using Wide = __int128;
  Wide index = 0, sum_a = 0, sum_b = 0;
  for (const auto& [key, count] : table) index += choose2(count);
  for (const auto& [key, count] : rows) sum_a += choose2(count);
  for (const auto& [key, count] : cols) sum_b += choose2(count);
  const Wide total = choose2(static_cast<std::int64_t>(a.cells.size()));
  const Wide num = 2 * (index * total - sum_a * sum_b);
  const Wide den = (sum_a + sum_b) * total - 2 * sum_a * sum_b;
  if (den == 0) {
    // Identical partitions have a one-to-one contingency table.
    const bool identical = table.size() == rows.size() && table.size() == cols.size();
    return identical ? 1.0 : 0.0;
  }
  return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyValues, "median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

PairwiseAri median_pairwise_ari(std::span<const Clustering> clusterings, std::vector<std::string> labels,
                                CellSetPolicy policy) {
  const std::size_t m = clusterings.size();
  if (m < 2) throw Error(ErrorCode::InvalidArgument, "pairwise ARI needs at least two clusterings");
  if (labels.empty()) {
    for (std::size_t i = 0; i < m; ++i) labels.push_back(std::to_string(i));
  }
  if (labels.size() != m) throw Error(ErrorCode::InvalidArgument, "label count does not match clusterings");

  PairwiseAri out;
  out.matrix.labels = std::move(labels);
  out.matrix.values.assign(m, std::vector<double>(m, 1.0));
  std::vector<double> upper;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      double ari = 0.0;
      if (policy == CellSetPolicy::Intersect && clusterings[i].cells != clusterings[j].cells) {
        std::vector<CellId> common;
        std::set_intersection(clusterings[i].cells.begin(), clusterings[i].cells.end(), clusterings[j].cells.begin(),
                              clusterings[j].cells.end(), std::back_inserter(common));
        if (common.empty()) throw Error(ErrorCode::CellSetMismatch, "clusterings share no cells");
        ari = adjusted_rand_index(restrict_to(clusterings[i], common), restrict_to(clusterings[j], common));
      } else {
        ari = adjusted_rand_index(clusterings[i], clusterings[j]);
      }
      out.matrix.values[i][j] = ari;
      out.matrix.values[j][i] = ari;
      upper.push_back(ari);
    }
  }
  out.median = median(std::move(upper));
  return out;
}

void write_ari_matrix_csv(std::ostream& out, const AriMatrix& matrix) {
  std::vector<std::string> header{""};
  header.insert(header.end(), matrix.labels.begin(), matrix.labels.end());
  csv::write_record(out, header);
  for (std::size_t i = 0; i < matrix.labels.size(); ++i) {
    std::vector<std::string> row{matrix.labels[i]};
    for (double v : matrix.values[i]) row.push_back(csv::format_number(v));
    csv::write_record(out, row);
  }
}

MoransResult morans_i(std::span<const double> values, const ContiguityGraph& g, int n_permutations,
                      std::uint64_t seed, SpatialWeights weights) {
  const std::size_t n = g.size();
  if (values.size() != n) throw Error(ErrorCode::InvalidArgument, "one value per graph node required");
  if (n < 2) throw Error(ErrorCode::TooFewCells, "Moran's I needs at least two cells");
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    throw Error(ErrorCode::ConstantField, "all values are equal");
  }
  if (n_permutations < 0) throw Error(ErrorCode::InvalidArgument, "negative permutation count");

  double s0 = 0.0;
  if (weights == SpatialWeights::Binary) {
    s0 = 2.0 * static_cast<double>(g.edges().size());
  } else {
    for (std::size_t i = 0; i < n; ++i) s0 += g.neighbors(i).empty() ? 0.0 : 1.0;
  }
  if (s0 == 0.0) throw Error(ErrorCode::InvalidArgument, "graph has no edges");

  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> z(n);
  double denominator = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = values[i] - mean;
    denominator += z[i] * z[i];
  }

  MoransResult result;
  result.s0 = s0;
  result.n_permutations = n_permutations;
  result.i = morans_statistic(z, g, weights, denominator, s0);

  std::vector<std::uint8_t> at_least(static_cast<std::size_t>(n_permutations), 0);
  parallel_for(at_least.size(), [&](std::size_t p) {
    Rng rng(mix_seed(seed, p));
    std::vector<double> shuffled = z;
    shuffle(std::span<double>(shuffled), rng);
    at_least[p] = morans_statistic(shuffled, g, weights, denominator, s0) >= result.i ? 1 : 0;
  });
  const auto count = std::count(at_least.begin(), at_least.end(), std::uint8_t{1});
  result.pseudo_p = static_cast<double>(count + 1) / static_cast<double>(n_permutations + 1);
  return result;
}

MoransResult morans_i(const std::map<CellId, double>& values, const ContiguityGraph& g, int n_permutations,
                      std::uint64_t seed, SpatialWeights weights) {
  std::vector<double> per_node;
  per_node.reserve(g.size());
  for (const auto& cell : g.cells()) {
    const auto it = values.find(cell);
    if (it == values.end()) throw Error(ErrorCode::CellSetMismatch, "no value for " + format_cell(cell));
    per_node.push_back(it->second);
  }
  return morans_i(per_node, g, n_permutations, seed, weights);
}

}  // namespace latreg
