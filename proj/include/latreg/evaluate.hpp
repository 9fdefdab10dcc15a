#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "latreg/graph.hpp"
#include "latreg/regionalize.hpp"

namespace latreg {

/// Chance-corrected pair agreement of two clusterings of the same cells.
/// Degenerate inputs where the expected and maximum index coincide return 1
/// for identical partitions and 0 otherwise. Throws CellSetMismatch.
double adjusted_rand_index(const Clustering& a, const Clustering& b);

struct AriMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;  // symmetric, unit diagonal
};

struct PairwiseAri {
  double median = 0.0;
  AriMatrix matrix;
};

enum class CellSetPolicy {
  RequireIdentical,  // mismatched cell sets throw CellSetMismatch
  Intersect,         // each pair is compared on the cells both contain
};

/// Median of a list; even sizes average the two middle values.
double median(std::vector<double> values);

/// ARI over every pair and the median of the off-diagonal entries. `labels`
/// name the rows (defaults to "0", "1", ...). Needs at least two clusterings.
PairwiseAri median_pairwise_ari(std::span<const Clustering> clusterings, std::vector<std::string> labels = {},
                                CellSetPolicy policy = CellSetPolicy::RequireIdentical);

/// First row and column carry the labels.
void write_ari_matrix_csv(std::ostream& out, const AriMatrix& matrix);

enum class SpatialWeights { Binary, RowStandardized };

struct MoransResult {
  double i = 0.0;
  double s0 = 0.0;
  double pseudo_p = 1.0;
  int n_permutations = 0;
};

inline constexpr int kDefaultPermutations = 999;

/// Global Moran's I over the contiguity graph. `values` are per graph node.
/// pseudo_p = (#{I_perm >= I} + 1) / (n_permutations + 1) from seeded
/// shuffles of the values. Throws TooFewCells and ConstantField.
MoransResult morans_i(std::span<const double> values, const ContiguityGraph& g,
                      int n_permutations = kDefaultPermutations, std::uint64_t seed = 0,
                      SpatialWeights weights = SpatialWeights::Binary);
MoransResult morans_i(const std::map<CellId, double>& values, const ContiguityGraph& g,
                      int n_permutations = kDefaultPermutations, std::uint64_t seed = 0,
                      SpatialWeights weights = SpatialWeights::Binary);

}  // namespace latreg
