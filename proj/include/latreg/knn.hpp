#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "latreg/geo.hpp"

namespace latreg {

struct Neighbor {
  std::size_t index = 0;  // position in the indexed point list
  double distance = 0.0;
};

/// Exact k-nearest-neighbour index over planar points. Results are ordered by
/// (distance, insertion index), so ties resolve to the earlier point.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::span<const PlanarPoint> points);

  std::size_t size() const { return points_.size(); }

  /// Throws KTooLarge when k exceeds the number of points.
  std::vector<Neighbor> nearest(PlanarPoint query, std::size_t k) const;

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double split = 0.0;
    std::uint8_t axis = 0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end, int depth);

  std::vector<PlanarPoint> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Reference linear scan with the same ordering contract as KdTree.
std::vector<Neighbor> knn_linear_scan(PlanarPoint query, std::span<const PlanarPoint> points, std::size_t k);

}  // namespace latreg
