#include "latreg/knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include "latreg/error.hpp"

namespace latreg {

namespace {

constexpr std::uint32_t kLeafSize = 8;

struct Candidate {
  double d2;
  std::size_t index;
  friend bool operator<(const Candidate& a, const Candidate& b) {
    return a.d2 < b.d2 || (a.d2 == b.d2 && a.index < b.index);
  }
};

double squared(PlanarPoint a, PlanarPoint b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

void check_k(std::size_t k, std::size_t n) {
  if (k > n) {
    throw Error(ErrorCode::KTooLarge, "k=" + std::to_string(k) + " exceeds " + std::to_string(n) + " points");
  }
}

}  // namespace

KdTree::KdTree(std::span<const PlanarPoint> points) : points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()), 0);
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end, int depth) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end, -1, -1, 0.0, 0});
  if (end - begin <= kLeafSize) return id;

  double min_x = HUGE_VAL, max_x = -HUGE_VAL, min_y = HUGE_VAL, max_y = -HUGE_VAL;
  for (auto i = begin; i < end; ++i) {
    const auto& p = points_[order_[i]];
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const std::uint8_t axis = (max_x - min_x) >= (max_y - min_y) ? 0 : 1;
  if (max_x == min_x && max_y == min_y) return id;  // all coincident: keep as leaf

  const auto mid = begin + (end - begin) / 2;
  auto coord = [&](std::uint32_t idx) { return axis == 0 ? points_[idx].x : points_[idx].y; };
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return coord(a) < coord(b); });
  const double split = coord(order_[mid]);
  const auto left = build(begin, mid, depth + 1);
  const auto right = build(mid, end, depth + 1);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::vector<Neighbor> KdTree::nearest(PlanarPoint query, std::size_t k) const {
  check_k(k, points_.size());
  std::vector<Neighbor> out;
  if (k == 0) return out;

  std::priority_queue<Candidate> heap;  // max-heap: worst candidate on top
  // Left subtrees hold coordinates <= split and right subtrees >= split, so
  // the plane distance is a lower bound for either side.
  auto visit = [&](auto&& self, std::int32_t node_id) -> void {
    const Node& node = nodes_[node_id];
    if (node.left < 0) {
      for (auto i = node.begin; i < node.end; ++i) {
        const Candidate c{squared(points_[order_[i]], query), order_[i]};
        if (heap.size() < k) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      return;
    }
    const double q = node.axis == 0 ? query.x : query.y;
    const double diff = q - node.split;
    const auto near = diff <= 0.0 ? node.left : node.right;
    const auto far = diff <= 0.0 ? node.right : node.left;
    self(self, near);
    // Equal bound is not pruned: a tie there may carry a smaller index.
    if (heap.size() < k || diff * diff <= heap.top().d2) self(self, far);
  };
  visit(visit, 0);

  out.resize(heap.size());
  for (auto i = out.size(); i-- > 0;) {
    out[i] = {heap.top().index, std::sqrt(heap.top().d2)};
    heap.pop();
  }
  return out;
}

std::vector<Neighbor> knn_linear_scan(PlanarPoint query, std::span<const PlanarPoint> points, std::size_t k) {
  check_k(k, points.size());
  std::vector<Candidate> all;
  all.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) all.push_back({squared(points[i], query), i});
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
  std::vector<Neighbor> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back({all[i].index, std::sqrt(all[i].d2)});
  return out;
}

}  // namespace latreg
