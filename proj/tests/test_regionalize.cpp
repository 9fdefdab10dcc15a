#include <map>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "latreg/error.hpp"
#include "latreg/regionalize.hpp"
#include "support.hpp"

using namespace latreg;

namespace {

std::vector<CellId> unit_ids(std::size_t n) {
  std::vector<CellId> cells;
  for (std::size_t i = 0; i < n; ++i) cells.push_back(std::string(1, static_cast<char>('a' + i)));
  return cells;
}

ContiguityGraph path_graph(const std::vector<double>& x) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) edges.emplace_back(i, i + 1);
  ContiguityGraph g(unit_ids(x.size()), edges);
  g.set_features(fixture::scalar_features(x));
  return g;
}

std::vector<std::size_t> cluster_sizes(const Clustering& c) {
  std::vector<std::size_t> size(static_cast<std::size_t>(c.n_clusters), 0);
  for (int l : c.labels) ++size[static_cast<std::size_t>(l)];
  return size;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::InvalidArgument;
}

// Random tree on n nodes (random parent among earlier nodes).
std::vector<std::pair<std::size_t, std::size_t>> random_tree(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> t;
  for (std::size_t i = 1; i < n; ++i) t.emplace_back(rng() % i, i);
  return t;
}

}  // namespace

TEST_CASE("triangle MST keeps the two lightest edges") {
  std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}, {1, 2}, {0, 2}};
  ContiguityGraph g(unit_ids(3), edges);
  g.set_features({{0.0}, {1.0}, {3.0}});  // weights 1, 2, 3
  const auto mst = minimum_spanning_tree(g);
  REQUIRE(mst.size() == 2);
  double w = 0;
  for (const auto& e : mst) w += e.weight;
  CHECK(w == 3.0);
}

TEST_CASE("MST of a tree is the tree") {
  std::mt19937_64 rng(4);
  const auto tree = random_tree(rng, 12);
  ContiguityGraph g(unit_ids(12), tree);
  std::vector<double> x(12);
  for (auto& v : x) v = static_cast<double>(rng() % 100);
  g.set_features(fixture::scalar_features(x));
  CHECK(minimum_spanning_tree(g).size() == 11);
}

TEST_CASE("MST weight equals the exhaustive minimum on random 6-node graphs") {
  std::mt19937_64 rng(99);
  int checked = 0;
  for (int t = 0; t < 200; ++t) {
    std::vector<std::pair<std::size_t, std::size_t>> edges = random_tree(rng, 6);
    for (std::size_t u = 0; u < 6; ++u) {
      for (std::size_t v = u + 1; v < 6; ++v) {
        if (rng() % 2 == 0) edges.emplace_back(u, v);
      }
    }
    ContiguityGraph g(unit_ids(6), edges);
    std::vector<std::vector<double>> f(6);
    for (auto& v : f) v = {static_cast<double>(rng() % 7), static_cast<double>(rng() % 5)};
    g.set_features(f);
    std::vector<oracle::WeightedEdge> we;
    for (const auto& e : g.edges()) we.push_back({e.u, e.v, e.weight});
    double w = 0;
    for (const auto& e : minimum_spanning_tree(g)) w += e.weight;
    CHECK(w == doctest::Approx(oracle::exhaustive_mst_weight(6, we)).epsilon(1e-12));
    ++checked;
  }
  CHECK(checked == 200);
}

TEST_CASE("MST covers each component of a forest") {
  std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}, {1, 2}, {3, 4}};
  ContiguityGraph g(unit_ids(6), edges);
  g.set_features(fixture::scalar_features({1, 2, 3, 4, 5, 6}));
  CHECK(minimum_spanning_tree(g).size() == 3);
}

TEST_CASE("four-node path splits where SSD vanishes") {
  const auto g = path_graph({0, 0, 10, 10});
  const auto c = skater_partition(g, 2, 1);
  CHECK(c.labels == std::vector<int>{0, 0, 1, 1});
  CHECK(total_ssd(c, g) == 0.0);
}

TEST_CASE("N equal to node count gives singletons") {
  const auto g = path_graph({3, 1, 4, 1, 5});
  const auto c = skater_partition(g, 5, 1);
  CHECK(c.labels == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(boundary_edge_count(c, g) == g.edges().size());
}

TEST_CASE("SKATER output honours contiguity and floor on random patches") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 100; ++t) {
    const auto cells = fixture::random_hex_patch(rng, 20 + rng() % 81);
    auto g = fixture::hex_graph(cells);
    std::vector<double> x(g.size());
    std::uniform_real_distribution<double> u(5.0, 90.0);
    for (auto& v : x) v = u(rng);
    g.set_features(fixture::scalar_features(x));
    const int n = 2 + static_cast<int>(rng() % 6);
    const std::size_t floor = std::vector<std::size_t>{1, 2, 5}[rng() % 3];
    for (auto objective : {Objective::Ssd, Objective::MaxEdgeWeight}) {
      Clustering c;
      try {
        c = skater_partition(g, n, floor, objective);
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InfeasibleFloor);
        continue;
      }
      CHECK(c.n_clusters == n);
      CHECK(clusters_connected(c, g));
      for (auto s : cluster_sizes(c)) CHECK(s >= floor);
    }
  }
}

TEST_CASE("SSD objective attains the single-cut optimum on small trees") {
  std::mt19937_64 rng(31337);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 2 + rng() % 9;
    const auto tree = random_tree(rng, n);
    std::vector<double> x(n);
    for (auto& v : x) v = static_cast<double>(rng() % 50);
    ContiguityGraph g(unit_ids(n), tree);
    g.set_features(fixture::scalar_features(x));
    const std::size_t floor = 1 + rng() % 3;
    const double best = oracle::best_single_cut_ssd(n, tree, x, floor);
    if (!std::isfinite(best)) {
      CHECK(code_of([&] { skater_partition(g, 2, floor); }) == ErrorCode::InfeasibleFloor);
      continue;
    }
    const auto c = skater_partition(g, 2, floor);
    CHECK(total_ssd(c, g) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("max-edge objective removes the heaviest feasible edge") {
  // Weights along the path: 1, 9, 2, 5, 1.
  const auto g = path_graph({0, 1, 10, 12, 17, 18});
  auto c = skater_partition(g, 2, 1, Objective::MaxEdgeWeight);
  CHECK(c.labels == std::vector<int>{0, 0, 1, 1, 1, 1});
  // Floor 3 rules out the 9 edge (2 | 4); the 2 edge gives 3 | 3.
  c = skater_partition(g, 2, 3, Objective::MaxEdgeWeight);
  CHECK(c.labels == std::vector<int>{0, 0, 0, 1, 1, 1});
  // Three clusters: 9 first, then 5 (both sides >= 2).
  c = skater_partition(g, 3, 2, Objective::MaxEdgeWeight);
  CHECK(c.labels == std::vector<int>{0, 0, 1, 1, 2, 2});
}

TEST_CASE("increasing N splits exactly one cluster") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 30; ++t) {
    const auto cells = fixture::random_hex_patch(rng, 60);
    auto g = fixture::hex_graph(cells);
    std::vector<double> x(g.size());
    for (auto& v : x) v = static_cast<double>(rng() % 40);
    g.set_features(fixture::scalar_features(x));
    for (auto objective : {Objective::Ssd, Objective::MaxEdgeWeight}) {
      Clustering prev = skater_partition(g, 1, 2, objective);
      for (int n = 2; n <= 8; ++n) {
        const auto next = skater_partition(g, n, 2, objective);
        // Every new cluster lies inside one old cluster and exactly one old
        // cluster is divided in two.
        std::map<int, std::set<int>> parts;
        for (std::size_t i = 0; i < next.size(); ++i) parts[prev.labels[i]].insert(next.labels[i]);
        std::map<int, int> owner;
        int divided = 0;
        for (const auto& [old, news] : parts) {
          if (news.size() == 2) ++divided;
          CHECK(news.size() <= 2);
          for (int l : news) {
            CHECK_FALSE(owner.count(l));
            owner[l] = old;
          }
        }
        CHECK(divided == 1);
        prev = next;
      }
    }
  }
}

TEST_CASE("adding a constant to features leaves the SSD clustering unchanged") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 30; ++t) {
    const auto cells = fixture::random_hex_patch(rng, 50);
    auto g = fixture::hex_graph(cells);
    std::vector<double> x(g.size()), shifted(g.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = static_cast<double>(rng() % 64);
      shifted[i] = x[i] + 1024.0;  // exact in binary floating point
    }
    auto h = g;
    g.set_features(fixture::scalar_features(x));
    h.set_features(fixture::scalar_features(shifted));
    CHECK(skater_partition(g, 5, 2).labels == skater_partition(h, 5, 2).labels);
  }
}

TEST_CASE("disconnected inputs start from their components") {
  std::vector<std::pair<std::size_t, std::size_t>> edges{{0, 1}, {1, 2}, {3, 4}, {4, 5}};
  ContiguityGraph g(unit_ids(6), edges);
  g.set_features(fixture::scalar_features({0, 0, 50, 7, 7, 7}));
  const auto two = skater_partition(g, 2, 1);
  CHECK(two.labels == std::vector<int>{0, 0, 0, 1, 1, 1});
  const auto three = skater_partition(g, 3, 1);
  CHECK(three.labels == std::vector<int>{0, 0, 1, 2, 2, 2});
  CHECK(code_of([&] { skater_partition(g, 1, 1); }) == ErrorCode::TooManyComponents);
}

TEST_CASE("floor that cannot be met raises InfeasibleFloor") {
  const auto g = path_graph({1, 2, 3, 4, 5});
  CHECK(code_of([&] { skater_partition(g, 3, 2); }) == ErrorCode::InfeasibleFloor);
  CHECK_NOTHROW(skater_partition(g, 2, 2));
}

TEST_CASE("boundary predicate") {
  const auto g = path_graph({0, 0, 10, 10});
  const auto c = skater_partition(g, 2, 1);
  const auto& cells = g.cells();
  CHECK_FALSE(boundary_exists(c, g, cells[0], cells[1]));
  CHECK(boundary_exists(c, g, cells[1], cells[2]));
  CHECK(code_of([&] { boundary_exists(c, g, cells[0], cells[3]); }) == ErrorCode::NotAdjacent);
  CHECK(boundary_edge_count(c, g) == 1);
}

TEST_CASE("canonical labels follow the smallest cell") {
  std::vector<CellId> cells{std::string("c"), std::string("a"), std::string("b"), std::string("d")};
  const auto c = canonicalize(cells, {5, 9, 5, 2});
  CHECK(c.cells == unit_ids(4));
  CHECK(c.labels == std::vector<int>{0, 1, 1, 2});
  CHECK(c.n_clusters == 3);
  CHECK(c.label_of(CellId{std::string("d")}) == 2);
  CHECK_FALSE(c.label_of(CellId{std::string("z")}).has_value());
  const std::vector<CellId> keep{std::string("b"), std::string("d")};
  const auto r = restrict_to(c, keep);
  CHECK(r.size() == 2);
  CHECK(r.labels == std::vector<int>{0, 1});
}

TEST_CASE("multi-metric features are z-scored, single metrics are not") {
  std::vector<CellId> cells{HexCellId{0, 0}, HexCellId{1, 0}, HexCellId{2, 0}};
  const auto topo = fixture::hex_graph(cells);
  const auto single = with_features(topo, {{10.0}, {20.0}, {30.0}});
  CHECK(single.features()[2][0] == 30.0);
  const auto multi = with_features(topo, {{10.0, 1.0}, {20.0, 1.0}, {30.0, 4.0}});
  double mean = 0, sq = 0;
  for (const auto& f : multi.features()) mean += f[0];
  for (const auto& f : multi.features()) sq += f[0] * f[0];
  CHECK(mean == doctest::Approx(0.0));
  CHECK(sq / 3.0 == doctest::Approx(1.0));
  // A constant column would divide by zero; it must stay finite.
  const auto flat = with_features(topo, {{1.0, 5.0}, {2.0, 5.0}, {3.0, 5.0}});
  for (const auto& f : flat.features()) CHECK(std::isfinite(f[1]));
}

TEST_CASE("objective names parse") {
  CHECK(parse_objective("ssd") == Objective::Ssd);
  CHECK(parse_objective(to_string(Objective::MaxEdgeWeight)) == Objective::MaxEdgeWeight);
  CHECK_THROWS_AS(parse_objective("kmeans"), Error);
}

TEST_CASE("clustering CSV round trip") {
  std::vector<CellId> cells{HexCellId{0, 1}, HexCellId{-1, 0}, std::string("x")};
  const auto c = canonicalize(cells, {1, 1, 0});
  std::stringstream buf;
  write_clustering_csv(buf, c);
  CHECK(buf.str().rfind("cell,label\n", 0) == 0);
  const auto back = read_clustering_csv(buf);
  CHECK(back.cells == c.cells);
  CHECK(back.labels == c.labels);
}
