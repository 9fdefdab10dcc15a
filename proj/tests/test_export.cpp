#include <regex>
#include <set>

#include "doctest.h"
#include "latreg/export.hpp"
#include "support.hpp"

using namespace latreg;

namespace {

const GeoPoint kOrigin{41.8781, -87.6298};

Clustering hex_clustering(std::mt19937_64& rng, std::size_t n, int k) {
  auto cells = fixture::random_hex_patch(rng, n);
  std::vector<int> labels(cells.size());
  for (auto& l : labels) l = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
  return canonicalize(std::move(cells), std::move(labels));
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

// Area centroid of a projected lon/lat ring.
PlanarPoint ring_centroid(const nlohmann::json& ring) {
  std::vector<PlanarPoint> pts;
  for (const auto& c : ring) pts.push_back(project({c[1].get<double>(), c[0].get<double>()}, kOrigin));
  double a = 0, cx = 0, cy = 0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double cross = pts[i].x * pts[i + 1].y - pts[i + 1].x * pts[i].y;
    a += cross;
    cx += (pts[i].x + pts[i + 1].x) * cross;
    cy += (pts[i].y + pts[i + 1].y) * cross;
  }
  return {cx / (3 * a), cy / (3 * a)};
}

}  // namespace

TEST_CASE("one hexagon exports as one closed 7-point ring") {
  const auto tess = Tessellation::hex(kDefaultHexEdgeM, kOrigin);
  const auto c = canonicalize({HexCellId{2, -1}}, {0});
  const auto doc = clustering_geojson(c, tess);
  CHECK(doc["type"] == "FeatureCollection");
  REQUIRE(doc["features"].size() == 1);
  const auto& f = doc["features"][0];
  CHECK(f["geometry"]["type"] == "Polygon");
  const auto& ring = f["geometry"]["coordinates"][0];
  REQUIRE(ring.size() == 7);
  CHECK(ring[0] == ring[6]);
  CHECK(f["properties"]["cell"] == "2:-1");
  CHECK(f["properties"]["cluster"] == 0);
}

TEST_CASE("feature count equals cell count and centroids locate their cells") {
  std::mt19937_64 rng(3);
  const auto tess = Tessellation::hex(kDefaultHexEdgeM, kOrigin);
  const auto c = hex_clustering(rng, 80, 5);
  const auto doc = clustering_geojson(c, tess);
  REQUIRE(doc["features"].size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto& f = doc["features"][i];
    const auto cell = parse_cell(f["properties"]["cell"].get<std::string>());
    CHECK(f["properties"]["cluster"] == *c.label_of(cell));
    const auto centroid = ring_centroid(f["geometry"]["coordinates"][0]);
    CHECK(tess.locate(centroid) == cell);
  }
}

TEST_CASE("polygon units pass through and carry metrics") {
  std::vector<HexCellId> left{{0, 0}, {0, 1}}, right{{1, 0}, {2, 0}};
  const auto tess = Tessellation::polygons(
      {{"left", merge_hex_outline(left, 300.0)}, {"right", merge_hex_outline(right, 300.0)}}, kOrigin);
  const auto c = canonicalize({std::string("left"), std::string("right")}, {0, 1});
  std::vector<double> v1{10, 20}, v2{0, 0};
  std::vector<CellAggregate> aggs{summarize_cell(std::string("left"), v1), summarize_cell(std::string("right"), v2)};
  const auto doc = clustering_geojson(c, tess, &aggs);
  REQUIRE(doc["features"].size() == 2);
  const auto& p = doc["features"][0]["properties"];
  CHECK(p["cell"] == "left");
  CHECK(p["mean"] == 15.0);
  CHECK(p["count"] == 2);
  CHECK(doc["features"][1]["properties"]["ineq_ratio"].is_null());
  const auto centroid = ring_centroid(doc["features"][0]["geometry"]["coordinates"][0]);
  CHECK(tess.locate(centroid) == CellId{std::string("left")});
}

TEST_CASE("volatility GeoJSON carries the value per cell") {
  const auto tess = Tessellation::hex(kDefaultHexEdgeM, kOrigin);
  VolatilityMap map;
  map.cells = {HexCellId{0, 0}, HexCellId{1, 0}};
  map.volatility = {0.0, 0.5};
  map.reference = canonicalize(map.cells, {0, 1});
  const auto doc = volatility_geojson(map, tess);
  REQUIRE(doc["features"].size() == 2);
  CHECK(doc["features"][1]["properties"]["volatility"] == 0.5);
  CHECK(doc["features"][1]["properties"]["reference_cluster"] == 1);
}

TEST_CASE("single cluster renders in one colour") {
  std::mt19937_64 rng(1);
  const auto tess = Tessellation::hex(kDefaultHexEdgeM, kOrigin);
  auto c = hex_clustering(rng, 30, 1);
  const auto svg = clustering_svg(c, tess);
  std::set<std::string> fills;
  const std::regex cell_fill(R"re(<path class="cell"[^>]*fill="(#[0-9a-f]{6})")re");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), cell_fill); it != std::sregex_iterator(); ++it) {
    fills.insert((*it)[1]);
  }
  CHECK(count(svg, "class=\"cell\"") == 30);
  CHECK(fills.size() == 1);
  CHECK(count(svg, "class=\"legend-entry\"") == 1);
}

TEST_CASE("N clusters give N legend entries") {
  std::mt19937_64 rng(2);
  const auto tess = Tessellation::hex(kDefaultHexEdgeM, kOrigin);
  for (int k : {2, 5, 7, 12}) {
    auto cells = fixture::random_hex_patch(rng, 60);
    std::vector<int> labels(cells.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(k));
    const auto c = canonicalize(std::move(cells), std::move(labels));
    const auto svg = clustering_svg(c, tess, {640.0, Palette::Okabe, "test"});
    CHECK(count(svg, "class=\"legend-entry\"") == static_cast<std::size_t>(k));
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg == clustering_svg(c, tess, {640.0, Palette::Okabe, "test"}));
  }
}

TEST_CASE("volatility ramp endpoints and legend") {
  CHECK(sequential_color(0.0) == "#440154");
  CHECK(sequential_color(1.0) == "#fde725");
  CHECK(sequential_color(-3.0) == "#440154");
  CHECK(sequential_color(7.0) == "#fde725");
  const auto tess = Tessellation::hex(kDefaultHexEdgeM, kOrigin);
  VolatilityMap map;
  map.cells = {HexCellId{0, 0}, HexCellId{1, 0}};
  map.volatility = {0.0, 1.0};
  const auto svg = volatility_svg(map, tess);
  CHECK(svg.find("fill=\"#440154\"") != std::string::npos);
  CHECK(svg.find("fill=\"#fde725\"") != std::string::npos);
  CHECK(count(svg, "class=\"legend-entry\"") == 5);
}

TEST_CASE("categorical palette cycles") {
  for (auto p : {Palette::Tableau10, Palette::Okabe}) {
    CHECK(categorical_color(0, p) != categorical_color(1, p));
    std::set<std::string> seen;
    int period = 0;
    while (seen.insert(categorical_color(period, p)).second) ++period;
    CHECK(categorical_color(period, p) == categorical_color(0, p));
  }
}
