#include "latreg/geo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "latreg/error.hpp"

namespace latreg {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kSqrt3 = std::numbers::sqrt3;

struct VertexKey {
  long long x;
  long long y;
  friend auto operator<=>(const VertexKey&, const VertexKey&) = default;
};

// Millimetre quantisation; corners shared by neighbouring hexagons are
// computed from different centres and differ in the last bits.
VertexKey quantize_mm(PlanarPoint p) { return {std::llround(p.x * 1e3), std::llround(p.y * 1e3)}; }

double cross(PlanarPoint o, PlanarPoint a, PlanarPoint b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool segments_cross(PlanarPoint a, PlanarPoint b, PlanarPoint c, PlanarPoint d) {
  const double d1 = cross(c, d, a);
  const double d2 = cross(c, d, b);
  const double d3 = cross(a, b, c);
  const double d4 = cross(a, b, d);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

void validate_ring(const std::string& unit, const Ring& ring) {
  if (ring.size() < 4) {
    throw Error(ErrorCode::InvalidTessellation, "unit '" + unit + "' has a ring with fewer than 4 vertices");
  }
  if (!(ring.front() == ring.back())) {
    throw Error(ErrorCode::InvalidTessellation, "unit '" + unit + "' has an unclosed ring");
  }
  for (const auto& p : ring) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw Error(ErrorCode::InvalidTessellation, "unit '" + unit + "' has a non-finite vertex");
    }
  }
  const std::size_t segments = ring.size() - 1;
  for (std::size_t i = 0; i < segments; ++i) {
    for (std::size_t j = i + 2; j < segments; ++j) {
      if (i == 0 && j == segments - 1) continue;  // adjacent through the closing vertex
      if (segments_cross(ring[i], ring[i + 1], ring[j], ring[j + 1])) {
        throw Error(ErrorCode::InvalidTessellation, "unit '" + unit + "' has a self-intersecting ring");
      }
    }
  }
}

double signed_area(const Ring& ring) {
  double twice = 0.0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    twice += ring[i].x * ring[i + 1].y - ring[i + 1].x * ring[i].y;
  }
  return 0.5 * twice;
}

Ring parse_ring(const nlohmann::json& coords, GeoPoint origin, const std::string& unit) {
  if (!coords.is_array()) {
    throw Error(ErrorCode::InvalidTessellation, "unit '" + unit + "': ring is not an array");
  }
  Ring ring;
  ring.reserve(coords.size());
  for (const auto& pos : coords) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
      throw Error(ErrorCode::InvalidTessellation, "unit '" + unit + "': malformed position");
    }
    const GeoPoint g = make_geo_point(pos[1].get<double>(), pos[0].get<double>());
    ring.push_back(project(g, origin));
  }
  return ring;
}

template <typename Fn>
void for_each_position(const nlohmann::json& coords, Fn&& fn) {
  if (!coords.is_array()) return;
  if (coords.size() >= 2 && coords[0].is_number() && coords[1].is_number()) {
    fn(coords[1].get<double>(), coords[0].get<double>());
    return;
  }
  for (const auto& c : coords) for_each_position(c, fn);
}

}  // namespace

GeoPoint make_geo_point(double lat, double lon) {
  if (!std::isfinite(lat) || !std::isfinite(lon) || lat < -90.0 || lat > 90.0 || lon < -180.0 ||
      lon > 180.0) {
    std::ostringstream msg;
    msg << "coordinate out of range: lat=" << lat << " lon=" << lon;
    throw Error(ErrorCode::InvalidArgument, msg.str());
  }
  return {lat, lon};
}

double distance(PlanarPoint a, PlanarPoint b) { return std::hypot(a.x - b.x, a.y - b.y); }

PlanarPoint project(GeoPoint p, GeoPoint origin) {
  const double x = kEarthRadiusM * (p.lon - origin.lon) * kDegToRad * std::cos(origin.lat * kDegToRad);
  const double y = kEarthRadiusM * (p.lat - origin.lat) * kDegToRad;
  return {x, y};
}

GeoPoint unproject(PlanarPoint p, GeoPoint origin) {
  const double lat = origin.lat + p.y / (kEarthRadiusM * kDegToRad);
  const double lon = origin.lon + p.x / (kEarthRadiusM * kDegToRad * std::cos(origin.lat * kDegToRad));
  return {lat, lon};
}

std::string format_cell(const CellId& cell) {
  if (const auto* hex = std::get_if<HexCellId>(&cell)) {
    return std::to_string(hex->q) + ":" + std::to_string(hex->r);
  }
  return std::get<std::string>(cell);
}

CellId parse_cell(const std::string& text) {
  const auto colon = text.find(':');
  if (colon != std::string::npos && colon > 0 && colon + 1 < text.size()) {
    try {
      std::size_t used_q = 0;
      std::size_t used_r = 0;
      const std::string qs = text.substr(0, colon);
      const std::string rs = text.substr(colon + 1);
      const long long q = std::stoll(qs, &used_q);
      const long long r = std::stoll(rs, &used_r);
      if (used_q == qs.size() && used_r == rs.size()) return HexCellId{q, r};
    } catch (const std::exception&) {
    }
  }
  return text;
}

HexCellId hex_cell_at(PlanarPoint p, double edge_length) {
  const double fq = (kSqrt3 / 3.0 * p.x - 1.0 / 3.0 * p.y) / edge_length;
  const double fr = (2.0 / 3.0 * p.y) / edge_length;
  const double fs = -fq - fr;
  double rq = std::round(fq);
  double rr = std::round(fr);
  const double rs = std::round(fs);
  const double dq = std::abs(rq - fq);
  const double dr = std::abs(rr - fr);
  const double ds = std::abs(rs - fs);
  if (dq > dr && dq > ds) {
    rq = -rr - rs;
  } else if (dr > ds) {
    rr = -rq - rs;
  }
  return {static_cast<std::int64_t>(rq), static_cast<std::int64_t>(rr)};
}

PlanarPoint hex_center(HexCellId cell, double edge_length) {
  const auto q = static_cast<double>(cell.q);
  const auto r = static_cast<double>(cell.r);
  return {edge_length * kSqrt3 * (q + r / 2.0), edge_length * 1.5 * r};
}

std::array<PlanarPoint, 6> hex_corners(HexCellId cell, double edge_length) {
  const PlanarPoint c = hex_center(cell, edge_length);
  std::array<PlanarPoint, 6> corners{};
  for (int i = 0; i < 6; ++i) {
    const double angle = (60.0 * i - 30.0) * kDegToRad;
    corners[i] = {c.x + edge_length * std::cos(angle), c.y + edge_length * std::sin(angle)};
  }
  return corners;
}

std::array<HexCellId, 6> cell_neighbors(HexCellId c) {
  return {{{c.q + 1, c.r},
           {c.q - 1, c.r},
           {c.q, c.r + 1},
           {c.q, c.r - 1},
           {c.q + 1, c.r - 1},
           {c.q - 1, c.r + 1}}};
}

bool unit_contains(const PolygonUnit& unit, PlanarPoint p) {
  bool inside = false;
  for (const auto& ring : unit.rings) {
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
      const PlanarPoint a = ring[i];
      const PlanarPoint b = ring[i + 1];
      if ((a.y > p.y) != (b.y > p.y)) {
        const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
        if (p.x < x_cross) inside = !inside;
      }
    }
  }
  return inside;
}

std::vector<Ring> merge_hex_outline(std::span<const HexCellId> cells, double edge_length) {
  std::set<HexCellId> unique(cells.begin(), cells.end());
  // Directed counter-clockwise edges; an interior edge appears once in each
  // direction and cancels.
  std::set<std::pair<VertexKey, VertexKey>> directed;
  for (const auto& cell : unique) {
    const auto corners = hex_corners(cell, edge_length);
    for (int i = 0; i < 6; ++i) {
      const PlanarPoint a = corners[i];
      const PlanarPoint b = corners[(i + 1) % 6];
      directed.emplace(quantize_mm(a), quantize_mm(b));
    }
  }
  // Vertices snap to the millimetre grid so outlines of neighbouring merged
  // units share bit-identical coordinates.
  std::map<VertexKey, VertexKey> next;
  for (const auto& key : directed) {
    if (directed.count({key.second, key.first})) continue;
    next.emplace(key.first, key.second);
  }
  std::vector<Ring> rings;
  while (!next.empty()) {
    Ring ring;
    const VertexKey start = next.begin()->first;
    VertexKey at = start;
    do {
      auto it = next.find(at);
      if (it == next.end()) {
        throw Error(ErrorCode::InvalidTessellation, "hexagon outline does not close");
      }
      ring.push_back({static_cast<double>(at.x) / 1e3, static_cast<double>(at.y) / 1e3});
      at = it->second;
      next.erase(it);
    } while (!(at == start));
    ring.push_back(ring.front());
    rings.push_back(std::move(ring));
  }
  return rings;
}

Tessellation Tessellation::hex(double edge_length, GeoPoint origin) {
  if (!(edge_length > 0.0) || !std::isfinite(edge_length)) {
    throw Error(ErrorCode::InvalidTessellation, "hex edge length must be positive");
  }
  Tessellation t;
  t.kind_ = TessellationKind::Hex;
  t.edge_length_ = edge_length;
  t.origin_ = origin;
  return t;
}

Tessellation Tessellation::polygons(std::vector<PolygonUnit> units, GeoPoint origin) {
  Tessellation t;
  t.kind_ = TessellationKind::Polygon;
  t.edge_length_ = 0.0;
  t.origin_ = origin;
  if (units.empty()) throw Error(ErrorCode::InvalidTessellation, "no polygon units");
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto& unit = units[i];
    if (unit.rings.empty()) {
      throw Error(ErrorCode::InvalidTessellation, "unit '" + unit.id + "' has no rings");
    }
    std::array<double, 4> box{HUGE_VAL, HUGE_VAL, -HUGE_VAL, -HUGE_VAL};
    for (const auto& ring : unit.rings) {
      validate_ring(unit.id, ring);
      for (const auto& p : ring) {
        box[0] = std::min(box[0], p.x);
        box[1] = std::min(box[1], p.y);
        box[2] = std::max(box[2], p.x);
        box[3] = std::max(box[3], p.y);
      }
    }
    if (!t.unit_index_.emplace(unit.id, i).second) {
      throw Error(ErrorCode::InvalidTessellation, "duplicate unit id '" + unit.id + "'");
    }
    t.unit_bbox_.push_back(box);
  }
  t.units_ = std::move(units);
  return t;
}

std::optional<CellId> Tessellation::locate(PlanarPoint p) const {
  if (kind_ == TessellationKind::Hex) return CellId{hex_cell_at(p, edge_length_)};
  for (std::size_t i = 0; i < units_.size(); ++i) {
    const auto& box = unit_bbox_[i];
    if (p.x < box[0] || p.x > box[2] || p.y < box[1] || p.y > box[3]) continue;
    if (unit_contains(units_[i], p)) return CellId{units_[i].id};
  }
  return std::nullopt;
}

const PolygonUnit* Tessellation::find_unit(const std::string& id) const {
  const auto it = unit_index_.find(id);
  return it == unit_index_.end() ? nullptr : &units_[it->second];
}

std::vector<Ring> Tessellation::cell_rings(const CellId& cell) const {
  if (const auto* hex = std::get_if<HexCellId>(&cell)) {
    const auto corners = hex_corners(*hex, kind_ == TessellationKind::Hex ? edge_length_ : kDefaultHexEdgeM);
    Ring ring(corners.begin(), corners.end());
    ring.push_back(corners.front());
    return {ring};
  }
  const auto* unit = find_unit(std::get<std::string>(cell));
  if (unit == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "unknown unit '" + std::get<std::string>(cell) + "'");
  }
  return unit->rings;
}

PlanarPoint Tessellation::cell_center(const CellId& cell) const {
  if (const auto* hex = std::get_if<HexCellId>(&cell)) return hex_center(*hex, edge_length_);
  const auto rings = cell_rings(cell);
  const Ring* largest = &rings.front();
  for (const auto& ring : rings) {
    if (std::abs(signed_area(ring)) > std::abs(signed_area(*largest))) largest = &ring;
  }
  const double area = signed_area(*largest);
  if (area == 0.0) return largest->front();
  double cx = 0.0;
  double cy = 0.0;
  for (std::size_t i = 0; i + 1 < largest->size(); ++i) {
    const auto& a = (*largest)[i];
    const auto& b = (*largest)[i + 1];
    const double f = a.x * b.y - b.x * a.y;
    cx += (a.x + b.x) * f;
    cy += (a.y + b.y) * f;
  }
  return {cx / (6.0 * area), cy / (6.0 * area)};
}

Tessellation load_polygon_units(const std::string& geojson_text, GeoPoint origin) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(geojson_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidTessellation, std::string("GeoJSON parse error: ") + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array()) {
    throw Error(ErrorCode::InvalidTessellation, "expected a GeoJSON FeatureCollection");
  }
  std::vector<PolygonUnit> units;
  for (const auto& feature : doc["features"]) {
    const auto props = feature.value("properties", nlohmann::json::object());
    if (!props.is_object() || !props.contains("unit_id") || !props["unit_id"].is_string()) {
      throw Error(ErrorCode::InvalidTessellation, "feature without a string 'unit_id' property");
    }
    PolygonUnit unit;
    unit.id = props["unit_id"].get<std::string>();
    const auto& geom = feature.at("geometry");
    const std::string type = geom.value("type", "");
    const auto& coords = geom.at("coordinates");
    if (type == "Polygon") {
      for (const auto& ring : coords) unit.rings.push_back(parse_ring(ring, origin, unit.id));
    } else if (type == "MultiPolygon") {
      for (const auto& poly : coords) {
        for (const auto& ring : poly) unit.rings.push_back(parse_ring(ring, origin, unit.id));
      }
    } else {
      throw Error(ErrorCode::InvalidTessellation, "unit '" + unit.id + "' has unsupported geometry '" + type + "'");
    }
    units.push_back(std::move(unit));
  }
  return Tessellation::polygons(std::move(units), origin);
}

Tessellation load_polygon_units_file(const std::filesystem::path& path, GeoPoint origin) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_polygon_units(buffer.str(), origin);
}

GeoPoint polygon_units_center(const std::string& geojson_text) {
  const auto doc = nlohmann::json::parse(geojson_text, nullptr, false);
  if (doc.is_discarded() || !doc.contains("features")) {
    throw Error(ErrorCode::InvalidTessellation, "expected a GeoJSON FeatureCollection");
  }
  double min_lat = HUGE_VAL, max_lat = -HUGE_VAL, min_lon = HUGE_VAL, max_lon = -HUGE_VAL;
  for (const auto& feature : doc["features"]) {
    if (!feature.contains("geometry")) continue;
    for_each_position(feature["geometry"].value("coordinates", nlohmann::json::array()),
                      [&](double lat, double lon) {
                        min_lat = std::min(min_lat, lat);
                        max_lat = std::max(max_lat, lat);
                        min_lon = std::min(min_lon, lon);
                        max_lon = std::max(max_lon, lon);
                      });
  }
  if (min_lat > max_lat) throw Error(ErrorCode::InvalidTessellation, "no coordinates in GeoJSON");
  return make_geo_point((min_lat + max_lat) / 2.0, (min_lon + max_lon) / 2.0);
}

}  // namespace latreg
