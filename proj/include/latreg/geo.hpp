#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace latreg {

/// Mean Earth radius used by the local projection, in meters.
inline constexpr double kEarthRadiusM = 6371008.8;

/// Default hexagon edge length: the average edge of an H3 resolution-8 cell.
inline constexpr double kDefaultHexEdgeM = 461.35;

struct GeoPoint {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Throws InvalidArgument when lat/lon are out of range or not finite.
GeoPoint make_geo_point(double lat, double lon);

struct PlanarPoint {
  double x = 0.0;  // meters east of the projection origin
  double y = 0.0;  // meters north of the projection origin

  friend bool operator==(const PlanarPoint&, const PlanarPoint&) = default;
};

double distance(PlanarPoint a, PlanarPoint b);

/// Equirectangular projection centred on `origin`. Adequate for city-scale
/// regions (a few hundred km across at most).
PlanarPoint project(GeoPoint p, GeoPoint origin);
GeoPoint unproject(PlanarPoint p, GeoPoint origin);

/// Axial coordinates of a pointy-top hexagon.
struct HexCellId {
  std::int64_t q = 0;
  std::int64_t r = 0;

  friend auto operator<=>(const HexCellId&, const HexCellId&) = default;
};

/// A cell is either a hexagon or a named polygon unit. Ordering is lexical
/// within each alternative, which fixes every tie-break downstream.
using CellId = std::variant<HexCellId, std::string>;

std::string format_cell(const CellId& cell);
/// Inverse of format_cell: "q:r" parses as a hexagon, anything else is a unit id.
CellId parse_cell(const std::string& text);

HexCellId hex_cell_at(PlanarPoint p, double edge_length);
PlanarPoint hex_center(HexCellId cell, double edge_length);
/// Corners counter-clockwise starting at the lower-right vertex (-30 degrees).
std::array<PlanarPoint, 6> hex_corners(HexCellId cell, double edge_length);
std::array<HexCellId, 6> cell_neighbors(HexCellId cell);

/// Closed ring: first vertex repeated at the end.
using Ring = std::vector<PlanarPoint>;

struct PolygonUnit {
  std::string id;
  // Outer boundaries and holes alike; containment is even-odd over all rings.
  std::vector<Ring> rings;
};

/// Even-odd containment over every ring of the unit.
bool unit_contains(const PolygonUnit& unit, PlanarPoint p);

/// Outline of a set of hexagons as closed counter-clockwise rings (holes
/// come out clockwise). Used to build irregular polygon units from hexes.
std::vector<Ring> merge_hex_outline(std::span<const HexCellId> cells, double edge_length);

enum class TessellationKind { Hex, Polygon };

/// Shared-edge (rook) or shared-vertex (queen) adjacency for polygon units.
enum class Contiguity { Rook, Queen };

class Tessellation {
 public:
  static Tessellation hex(double edge_length = kDefaultHexEdgeM, GeoPoint origin = {});
  /// Validates closure, self-intersection and id uniqueness.
  static Tessellation polygons(std::vector<PolygonUnit> units, GeoPoint origin);

  TessellationKind kind() const { return kind_; }
  double edge_length() const { return edge_length_; }
  const std::vector<PolygonUnit>& units() const { return units_; }
  GeoPoint origin() const { return origin_; }

  /// point_to_cell: the hexagon containing p, or the first polygon unit in
  /// file order containing p, or nullopt when no unit does.
  std::optional<CellId> locate(PlanarPoint p) const;

  /// Boundary rings of a cell in planar coordinates.
  std::vector<Ring> cell_rings(const CellId& cell) const;

  /// Hexagon centre, or area centroid of a polygon unit's largest ring.
  PlanarPoint cell_center(const CellId& cell) const;

  const PolygonUnit* find_unit(const std::string& id) const;

 private:
  TessellationKind kind_ = TessellationKind::Hex;
  double edge_length_ = kDefaultHexEdgeM;
  GeoPoint origin_{};
  std::vector<PolygonUnit> units_;
  std::unordered_map<std::string, std::size_t> unit_index_;
  std::vector<std::array<double, 4>> unit_bbox_;  // min_x, min_y, max_x, max_y
};

/// Reads a GeoJSON FeatureCollection of Polygon/MultiPolygon features with a
/// string "unit_id" property and projects it around `origin`.
Tessellation load_polygon_units(const std::string& geojson_text, GeoPoint origin);
Tessellation load_polygon_units_file(const std::filesystem::path& path, GeoPoint origin);

/// Bounding-box centre of every coordinate in a unit GeoJSON document.
GeoPoint polygon_units_center(const std::string& geojson_text);

}  // namespace latreg
