#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "latreg/aggregate.hpp"
#include "latreg/geo.hpp"
#include "latreg/regionalize.hpp"
#include "latreg/volatility.hpp"

namespace latreg {

/// RFC 7946 FeatureCollection, one Polygon per cell with lon/lat rings.
/// Properties: "cell", "cluster" and, when `aggregates` is given, the cell's
/// feature metrics.
nlohmann::json clustering_geojson(const Clustering& clustering, const Tessellation& tess,
                                  const std::vector<CellAggregate>* aggregates = nullptr);
nlohmann::json volatility_geojson(const VolatilityMap& map, const Tessellation& tess);

enum class Palette { Tableau10, Okabe };

struct SvgOptions {
  double width_px = 800.0;
  Palette palette = Palette::Tableau10;
  std::string title;
};

/// Fill colour of a cluster label, cycling through the palette.
std::string categorical_color(int label, Palette palette = Palette::Tableau10);
/// Viridis-like ramp; t is clamped to [0, 1] and the endpoints are exact.
std::string sequential_color(double t);

/// Choropleth with one legend entry per cluster.
std::string clustering_svg(const Clustering& clustering, const Tessellation& tess, const SvgOptions& options = {});
/// Choropleth on the sequential ramp with a 0..1 legend.
std::string volatility_svg(const VolatilityMap& map, const Tessellation& tess, const SvgOptions& options = {});

}  // namespace latreg
