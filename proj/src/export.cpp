#include "latreg/export.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "latreg/error.hpp"

namespace latreg {

namespace {

nlohmann::json ring_coordinates(const Ring& ring, GeoPoint origin) {
  auto coords = nlohmann::json::array();
  for (const auto& p : ring) {
    const GeoPoint g = unproject(p, origin);
    coords.push_back({g.lon, g.lat});
  }
  return coords;
}

nlohmann::json cell_geometry(const CellId& cell, const Tessellation& tess) {
  auto rings = nlohmann::json::array();
  for (const auto& ring : tess.cell_rings(cell)) rings.push_back(ring_coordinates(ring, tess.origin()));
  return {{"type", "Polygon"}, {"coordinates", rings}};
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct Frame {
  double min_x = HUGE_VAL, min_y = HUGE_VAL, max_x = -HUGE_VAL, max_y = -HUGE_VAL;
  double scale = 1.0;
  double width = 0.0;
  double height = 0.0;
  static constexpr double kMargin = 10.0;

  double sx(double x) const { return kMargin + (x - min_x) * scale; }
  double sy(double y) const { return kMargin + (max_y - y) * scale; }
};

Frame fit_frame(const std::vector<std::vector<Ring>>& shapes, double width_px) {
  Frame f;
  for (const auto& rings : shapes) {
    for (const auto& ring : rings) {
      for (const auto& p : ring) {
        f.min_x = std::min(f.min_x, p.x);
        f.min_y = std::min(f.min_y, p.y);
        f.max_x = std::max(f.max_x, p.x);
        f.max_y = std::max(f.max_y, p.y);
      }
    }
  }
  const double span_x = std::max(f.max_x - f.min_x, 1e-9);
  const double span_y = std::max(f.max_y - f.min_y, 1e-9);
  f.scale = (width_px - 2 * Frame::kMargin) / span_x;
  f.width = width_px;
  f.height = span_y * f.scale + 2 * Frame::kMargin;
  return f;
}

std::string path_data(const std::vector<Ring>& rings, const Frame& f) {
  std::string d;
  for (const auto& ring : rings) {
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
      d += (i == 0 ? "M" : "L") + fixed(f.sx(ring[i].x)) + "," + fixed(f.sy(ring[i].y));
    }
    d += "Z";
  }
  return d;
}

std::string svg_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// Map body plus a legend column to the right.
std::string render(const std::vector<std::vector<Ring>>& shapes, const std::vector<std::string>& fills,
                   const std::vector<std::string>& cell_titles, const std::string& legend, double legend_height,
                   const SvgOptions& options) {
  constexpr double kLegendWidth = 170.0;
  const Frame f = fit_frame(shapes, options.width_px);
  const double total_w = f.width + kLegendWidth;
  const double total_h = std::max(f.height, legend_height + 20.0);
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << fixed(total_w) << "\" height=\""
      << fixed(total_h) << "\" viewBox=\"0 0 " << fixed(total_w) << " " << fixed(total_h) << "\">\n";
  if (!options.title.empty()) out << "<title>" << svg_escape(options.title) << "</title>\n";
  out << "<g id=\"cells\" stroke=\"#ffffff\" stroke-width=\"0.5\">\n";
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    out << "<path class=\"cell\" fill=\"" << fills[i] << "\" d=\"" << path_data(shapes[i], f) << "\"><title>"
        << svg_escape(cell_titles[i]) << "</title></path>\n";
  }
  out << "</g>\n";
  out << "<g id=\"legend\" transform=\"translate(" << fixed(f.width) << ",10)\" font-family=\"sans-serif\" "
      << "font-size=\"12\">\n"
      << legend << "</g>\n";
  out << "</svg>\n";
  return out.str();
}

constexpr std::array<const char*, 10> kTableau10 = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                                    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};
constexpr std::array<const char*, 8> kOkabe = {"#e69f00", "#56b4e9", "#009e73", "#f0e442",
                                               "#0072b2", "#d55e00", "#cc79a7", "#000000"};

// Viridis control points at t = 0, 0.25, 0.5, 0.75, 1.
constexpr std::array<std::array<int, 3>, 5> kRamp = {{{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98},
                                                      {253, 231, 37}}};

}  // namespace

nlohmann::json clustering_geojson(const Clustering& clustering, const Tessellation& tess,
                                  const std::vector<CellAggregate>* aggregates) {
  auto features = nlohmann::json::array();
  std::map<CellId, const CellAggregate*> by_cell;
  if (aggregates != nullptr) {
    for (const auto& a : *aggregates) by_cell.emplace(a.cell, &a);
  }
  for (std::size_t i = 0; i < clustering.cells.size(); ++i) {
    const auto& cell = clustering.cells[i];
    nlohmann::json props = {{"cell", format_cell(cell)}, {"cluster", clustering.labels[i]}};
    if (const auto it = by_cell.find(cell); it != by_cell.end()) {
      const auto& a = *it->second;
      props["count"] = a.count;
      props["mean"] = a.mean;
      props["std"] = a.std;
      props["p10"] = a.p10;
      props["p90"] = a.p90;
      props["p95"] = a.p95;
      props["p97_5"] = a.p97_5;
      props["p99"] = a.p99;
      props["ineq_ratio"] = a.inequality_ratio ? nlohmann::json(*a.inequality_ratio) : nlohmann::json(nullptr);
      props["lat_reduction"] = a.latency_reduction;
    }
    features.push_back({{"type", "Feature"}, {"geometry", cell_geometry(cell, tess)}, {"properties", props}});
  }
  return {{"type", "FeatureCollection"}, {"features", features}};
}

nlohmann::json volatility_geojson(const VolatilityMap& map, const Tessellation& tess) {
  auto features = nlohmann::json::array();
  for (std::size_t i = 0; i < map.cells.size(); ++i) {
    const auto& cell = map.cells[i];
    nlohmann::json props = {{"cell", format_cell(cell)},
                            {"volatility", map.volatility[i]},
                            {"reference_cluster", map.reference.label_of(cell).value_or(-1)}};
    features.push_back({{"type", "Feature"}, {"geometry", cell_geometry(cell, tess)}, {"properties", props}});
  }
  return {{"type", "FeatureCollection"}, {"features", features}};
}

std::string categorical_color(int label, Palette palette) {
  const auto idx = static_cast<std::size_t>(label < 0 ? -label : label);
  return palette == Palette::Okabe ? kOkabe[idx % kOkabe.size()] : kTableau10[idx % kTableau10.size()];
}

std::string sequential_color(double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  const double pos = t * static_cast<double>(kRamp.size() - 1);
  const auto lo = std::min(static_cast<std::size_t>(pos), kRamp.size() - 2);
  const double frac = pos - static_cast<double>(lo);
  char buf[8];
  int rgb[3];
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<int>(std::lround(kRamp[lo][c] + frac * (kRamp[lo + 1][c] - kRamp[lo][c])));
  }
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

std::string clustering_svg(const Clustering& clustering, const Tessellation& tess, const SvgOptions& options) {
  std::vector<std::vector<Ring>> shapes;
  std::vector<std::string> fills, titles;
  std::set<int> labels;
  for (std::size_t i = 0; i < clustering.cells.size(); ++i) {
    shapes.push_back(tess.cell_rings(clustering.cells[i]));
    fills.push_back(categorical_color(clustering.labels[i], options.palette));
    titles.push_back(format_cell(clustering.cells[i]) + " cluster " + std::to_string(clustering.labels[i]));
    labels.insert(clustering.labels[i]);
  }
  std::ostringstream legend;
  double y = 0.0;
  for (int label : labels) {
    legend << "<g class=\"legend-entry\"><rect x=\"10\" y=\"" << fixed(y) << "\" width=\"14\" height=\"14\" fill=\""
           << categorical_color(label, options.palette) << "\"/><text x=\"30\" y=\"" << fixed(y + 11)
           << "\">cluster " << label << "</text></g>\n";
    y += 20.0;
  }
  return render(shapes, fills, titles, legend.str(), y, options);
}

std::string volatility_svg(const VolatilityMap& map, const Tessellation& tess, const SvgOptions& options) {
  std::vector<std::vector<Ring>> shapes;
  std::vector<std::string> fills, titles;
  for (std::size_t i = 0; i < map.cells.size(); ++i) {
    shapes.push_back(tess.cell_rings(map.cells[i]));
    fills.push_back(sequential_color(map.volatility[i]));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", map.volatility[i]);
    titles.push_back(format_cell(map.cells[i]) + " volatility " + buf);
  }
  std::ostringstream legend;
  legend << "<text x=\"10\" y=\"11\">volatility</text>\n";
  double y = 20.0;
  for (int step = 0; step <= 4; ++step) {
    const double t = step / 4.0;
    char label[16];
    std::snprintf(label, sizeof(label), "%.2f", t);
    legend << "<g class=\"legend-entry\"><rect x=\"10\" y=\"" << fixed(y) << "\" width=\"14\" height=\"14\" fill=\""
           << sequential_color(t) << "\"/><text x=\"30\" y=\"" << fixed(y + 11) << "\">" << label << "</text></g>\n";
    y += 20.0;
  }
  return render(shapes, fills, titles, legend.str(), y, options);
}

}  // namespace latreg
