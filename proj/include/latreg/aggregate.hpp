#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latreg/geo.hpp"
#include "latreg/interpolate.hpp"

namespace latreg {

/// Linear interpolation between order statistics at rank (p/100)(n-1).
/// Throws EmptyValues.
double percentile(std::span<const double> values, double p);

/// Below this 10th percentile the p90/p10 ratio is reported as undefined.
inline constexpr double kInequalityRatioFloorMs = 1e-6;

struct CellAggregate {
  CellId cell;
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  double p10 = 0.0;
  double p90 = 0.0;
  double p95 = 0.0;
  double p97_5 = 0.0;
  double p99 = 0.0;
  std::optional<double> inequality_ratio;  // p90 / p10
  double latency_reduction = 0.0;          // p90 - p10
};

enum class Metric { Mean, P10, P90, P95, P97_5, P99, InequalityRatio, LatencyReduction };

std::string_view to_string(Metric metric);
/// Accepts mean, p10, p90, p95, p97_5 (or p97.5), p99, ineq_ratio, lat_reduction.
Metric parse_metric(std::string_view name);
std::optional<double> metric_value(const CellAggregate& agg, Metric metric);

CellAggregate summarize_cell(const CellId& cell, std::span<const double> values);

using CellValues = std::map<CellId, std::vector<double>>;

/// Groups values by containing cell; points outside every unit are dropped.
CellValues collect_cell_values(std::span<const SamplePoint> points, const Tessellation& tess);
CellValues collect_cell_values(const GridSurface& grid, const Tessellation& tess);

/// One aggregate per cell holding at least `min_count` values, in cell order.
std::vector<CellAggregate> aggregate_values(const CellValues& values, std::size_t min_count = 1);

/// Raw measurements and interpolated surfaces share this path. Throws EmptySource.
std::vector<CellAggregate> aggregate_cells(std::span<const SamplePoint> points, const Tessellation& tess,
                                           std::size_t min_count = 1);
std::vector<CellAggregate> aggregate_cells(const GridSurface& grid, const Tessellation& tess,
                                           std::size_t min_count = 1);

/// "cell_q,cell_r,..." for hexagons, "unit_id,..." for polygon units.
void write_aggregates_csv(std::ostream& out, std::span<const CellAggregate> aggs, TessellationKind kind);
/// Reads either layout written by write_aggregates_csv.
std::vector<CellAggregate> read_aggregates_csv(std::istream& in);

}  // namespace latreg
