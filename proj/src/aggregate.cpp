#include "latreg/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "latreg/csv.hpp"
#include "latreg/error.hpp"

namespace latreg {

namespace {

double sorted_percentile(const std::vector<double>& sorted, double p) {
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::EmptyValues, "percentile of an empty list");
  if (!(p >= 0.0 && p <= 100.0)) throw Error(ErrorCode::InvalidArgument, "percentile outside [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return sorted_percentile(sorted, p);
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::Mean: return "mean";
    case Metric::P10: return "p10";
    case Metric::P90: return "p90";
    case Metric::P95: return "p95";
    case Metric::P97_5: return "p97_5";
    case Metric::P99: return "p99";
    case Metric::InequalityRatio: return "ineq_ratio";
    case Metric::LatencyReduction: return "lat_reduction";
  }
  return "mean";
}

Metric parse_metric(std::string_view name) {
  if (name == "mean") return Metric::Mean;
  if (name == "p10") return Metric::P10;
  if (name == "p90") return Metric::P90;
  if (name == "p95") return Metric::P95;
  if (name == "p97_5" || name == "p97.5") return Metric::P97_5;
  if (name == "p99") return Metric::P99;
  if (name == "ineq_ratio") return Metric::InequalityRatio;
  if (name == "lat_reduction") return Metric::LatencyReduction;
  throw Error(ErrorCode::InvalidArgument, "unknown metric '" + std::string(name) + "'");
}

std::optional<double> metric_value(const CellAggregate& agg, Metric metric) {
  switch (metric) {
    case Metric::Mean: return agg.mean;
    case Metric::P10: return agg.p10;
    case Metric::P90: return agg.p90;
    case Metric::P95: return agg.p95;
    case Metric::P97_5: return agg.p97_5;
    case Metric::P99: return agg.p99;
    case Metric::InequalityRatio: return agg.inequality_ratio;
    case Metric::LatencyReduction: return agg.latency_reduction;
  }
  return std::nullopt;
}

CellAggregate summarize_cell(const CellId& cell, std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyValues, "cell " + format_cell(cell) + " has no values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  CellAggregate agg;
  agg.cell = cell;
  agg.count = sorted.size();
  double sum = 0.0;
  for (double v : sorted) sum += v;
  agg.mean = sum / static_cast<double>(sorted.size());
  double ss = 0.0;
  for (double v : sorted) ss += (v - agg.mean) * (v - agg.mean);
  agg.std = std::sqrt(ss / static_cast<double>(sorted.size()));
  agg.p10 = sorted_percentile(sorted, 10.0);
  agg.p90 = sorted_percentile(sorted, 90.0);
  agg.p95 = sorted_percentile(sorted, 95.0);
  agg.p97_5 = sorted_percentile(sorted, 97.5);
  agg.p99 = sorted_percentile(sorted, 99.0);
  if (agg.p10 >= kInequalityRatioFloorMs) agg.inequality_ratio = agg.p90 / agg.p10;
  agg.latency_reduction = agg.p90 - agg.p10;
  return agg;
}

CellValues collect_cell_values(std::span<const SamplePoint> points, const Tessellation& tess) {
  CellValues out;
  for (const auto& p : points) {
    if (auto cell = tess.locate(p.location)) out[*cell].push_back(p.latency_ms);
  }
  return out;
}

CellValues collect_cell_values(const GridSurface& grid, const Tessellation& tess) {
  std::vector<SamplePoint> points;
  for (const auto& [p, v] : grid.masked_points()) points.push_back({p, v});
  return collect_cell_values(points, tess);
}

std::vector<CellAggregate> aggregate_values(const CellValues& values, std::size_t min_count) {
  std::vector<CellAggregate> out;
  for (const auto& [cell, vals] : values) {
    if (vals.size() >= std::max<std::size_t>(1, min_count)) out.push_back(summarize_cell(cell, vals));
  }
  return out;
}

std::vector<CellAggregate> aggregate_cells(std::span<const SamplePoint> points, const Tessellation& tess,
                                           std::size_t min_count) {
  if (points.empty()) throw Error(ErrorCode::EmptySource, "nothing to aggregate");
  return aggregate_values(collect_cell_values(points, tess), min_count);
}

std::vector<CellAggregate> aggregate_cells(const GridSurface& grid, const Tessellation& tess,
                                           std::size_t min_count) {
  if (grid.masked_count() == 0) throw Error(ErrorCode::EmptySource, "grid has no in-mask points");
  return aggregate_values(collect_cell_values(grid, tess), min_count);
}

void write_aggregates_csv(std::ostream& out, std::span<const CellAggregate> aggs, TessellationKind kind) {
  using csv::format_number;
  out << (kind == TessellationKind::Hex ? "cell_q,cell_r" : "unit_id")
      << ",count,mean,std,p10,p90,p95,p97_5,p99,ineq_ratio,lat_reduction\n";
  for (const auto& a : aggs) {
    std::vector<std::string> row;
    if (const auto* hex = std::get_if<HexCellId>(&a.cell)) {
      row = {std::to_string(hex->q), std::to_string(hex->r)};
    } else {
      row = {std::get<std::string>(a.cell)};
    }
    for (const auto& f :
         {std::to_string(a.count), format_number(a.mean), format_number(a.std), format_number(a.p10),
          format_number(a.p90), format_number(a.p95), format_number(a.p97_5), format_number(a.p99),
          a.inequality_ratio ? format_number(*a.inequality_ratio) : std::string(),
          format_number(a.latency_reduction)}) {
      row.push_back(f);
    }
    csv::write_record(out, row);
  }
}

std::vector<CellAggregate> read_aggregates_csv(std::istream& in) {
  std::size_t line = 0;
  const auto header = csv::read_record(in, line);
  if (!header) throw Error(ErrorCode::EmptyInput, "aggregate file is empty");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header->size(); ++i) col[(*header)[i]] = i;
  const bool hex = col.count("cell_q") && col.count("cell_r");
  if (!hex && !col.count("unit_id")) throw Error(ErrorCode::MissingColumn, "expected cell_q,cell_r or unit_id");
  for (const char* name : {"count", "mean", "std", "p10", "p90", "p95", "p97_5", "p99", "ineq_ratio", "lat_reduction"}) {
    if (!col.count(name)) throw Error(ErrorCode::MissingColumn, std::string("missing column '") + name + "'");
  }
  std::vector<CellAggregate> out;
  while (const auto row = csv::read_record(in, line)) {
    if (row->size() == 1 && row->front().empty()) continue;
    if (row->size() != header->size()) {
      throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line) + ": wrong field count");
    }
    const auto& r = *row;
    auto num = [&](const char* name) {
      try {
        return std::stod(r[col.at(name)]);
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line) + ": bad number in '" + name + "'");
      }
    };
    CellAggregate a;
    if (hex) {
      a.cell = HexCellId{std::stoll(r[col.at("cell_q")]), std::stoll(r[col.at("cell_r")])};
    } else {
      a.cell = r[col.at("unit_id")];
    }
    a.count = static_cast<std::size_t>(num("count"));
    a.mean = num("mean");
    a.std = num("std");
    a.p10 = num("p10");
    a.p90 = num("p90");
    a.p95 = num("p95");
    a.p97_5 = num("p97_5");
    a.p99 = num("p99");
    if (!r[col.at("ineq_ratio")].empty()) a.inequality_ratio = num("ineq_ratio");
    a.latency_reduction = num("lat_reduction");
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace latreg
