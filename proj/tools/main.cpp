#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "latreg/aggregate.hpp"
#include "latreg/error.hpp"
#include "latreg/evaluate.hpp"
#include "latreg/export.hpp"
#include "latreg/graph.hpp"
#include "latreg/ingest.hpp"
#include "latreg/interpolate.hpp"
#include "latreg/pipeline.hpp"
#include "latreg/regionalize.hpp"
#include "latreg/synth.hpp"
#include "latreg/volatility.hpp"

namespace {

using namespace latreg;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return in;
}

std::string slurp(const std::string& path) {
  auto in = open_in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

GeoPoint parse_origin(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw Error(ErrorCode::Config, "origin must be 'lat,lon', got '" + text + "'");
  try {
    return make_geo_point(std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1)));
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::Config, "origin must be 'lat,lon', got '" + text + "'");
  }
}

// "hex" or "polygon:<file>"
std::optional<std::string> polygon_file(const std::string& unit) {
  if (unit == "hex") return std::nullopt;
  if (unit.rfind("polygon:", 0) == 0 && unit.size() > 8) return unit.substr(8);
  throw Error(ErrorCode::Config, "--unit must be 'hex' or 'polygon:<file>', got '" + unit + "'");
}

Contiguity parse_contiguity(const std::string& text) {
  if (text == "rook") return Contiguity::Rook;
  if (text == "queen") return Contiguity::Queen;
  throw Error(ErrorCode::Config, "contiguity must be rook or queen");
}

Method parse_method(const std::string& text) {
  if (text == "idw") return Method::Idw;
  if (text == "loess") return Method::Loess;
  if (text == "stbkr") return Method::Stbkr;
  throw Error(ErrorCode::Config, "method must be idw, loess or stbkr");
}

struct UnitArgs {
  std::string unit = "hex";
  double edge_length = kDefaultHexEdgeM;
  std::string origin;
  std::string contiguity = "rook";
};

void add_unit_options(CLI::App* sub, UnitArgs& a) {
  sub->add_option("--unit", a.unit, "hex or polygon:<GeoJSON file with unit_id properties>")->capture_default_str();
  sub->add_option("--edge-length", a.edge_length, "hexagon edge length in meters")->capture_default_str();
  sub->add_option("--origin", a.origin, "projection origin 'lat,lon'");
  sub->add_option("--contiguity", a.contiguity, "rook or queen (polygon units)")->capture_default_str();
}

// Resolves the tessellation; `fallback` supplies the origin when --origin is
// not given and the units file cannot provide one.
Tessellation make_tessellation(const UnitArgs& a, std::optional<GeoPoint> fallback) {
  const auto file = polygon_file(a.unit);
  std::optional<GeoPoint> origin = a.origin.empty() ? fallback : std::optional(parse_origin(a.origin));
  if (file) {
    const auto text = slurp(*file);
    return load_polygon_units(text, origin ? *origin : polygon_units_center(text));
  }
  if (!origin) throw Error(ErrorCode::Config, "--origin is required here for hexagon output");
  return Tessellation::hex(a.edge_length, *origin);
}

GeoPoint data_center(const std::vector<Measurement>& ms) {
  if (ms.empty()) throw Error(ErrorCode::EmptyInput, "no measurements");
  double lat0 = ms[0].location.lat, lat1 = lat0, lon0 = ms[0].location.lon, lon1 = lon0;
  for (const auto& m : ms) {
    lat0 = std::min(lat0, m.location.lat);
    lat1 = std::max(lat1, m.location.lat);
    lon0 = std::min(lon0, m.location.lon);
    lon1 = std::max(lon1, m.location.lon);
  }
  return {(lat0 + lat1) / 2, (lon0 + lon1) / 2};
}

std::vector<Measurement> read_measurements(const std::string& path) {
  auto parsed = parse_measurements_file(path);
  if (!parsed.skipped.empty()) {
    std::cerr << path << ": skipped " << parsed.skipped.size() << " invalid rows (first at line "
              << parsed.skipped.front().line << ": " << parsed.skipped.front().reason << ")\n";
  }
  for (const auto& w : parsed.warnings) std::cerr << path << ": " << w << "\n";
  return std::move(parsed.measurements);
}

std::vector<Measurement> pick_slice(std::vector<Measurement> ms, const std::string& key) {
  if (key.empty()) return ms;
  auto slices = partition_slices(ms);
  const auto it = slices.find(key);
  if (it == slices.end()) throw Error(ErrorCode::Config, "no measurements in slice " + key);
  return std::move(it->second);
}

// Cell values from a grid file or, for raw averaging, a measurement file.
struct CellSource {
  CellValues values;
  Tessellation tess;
};

CellSource load_cell_values(const std::string& grid_path, const std::string& input_path, const std::string& slice,
                            const UnitArgs& unit) {
  if (grid_path.empty() == input_path.empty()) {
    throw Error(ErrorCode::Config, "give exactly one of --grid or --input");
  }
  if (!grid_path.empty()) {
    auto in = open_in(grid_path);
    const auto grid = read_grid_csv(in);
    auto tess = make_tessellation(unit, grid.projection_origin());
    return {collect_cell_values(grid, tess), std::move(tess)};
  }
  const auto ms = pick_slice(read_measurements(input_path), slice);
  auto tess = make_tessellation(unit, data_center(ms));
  return {collect_cell_values(to_samples(ms, tess.origin()), tess), std::move(tess)};
}

struct PipelineArgs {
  std::string input;
  std::string out = "out";
  std::uint64_t seed = 0;
  UnitArgs unit;
  double spacing = kDefaultGridSpacingM;
  std::string method = "idw";
  double idw_p = 2.0;
  double loess_span = 0.5;
  double stbkr_c = 1.0;
  int stbkr_k = 10;
  bool raw = false;
  std::string metric = "mean";
  std::size_t min_count = 1;
  int n_clusters = kDefaultClusters;
  std::size_t floor = kDefaultFloor;
  std::string objective = "ssd";
  std::vector<std::string> isps;
  bool per_isp = false;
  bool keep_vpn = false;
  bool any_server = false;
  bool allow_ip_location = false;
  int window_days = 0;
  bool morans = false;
  int permutations = kDefaultPermutations;
  bool volatility = false;
  int replicates = kDefaultReplicates;
  std::string volatility_metric = "p10";
  std::string volatility_slice;
  bool no_svg = false;
  std::size_t threads = 0;
};

void add_interpolator_options(CLI::App* sub, std::string& method, double& p, double& span, double& c, int& k) {
  sub->add_option("--method", method, "idw, loess or stbkr")->capture_default_str();
  sub->add_option("--idw-p", p, "IDW power")->capture_default_str();
  sub->add_option("--loess-span", span, "LOESS neighbourhood fraction")->capture_default_str();
  sub->add_option("--stbkr-c", c, "STBKR bandwidth scale")->capture_default_str();
  sub->add_option("--stbkr-k", k, "STBKR neighbour count")->capture_default_str();
}

void add_pipeline_options(CLI::App* sub, PipelineArgs& a) {
  sub->add_option("--input", a.input, "measurement CSV")->required();
  sub->add_option("--out", a.out, "output directory")->capture_default_str();
  sub->add_option("--seed", a.seed, "master seed")->capture_default_str();
  add_unit_options(sub, a.unit);
  sub->add_option("--spacing", a.spacing, "grid spacing in meters")->capture_default_str();
  add_interpolator_options(sub, a.method, a.idw_p, a.loess_span, a.stbkr_c, a.stbkr_k);
  sub->add_flag("--raw", a.raw, "average raw measurements instead of the interpolated grid");
  sub->add_option("--metric", a.metric, "mean, p10, p90, p95, p97_5, p99, ineq_ratio, lat_reduction")
      ->capture_default_str();
  sub->add_option("--min-count", a.min_count, "drop cells with fewer values")->capture_default_str();
  sub->add_option("--n-clusters", a.n_clusters, "number of regions")->capture_default_str();
  sub->add_option("--floor", a.floor, "minimum cells per region")->capture_default_str();
  sub->add_option("--objective", a.objective, "ssd or max_edge_weight")->capture_default_str();
  sub->add_option("--isp", a.isps, "keep only these ISPs (repeatable)");
  sub->add_flag("--per-isp", a.per_isp, "cluster each ISP separately and compare them");
  sub->add_flag("--keep-vpn", a.keep_vpn, "do not drop VPN measurements");
  sub->add_flag("--any-server", a.any_server, "keep manually selected servers");
  sub->add_flag("--allow-ip-location", a.allow_ip_location, "keep IP-geolocated measurements");
  sub->add_option("--window-days", a.window_days, "fixed-length slices instead of calendar months");
  sub->add_flag("--morans", a.morans, "compute Moran's I per slice");
  sub->add_option("--permutations", a.permutations, "Moran's I permutations")->capture_default_str();
  sub->add_flag("--volatility", a.volatility, "bootstrap per-cell volatility");
  sub->add_option("--replicates", a.replicates, "bootstrap replicates")->capture_default_str();
  sub->add_option("--volatility-metric", a.volatility_metric, "metric clustered in each replicate")
      ->capture_default_str();
  sub->add_option("--volatility-slice", a.volatility_slice, "slice key for volatility (default: first)");
  sub->add_flag("--no-svg", a.no_svg, "skip SVG maps");
  sub->add_option("--threads", a.threads, "worker threads (0 = all cores)");
}

PipelineConfig to_config(const PipelineArgs& a) {
  PipelineConfig c;
  c.input = a.input;
  c.output_dir = a.out;
  c.seed = a.seed;
  c.filters.drop_vpn = !a.keep_vpn;
  c.filters.require_autoselected_server = !a.any_server;
  c.filters.require_gps = !a.allow_ip_location;
  if (a.window_days > 0) {
    c.slices.granularity = SliceSpec::Granularity::FixedWindow;
    c.slices.window_days = a.window_days;
  }
  c.interpolator.method = parse_method(a.method);
  c.interpolator.idw_p = a.idw_p;
  c.interpolator.loess_span = a.loess_span;
  c.interpolator.stbkr_c = a.stbkr_c;
  c.interpolator.stbkr_k = a.stbkr_k;
  c.grid_spacing_m = a.spacing;
  c.raw_averaging = a.raw;
  c.hex_edge_m = a.unit.edge_length;
  if (const auto file = polygon_file(a.unit.unit)) c.polygon_units = *file;
  c.contiguity = parse_contiguity(a.unit.contiguity);
  if (!a.unit.origin.empty()) c.origin = parse_origin(a.unit.origin);
  c.metric = parse_metric(a.metric);
  c.min_cell_count = a.min_count;
  c.n_clusters = a.n_clusters;
  c.floor = a.floor;
  c.objective = parse_objective(a.objective);
  c.isps = a.isps;
  c.per_isp = a.per_isp;
  c.morans = a.morans;
  c.permutations = a.permutations;
  c.volatility = a.volatility;
  c.replicates = a.replicates;
  c.volatility_metric = parse_metric(a.volatility_metric);
  c.volatility_slice = a.volatility_slice;
  c.write_svg = !a.no_svg;
  c.max_threads = a.threads;
  return c;
}

void write_text(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latency regionalization: interpolate, aggregate, cluster and assess stability"};
  app.set_config("--config", "", "INI file; keys under [<subcommand>] set that subcommand's options");
  app.require_subcommand(1);

  // synth
  struct {
    std::string out;
    std::string truth;
    std::uint64_t seed = 0;
    int months = 6;
    int points_per_month = 5000;
    double noise_std = 3.0;
    double half_width = 3000.0;
    int rows_per_band = 6;
    double edge_length = kDefaultHexEdgeM;
    bool lognormal = false;
  } synth_args;
  auto* synth = app.add_subcommand("synth", "generate measurements with planted regions");
  synth->add_option("--out", synth_args.out, "measurement CSV to write")->required();
  synth->add_option("--truth", synth_args.truth, "optional CSV of id,region");
  synth->add_option("--seed", synth_args.seed)->capture_default_str();
  synth->add_option("--months", synth_args.months)->capture_default_str();
  synth->add_option("--points-per-month", synth_args.points_per_month)->capture_default_str();
  synth->add_option("--noise-std", synth_args.noise_std, "ms")->capture_default_str();
  synth->add_option("--half-width", synth_args.half_width, "east-west half extent in meters")->capture_default_str();
  synth->add_option("--rows-per-band", synth_args.rows_per_band, "hexagon rows per planted band")->capture_default_str();
  synth->add_option("--edge-length", synth_args.edge_length, "hexagon edge the bands align to")->capture_default_str();
  synth->add_flag("--lognormal", synth_args.lognormal, "log-normal instead of truncated Gaussian noise");
  synth->callback([&] {
    auto s = four_region_scenario(synth_args.edge_length, synth_args.rows_per_band, synth_args.half_width);
    s.seed = synth_args.seed;
    s.months = synth_args.months;
    s.points_per_month = synth_args.points_per_month;
    s.noise_std_ms = synth_args.noise_std;
    if (synth_args.lognormal) s.noise = NoiseModel::LogNormal;
    const auto result = generate(s);
    auto out = open_out(synth_args.out);
    write_measurements_csv(out, result.measurements);
    if (!synth_args.truth.empty()) {
      auto truth = open_out(synth_args.truth);
      truth << "id,region\n";
      for (std::size_t i = 0; i < result.measurements.size(); ++i) {
        truth << result.measurements[i].id << ',' << result.regions[i] << '\n';
      }
    }
    std::cerr << "wrote " << result.measurements.size() << " measurements\n";
  });

  // ingest
  struct {
    std::string input;
    std::string out;
    std::string funnel;
    std::vector<std::string> isps;
    bool keep_vpn = false;
    bool any_server = false;
    bool allow_ip_location = false;
  } ingest_args;
  auto* ingest = app.add_subcommand("ingest", "validate and filter a measurement CSV");
  ingest->add_option("--input", ingest_args.input)->required();
  ingest->add_option("--out", ingest_args.out, "filtered CSV")->required();
  ingest->add_option("--funnel", ingest_args.funnel, "CSV of rows retained per filter step");
  ingest->add_option("--isp", ingest_args.isps, "keep only these ISPs (repeatable)");
  ingest->add_flag("--keep-vpn", ingest_args.keep_vpn);
  ingest->add_flag("--any-server", ingest_args.any_server);
  ingest->add_flag("--allow-ip-location", ingest_args.allow_ip_location);
  ingest->callback([&] {
    const auto ms = read_measurements(ingest_args.input);
    FilterPolicy policy;
    policy.drop_vpn = !ingest_args.keep_vpn;
    policy.require_autoselected_server = !ingest_args.any_server;
    policy.require_gps = !ingest_args.allow_ip_location;
    auto filtered = apply_filters(ms, policy);
    if (!ingest_args.isps.empty()) {
      filtered.kept = filter_isps(filtered.kept, {ingest_args.isps.begin(), ingest_args.isps.end()});
      filtered.funnel.push_back({"isp", filtered.kept.size()});
    }
    auto out = open_out(ingest_args.out);
    write_measurements_csv(out, filtered.kept);
    if (!ingest_args.funnel.empty()) {
      auto f = open_out(ingest_args.funnel);
      write_funnel_csv(f, filtered.funnel);
    }
    for (const auto& step : filtered.funnel) std::cerr << step.step << ": " << step.retained << "\n";
  });

  // interpolate
  struct {
    std::string input;
    std::string out;
    std::string slice;
    std::string origin;
    std::string method = "idw";
    double idw_p = 2.0;
    double loess_span = 0.5;
    double stbkr_c = 1.0;
    int stbkr_k = 10;
    double spacing = kDefaultGridSpacingM;
    double pad = 0.0;
    std::string holdout;
    bool tune = false;
    std::uint64_t seed = 0;
  } interp_args;
  auto* interp = app.add_subcommand("interpolate", "estimate latency on a regular grid");
  interp->add_option("--input", interp_args.input)->required();
  interp->add_option("--out", interp_args.out, "grid CSV");
  interp->add_option("--slice", interp_args.slice, "only this YYYY-MM month");
  interp->add_option("--origin", interp_args.origin, "projection origin 'lat,lon' (default: data centre)");
  add_interpolator_options(interp, interp_args.method, interp_args.idw_p, interp_args.loess_span,
                           interp_args.stbkr_c, interp_args.stbkr_k);
  interp->add_option("--spacing", interp_args.spacing, "grid spacing in meters")->capture_default_str();
  interp->add_option("--pad", interp_args.pad, "extend the grid beyond the data by this many meters");
  interp->add_option("--holdout", interp_args.holdout, "write best-case holdout error (JSON) to this file");
  interp->add_flag("--tune-stbkr", interp_args.tune, "grid-search STBKR c and k on a user-grouped split");
  interp->add_option("--seed", interp_args.seed, "seed of the user split")->capture_default_str();
  interp->callback([&] {
    const auto ms = pick_slice(read_measurements(interp_args.input), interp_args.slice);
    const GeoPoint origin = interp_args.origin.empty() ? data_center(ms) : parse_origin(interp_args.origin);
    InterpolatorConfig cfg;
    cfg.method = parse_method(interp_args.method);
    cfg.idw_p = interp_args.idw_p;
    cfg.loess_span = interp_args.loess_span;
    cfg.stbkr_c = interp_args.stbkr_c;
    cfg.stbkr_k = interp_args.stbkr_k;
    if (interp_args.tune) {
      const auto split = split_by_user(ms, 0.8, interp_args.seed);
      const auto inner = split_by_user(split.train, 0.8, interp_args.seed + 1);
      const auto cs = default_stbkr_c_grid();
      const auto ks = default_stbkr_k_grid();
      const auto best = tune_stbkr(inner.train, inner.test, origin, cs, ks);
      cfg.method = Method::Stbkr;
      cfg.stbkr_c = best.c;
      cfg.stbkr_k = best.k;
      std::cerr << "stbkr c=" << best.c << " k=" << best.k << " validation error " << best.mean_abs_error << " ms\n";
    }
    validate(cfg);
    if (!interp_args.holdout.empty()) {
      const auto split = split_by_user(ms, 0.8, interp_args.seed);
      const auto result = evaluate_holdout(split.train, split.test, cfg, origin);
      const auto& s = result.summary;
      nlohmann::json j = {{"locations", s.locations},
                          {"mean_abs_error", s.mean_abs_error},
                          {"median_abs_error", s.median_abs_error},
                          {"truth_percentiles", {s.truth_p10, s.truth_p50, s.truth_p90}},
                          {"estimate_percentiles", {s.estimate_p10, s.estimate_p50, s.estimate_p90}},
                          {"estimates_over_50ms", s.estimates_over_50ms}};
      write_text(interp_args.holdout, j.dump(2) + "\n");
    }
    if (!interp_args.out.empty()) {
      const auto samples = to_samples(ms, origin);
      auto grid = make_grid(samples, cfg, padded_bounds(samples, interp_args.pad), interp_args.spacing);
      grid.set_projection_origin(origin);
      auto out = open_out(interp_args.out);
      write_grid_csv(out, grid);
    }
  });

  // aggregate
  struct {
    std::string grid;
    std::string input;
    std::string slice;
    std::string out;
    std::size_t min_count = 1;
    UnitArgs unit;
  } agg_args;
  auto* agg = app.add_subcommand("aggregate", "per-cell latency statistics");
  agg->add_option("--grid", agg_args.grid, "grid CSV from interpolate");
  agg->add_option("--input", agg_args.input, "measurement CSV (raw averaging)");
  agg->add_option("--slice", agg_args.slice, "only this YYYY-MM month (with --input)");
  agg->add_option("--out", agg_args.out, "cell statistics CSV")->required();
  agg->add_option("--min-count", agg_args.min_count)->capture_default_str();
  add_unit_options(agg, agg_args.unit);
  agg->callback([&] {
    const auto src = load_cell_values(agg_args.grid, agg_args.input, agg_args.slice, agg_args.unit);
    const auto aggs = aggregate_values(src.values, agg_args.min_count);
    auto out = open_out(agg_args.out);
    write_aggregates_csv(out, aggs, src.tess.kind());
    std::cerr << aggs.size() << " cells\n";
  });

  // regionalize
  struct {
    std::string cells;
    std::string out;
    std::string geojson;
    std::string svg;
    std::string metric = "mean";
    int n_clusters = kDefaultClusters;
    std::size_t floor = kDefaultFloor;
    std::string objective = "ssd";
    UnitArgs unit;
  } reg_args;
  auto* reg = app.add_subcommand("regionalize", "partition cells into contiguous regions");
  reg->add_option("--cells", reg_args.cells, "cell statistics CSV from aggregate")->required();
  reg->add_option("--out", reg_args.out, "cell,label CSV")->required();
  reg->add_option("--geojson", reg_args.geojson, "also write a GeoJSON map");
  reg->add_option("--svg", reg_args.svg, "also write an SVG map");
  reg->add_option("--metric", reg_args.metric)->capture_default_str();
  reg->add_option("--n-clusters", reg_args.n_clusters)->capture_default_str();
  reg->add_option("--floor", reg_args.floor)->capture_default_str();
  reg->add_option("--objective", reg_args.objective, "ssd or max_edge_weight")->capture_default_str();
  add_unit_options(reg, reg_args.unit);
  reg->callback([&] {
    auto in = open_in(reg_args.cells);
    const auto aggs = read_aggregates_csv(in);
    const Metric metric = parse_metric(reg_args.metric);
    const bool needs_origin = !reg_args.geojson.empty() || !reg_args.svg.empty();
    // Contiguity of hexagons does not depend on the origin.
    const auto tess = make_tessellation(
        reg_args.unit, needs_origin ? std::nullopt : std::optional<GeoPoint>(GeoPoint{0.0, 0.0}));
    std::map<CellId, double> feature;
    for (const auto& a : aggs) {
      if (const auto v = metric_value(a, metric)) feature.emplace(a.cell, *v);
    }
    std::vector<CellId> cells;
    for (const auto& [cell, v] : feature) cells.push_back(cell);
    const auto topology = build_contiguity(cells, tess, parse_contiguity(reg_args.unit.contiguity));
    std::vector<std::vector<double>> features;
    for (const auto& cell : topology.cells()) features.push_back({feature.at(cell)});
    const auto graph = with_features(topology, std::move(features));
    const auto clustering = skater_partition(graph, reg_args.n_clusters, reg_args.floor,
                                             parse_objective(reg_args.objective));
    auto out = open_out(reg_args.out);
    write_clustering_csv(out, clustering);
    if (!reg_args.geojson.empty()) write_text(reg_args.geojson, clustering_geojson(clustering, tess, &aggs).dump(1) + "\n");
    if (!reg_args.svg.empty()) write_text(reg_args.svg, clustering_svg(clustering, tess));
    std::cerr << clustering.n_clusters << " regions over " << clustering.size() << " cells\n";
  });

  // stability
  struct {
    std::vector<std::string> clusters;
    std::string out;
    std::string policy = "intersect";
  } stab_args;
  auto* stab = app.add_subcommand("stability", "pairwise ARI between clusterings");
  stab->add_option("--clusters", stab_args.clusters, "cell,label CSV files")->required()->expected(2, -1);
  stab->add_option("--out", stab_args.out, "ARI matrix CSV");
  stab->add_option("--policy", stab_args.policy, "intersect or identical cell sets")->capture_default_str();
  stab->callback([&] {
    std::vector<Clustering> cs;
    for (const auto& path : stab_args.clusters) {
      auto in = open_in(path);
      cs.push_back(read_clustering_csv(in));
    }
    CellSetPolicy policy = CellSetPolicy::Intersect;
    if (stab_args.policy == "identical") {
      policy = CellSetPolicy::RequireIdentical;
    } else if (stab_args.policy != "intersect") {
      throw Error(ErrorCode::Config, "policy must be intersect or identical");
    }
    const auto result = median_pairwise_ari(cs, stab_args.clusters, policy);
    if (!stab_args.out.empty()) {
      auto out = open_out(stab_args.out);
      write_ari_matrix_csv(out, result.matrix);
    }
    std::cout << "median_pairwise_ari," << result.median << "\n";
  });

  // volatility
  struct {
    std::string grid;
    std::string input;
    std::string slice;
    std::string out = "volatility";
    std::string metric = "p10";
    int n_clusters = kDefaultClusters;
    std::size_t floor = kDefaultFloor;
    std::string objective = "ssd";
    int replicates = kDefaultReplicates;
    std::uint64_t seed = 0;
    UnitArgs unit;
  } vol_args;
  auto* vol = app.add_subcommand("volatility", "bootstrap per-cell region volatility");
  vol->add_option("--grid", vol_args.grid, "grid CSV from interpolate");
  vol->add_option("--input", vol_args.input, "measurement CSV (raw values)");
  vol->add_option("--slice", vol_args.slice, "only this YYYY-MM month (with --input)");
  vol->add_option("--out", vol_args.out, "output directory")->capture_default_str();
  vol->add_option("--metric", vol_args.metric)->capture_default_str();
  vol->add_option("--n-clusters", vol_args.n_clusters)->capture_default_str();
  vol->add_option("--floor", vol_args.floor)->capture_default_str();
  vol->add_option("--objective", vol_args.objective)->capture_default_str();
  vol->add_option("--replicates", vol_args.replicates)->capture_default_str();
  vol->add_option("--seed", vol_args.seed)->capture_default_str();
  add_unit_options(vol, vol_args.unit);
  vol->callback([&] {
    const auto src = load_cell_values(vol_args.grid, vol_args.input, vol_args.slice, vol_args.unit);
    std::vector<CellId> cells;
    for (const auto& [cell, v] : src.values) cells.push_back(cell);
    const auto topology = build_contiguity(cells, src.tess, parse_contiguity(vol_args.unit.contiguity));
    VolatilityOptions opts;
    opts.n_clusters = vol_args.n_clusters;
    opts.floor = vol_args.floor;
    opts.objective = parse_objective(vol_args.objective);
    opts.metric = parse_metric(vol_args.metric);
    opts.replicates = vol_args.replicates;
    opts.seed = vol_args.seed;
    const auto map = volatility_map(src.values, topology, opts);
    std::filesystem::create_directories(vol_args.out);
    const std::filesystem::path dir = vol_args.out;
    {
      auto out = open_out((dir / "volatility.csv").string());
      write_volatility_csv(out, map);
    }
    write_text((dir / "volatility.geojson").string(), volatility_geojson(map, src.tess).dump(1) + "\n");
    write_text((dir / "volatility.svg").string(), volatility_svg(map, src.tess));
  });

  // sweep
  PipelineArgs sweep_args;
  sweep_args.out = "sweep.csv";
  int sweep_max = 10;
  std::vector<std::size_t> sweep_floors{kDefaultFloor};
  auto* sweep = app.add_subcommand("sweep", "median pairwise ARI over N and floor");
  add_pipeline_options(sweep, sweep_args);
  sweep->get_option("--out")->description("sweep CSV (floor,n_clusters,median_ari)");
  sweep->add_option("--max-clusters", sweep_max, "largest N (N runs from 2)")->capture_default_str();
  sweep->add_option("--floors", sweep_floors, "floor values (repeatable or comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  sweep->callback([&] {
    const auto cfg = to_config(sweep_args);
    const auto ms = read_measurements(sweep_args.input);
    const auto points = run_sweep(cfg, ms, sweep_max, sweep_floors);
    auto out = open_out(sweep_args.out);
    write_sweep_csv(out, points);
  });

  // pipeline
  PipelineArgs pipe_args;
  auto* pipe = app.add_subcommand("pipeline", "run every stage and write a hashed artifact manifest");
  add_pipeline_options(pipe, pipe_args);
  pipe->callback([&] {
    const auto result = run_pipeline(to_config(pipe_args));
    for (const auto& a : result.manifest) std::cout << a.sha256 << "  " << a.path << "\n";
    if (result.stability) std::cerr << "median pairwise ARI " << result.stability->median << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
