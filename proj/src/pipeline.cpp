#include "latreg/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "latreg/csv.hpp"
#include "latreg/error.hpp"
#include "latreg/export.hpp"
#include "latreg/graph.hpp"
#include "latreg/parallel.hpp"
#include "latreg/rng.hpp"

namespace latreg {

namespace {

// Seed streams derived from the master seed.
constexpr std::uint64_t kVolatilityStream = 1;
constexpr std::uint64_t kMoransStreamBase = 1000;

std::string to_hex(const unsigned char* bytes, std::size_t n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(kDigits[bytes[i] >> 4]);
    out.push_back(kDigits[bytes[i] & 0xf]);
  }
  return out;
}

std::string sha256_bytes(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Io, "SHA-256 failed");
  }
  return to_hex(digest, len);
}

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& rel, const std::string& content) {
    const auto path = dir_ / rel;
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << content;
    out.close();
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
    entries_.push_back({rel, sha256_bytes(content), content.size()});
  }

  std::vector<ArtifactEntry> finish() {
    std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    auto list = nlohmann::json::array();
    for (const auto& e : entries_) list.push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write manifest.json");
    out << nlohmann::json{{"artifacts", list}}.dump(2) << '\n';
    return entries_;
  }

 private:
  std::filesystem::path dir_;
  std::vector<ArtifactEntry> entries_;
};

template <typename Fn>
std::string render_to_string(Fn&& fn) {
  std::ostringstream out;
  fn(out);
  return out.str();
}

std::string safe_name(const std::string& text) {
  std::string out;
  for (char c : text) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out.empty() ? "_" : out;
}

GeoPoint bbox_center(std::span<const Measurement> ms) {
  double min_lat = HUGE_VAL, max_lat = -HUGE_VAL, min_lon = HUGE_VAL, max_lon = -HUGE_VAL;
  for (const auto& m : ms) {
    min_lat = std::min(min_lat, m.location.lat);
    max_lat = std::max(max_lat, m.location.lat);
    min_lon = std::min(min_lon, m.location.lon);
    max_lon = std::max(max_lon, m.location.lon);
  }
  return {(min_lat + max_lat) / 2.0, (min_lon + max_lon) / 2.0};
}

struct Prepared {
  GeoPoint origin;
  Tessellation tess;
  std::vector<FunnelStep> funnel;
  std::vector<Measurement> kept;
  GridBounds bounds;
};

Prepared prepare(const PipelineConfig& cfg, std::span<const Measurement> ms, const Tessellation* tess) {
  auto filtered = apply_filters(ms, cfg.filters);
  Prepared p;
  p.funnel = std::move(filtered.funnel);
  p.kept = std::move(filtered.kept);
  if (!cfg.isps.empty()) {
    p.kept = filter_isps(p.kept, std::set<std::string>(cfg.isps.begin(), cfg.isps.end()));
    p.funnel.push_back({"isp", p.kept.size()});
  }
  if (p.kept.empty()) throw Error(ErrorCode::EmptyInput, "no measurements left after filtering");

  if (tess != nullptr) {
    p.origin = tess->origin();
    p.tess = *tess;
  } else {
    p.origin = cfg.origin ? *cfg.origin : bbox_center(p.kept);
    p.tess = cfg.polygon_units ? load_polygon_units_file(*cfg.polygon_units, p.origin)
                               : Tessellation::hex(cfg.hex_edge_m, p.origin);
  }
  // One grid frame for every slice so cell sets line up across slices.
  p.bounds = padded_bounds(to_samples(p.kept, p.origin), 0.0);
  return p;
}

struct SliceData {
  std::string key;
  std::size_t n_measurements = 0;
  CellValues values;  // cells with a defined metric only
  std::vector<CellAggregate> aggregates;
  ContiguityGraph topology;
  ContiguityGraph graph;  // topology with metric features
};

SliceData build_slice(const PipelineConfig& cfg, const Prepared& prep, const std::string& key,
                      std::span<const Measurement> ms) {
  SliceData s;
  s.key = key;
  s.n_measurements = ms.size();
  const auto samples = to_samples(ms, prep.origin);
  CellValues all;
  if (cfg.raw_averaging) {
    all = collect_cell_values(samples, prep.tess);
  } else {
    const auto grid = make_grid(samples, cfg.interpolator, prep.bounds, cfg.grid_spacing_m);
    all = collect_cell_values(grid, prep.tess);
  }
  std::map<CellId, double> feature;
  for (auto& agg : aggregate_values(all, cfg.min_cell_count)) {
    const auto v = metric_value(agg, cfg.metric);
    if (!v) continue;
    feature.emplace(agg.cell, *v);
    s.values.emplace(agg.cell, std::move(all.at(agg.cell)));
    s.aggregates.push_back(std::move(agg));
  }
  if (feature.empty()) throw Error(ErrorCode::EmptyCellSet, "no cell has a defined " + std::string(to_string(cfg.metric)));
  std::vector<CellId> cells;
  for (const auto& [cell, v] : feature) cells.push_back(cell);
  s.topology = build_contiguity(cells, prep.tess, cfg.contiguity);
  std::vector<std::vector<double>> features;
  for (const auto& cell : s.topology.cells()) features.push_back({feature.at(cell)});
  s.graph = with_features(s.topology, std::move(features));
  return s;
}

[[noreturn]] void rethrow_for_slice(const std::string& key) {
  try {
    throw;
  } catch (const Error& e) {
    throw Error(e.code(), "slice " + key + ": " + e.message());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "slice " + key + ": " + e.what());
  }
}

std::vector<SliceData> build_slices(const PipelineConfig& cfg, const Prepared& prep,
                                    std::span<const Measurement> ms) {
  std::vector<SliceData> out;
  for (const auto& [key, slice_ms] : partition_slices(ms, cfg.slices)) {
    try {
      out.push_back(build_slice(cfg, prep, key, slice_ms));
    } catch (...) {
      rethrow_for_slice(key);
    }
  }
  return out;
}

std::vector<Clustering> cluster_slices(std::span<const SliceData> slices, int n_clusters, std::size_t floor,
                                       Objective objective, std::size_t max_threads) {
  std::vector<Clustering> out(slices.size());
  std::vector<std::exception_ptr> errors(slices.size());
  parallel_for(
      slices.size(),
      [&](std::size_t i) {
        try {
          out[i] = skater_partition(slices[i].graph, n_clusters, floor, objective);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      },
      max_threads);
  // Report the earliest failing slice regardless of scheduling.
  for (std::size_t i = 0; i < slices.size(); ++i) {
    if (errors[i]) {
      try {
        std::rethrow_exception(errors[i]);
      } catch (...) {
        rethrow_for_slice(slices[i].key);
      }
    }
  }
  return out;
}

std::vector<std::string> slice_keys(std::span<const SliceData> slices) {
  std::vector<std::string> keys;
  for (const auto& s : slices) keys.push_back(s.key);
  return keys;
}

std::vector<SliceResult> run_group(const PipelineConfig& cfg, const Prepared& prep, std::span<const Measurement> ms,
                                   const std::string& prefix, ArtifactWriter& writer,
                                   std::vector<SliceData>* keep_data) {
  auto slices = build_slices(cfg, prep, ms);
  const auto clusterings = cluster_slices(slices, cfg.n_clusters, cfg.floor, cfg.objective, cfg.max_threads);
  std::vector<SliceResult> results;
  const SvgOptions svg;
  for (std::size_t i = 0; i < slices.size(); ++i) {
    auto& s = slices[i];
    SliceResult r;
    r.key = s.key;
    r.n_measurements = s.n_measurements;
    r.clustering = clusterings[i];
    if (cfg.morans) {
      try {
        std::vector<double> values;
        for (const auto& f : s.graph.features()) values.push_back(f[0]);
        r.morans = morans_i(values, s.topology, cfg.permutations, mix_seed(cfg.seed, kMoransStreamBase + i),
                            cfg.morans_weights);
      } catch (...) {
        rethrow_for_slice(s.key);
      }
    }
    const std::string base = prefix + "slice_" + safe_name(s.key);
    writer.write(base + "_cells.csv", render_to_string([&](std::ostream& o) {
                   write_aggregates_csv(o, s.aggregates, prep.tess.kind());
                 }));
    writer.write(base + "_clusters.csv",
                 render_to_string([&](std::ostream& o) { write_clustering_csv(o, r.clustering); }));
    writer.write(base + "_clusters.geojson", clustering_geojson(r.clustering, prep.tess, &s.aggregates).dump(1) + "\n");
    if (cfg.write_svg) {
      SvgOptions opts = svg;
      opts.title = prefix + s.key;
      writer.write(base + "_clusters.svg", clustering_svg(r.clustering, prep.tess, opts));
    }
    r.aggregates = std::move(s.aggregates);
    results.push_back(std::move(r));
  }
  if (keep_data != nullptr) *keep_data = std::move(slices);
  return results;
}

std::optional<PairwiseAri> pairwise(std::span<const SliceResult> slices) {
  if (slices.size() < 2) return std::nullopt;
  std::vector<Clustering> cs;
  std::vector<std::string> keys;
  for (const auto& s : slices) {
    cs.push_back(s.clustering);
    keys.push_back(s.key);
  }
  return median_pairwise_ari(cs, keys, CellSetPolicy::Intersect);
}

double intersect_ari(const Clustering& a, const Clustering& b) {
  std::vector<CellId> common;
  std::set_intersection(a.cells.begin(), a.cells.end(), b.cells.begin(), b.cells.end(), std::back_inserter(common));
  if (common.empty()) return std::numeric_limits<double>::quiet_NaN();
  return adjusted_rand_index(restrict_to(a, common), restrict_to(b, common));
}

// Entry (i, j): median over shared slice keys of the ARI between ISP i's and
// ISP j's clusterings of that slice.
AriMatrix isp_matrix(const std::map<std::string, std::vector<SliceResult>>& by_isp) {
  AriMatrix m;
  std::vector<const std::vector<SliceResult>*> groups;
  for (const auto& [isp, slices] : by_isp) {
    m.labels.push_back(isp);
    groups.push_back(&slices);
  }
  const std::size_t n = groups.size();
  m.values.assign(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      std::vector<double> per_slice;
      for (const auto& a : *groups[i]) {
        for (const auto& b : *groups[j]) {
          if (a.key != b.key) continue;
          const double ari = intersect_ari(a.clustering, b.clustering);
          if (!std::isnan(ari)) per_slice.push_back(ari);
        }
      }
      const double v = per_slice.empty() ? std::numeric_limits<double>::quiet_NaN() : median(per_slice);
      m.values[i][j] = v;
      m.values[j][i] = v;
    }
  }
  return m;
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json slice_summary(const SliceResult& s) {
  nlohmann::json j = {{"key", s.key},
                      {"measurements", s.n_measurements},
                      {"cells", s.clustering.size()},
                      {"clusters", s.clustering.n_clusters}};
  if (s.morans) {
    j["morans_i"] = s.morans->i;
    j["morans_pseudo_p"] = s.morans->pseudo_p;
  }
  return j;
}

nlohmann::json config_summary(const PipelineConfig& cfg, GeoPoint origin, const Tessellation& tess) {
  static constexpr const char* kMethods[] = {"idw", "loess", "stbkr"};
  return {{"origin", {{"lat", origin.lat}, {"lon", origin.lon}}},
          {"unit", tess.kind() == TessellationKind::Hex ? "hex" : "polygon"},
          {"hex_edge_m", cfg.hex_edge_m},
          {"grid_spacing_m", cfg.grid_spacing_m},
          {"averaging", cfg.raw_averaging ? "raw" : "interpolated"},
          {"interpolator",
           {{"method", kMethods[static_cast<int>(cfg.interpolator.method)]},
            {"idw_p", cfg.interpolator.idw_p},
            {"loess_span", cfg.interpolator.loess_span},
            {"stbkr_c", cfg.interpolator.stbkr_c},
            {"stbkr_k", cfg.interpolator.stbkr_k}}},
          {"metric", to_string(cfg.metric)},
          {"n_clusters", cfg.n_clusters},
          {"floor", cfg.floor},
          {"objective", to_string(cfg.objective)},
          {"seed", cfg.seed}};
}

}  // namespace

void validate(const PipelineConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::Config, msg); };
  try {
    validate(c.interpolator);
  } catch (const Error& e) {
    fail(std::string("interpolator: ") + e.message());
  }
  if (!(c.grid_spacing_m > 0.0) || !std::isfinite(c.grid_spacing_m)) fail("spacing must be a positive number of meters");
  if (!(c.hex_edge_m > 0.0) || !std::isfinite(c.hex_edge_m)) fail("edge-length must be a positive number of meters");
  if (c.n_clusters < 1) fail("n-clusters must be >= 1");
  if (c.floor < 1) fail("floor must be >= 1");
  if (c.min_cell_count < 1) fail("min-cell-count must be >= 1");
  if (c.permutations < 0) fail("permutations must be >= 0");
  if (c.replicates < 1) fail("replicates must be >= 1");
  if (c.slices.granularity == SliceSpec::Granularity::FixedWindow && c.slices.window_days < 1) {
    fail("window-days must be >= 1");
  }
  if (c.output_dir.empty()) fail("an output directory is required");
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  validate(config);
  if (config.input.empty()) throw Error(ErrorCode::Config, "no input file given");
  const auto parsed = parse_measurements_file(config.input, config.schema);
  return run_pipeline(config, parsed.measurements);
}

PipelineResult run_pipeline(const PipelineConfig& cfg, std::span<const Measurement> measurements,
                            const Tessellation* tess) {
  validate(cfg);
  const Prepared prep = prepare(cfg, measurements, tess);
  ArtifactWriter writer(cfg.output_dir);
  PipelineResult result;
  result.origin = prep.origin;
  result.funnel = prep.funnel;
  writer.write("funnel.csv", render_to_string([&](std::ostream& o) { write_funnel_csv(o, prep.funnel); }));

  nlohmann::json summary = {{"config", config_summary(cfg, prep.origin, prep.tess)}};
  auto funnel_json = nlohmann::json::array();
  for (const auto& f : prep.funnel) funnel_json.push_back({{"step", f.step}, {"retained", f.retained}});
  summary["funnel"] = funnel_json;

  if (cfg.per_isp) {
    std::set<std::string> isps;
    for (const auto& m : prep.kept) isps.insert(m.isp_id);
    auto per_isp_json = nlohmann::json::object();
    for (const auto& isp : isps) {
      const auto ms = filter_isps(prep.kept, {isp});
      auto slices = run_group(cfg, prep, ms, "isp_" + safe_name(isp) + "/", writer, nullptr);
      auto group = nlohmann::json::array();
      for (const auto& s : slices) group.push_back(slice_summary(s));
      per_isp_json[isp] = {{"slices", group}};
      if (const auto st = pairwise(slices)) per_isp_json[isp]["median_pairwise_ari"] = st->median;
      result.isp_slices.emplace(isp, std::move(slices));
    }
    result.isp_matrix = isp_matrix(result.isp_slices);
    writer.write("isp_ari_matrix.csv",
                 render_to_string([&](std::ostream& o) { write_ari_matrix_csv(o, *result.isp_matrix); }));
    summary["isps"] = per_isp_json;
  } else {
    std::vector<SliceData> data;
    result.slices = run_group(cfg, prep, prep.kept, "", writer, cfg.volatility ? &data : nullptr);
    auto slices_json = nlohmann::json::array();
    for (const auto& s : result.slices) slices_json.push_back(slice_summary(s));
    summary["slices"] = slices_json;

    if (cfg.pairwise_ari) {
      result.stability = pairwise(result.slices);
      if (result.stability) {
        writer.write("ari_matrix.csv",
                     render_to_string([&](std::ostream& o) { write_ari_matrix_csv(o, result.stability->matrix); }));
        summary["median_pairwise_ari"] = number_or_null(result.stability->median);
      }
    }

    if (cfg.volatility) {
      const SliceData* target = &data.front();
      if (!cfg.volatility_slice.empty()) {
        const auto it = std::find_if(data.begin(), data.end(),
                                     [&](const SliceData& s) { return s.key == cfg.volatility_slice; });
        if (it == data.end()) throw Error(ErrorCode::Config, "volatility slice '" + cfg.volatility_slice + "' not found");
        target = &*it;
      }
      VolatilityOptions opts;
      opts.n_clusters = cfg.n_clusters;
      opts.floor = cfg.floor;
      opts.objective = cfg.objective;
      opts.metric = cfg.volatility_metric;
      opts.replicates = cfg.replicates;
      opts.seed = mix_seed(cfg.seed, kVolatilityStream);
      try {
        result.volatility = volatility_map(target->values, target->topology, opts);
      } catch (...) {
        rethrow_for_slice(target->key);
      }
      writer.write("volatility.csv",
                   render_to_string([&](std::ostream& o) { write_volatility_csv(o, *result.volatility); }));
      writer.write("volatility.geojson", volatility_geojson(*result.volatility, prep.tess).dump(1) + "\n");
      if (cfg.write_svg) {
        SvgOptions opts_svg;
        opts_svg.title = "volatility " + target->key;
        writer.write("volatility.svg", volatility_svg(*result.volatility, prep.tess, opts_svg));
      }
      const auto& v = result.volatility->volatility;
      summary["volatility"] = {{"slice", target->key},
                               {"metric", to_string(cfg.volatility_metric)},
                               {"replicates", cfg.replicates},
                               {"mean", std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size())},
                               {"max", *std::max_element(v.begin(), v.end())}};
    }
  }
  writer.write("summary.json", summary.dump(2) + "\n");
  result.manifest = writer.finish();
  return result;
}

std::vector<SweepPoint> run_sweep(const PipelineConfig& cfg, std::span<const Measurement> measurements,
                                  int max_clusters, std::span<const std::size_t> floors, const Tessellation* tess) {
  validate(cfg);
  if (max_clusters < 2) throw Error(ErrorCode::Config, "sweep needs a maximum of at least 2 clusters");
  if (floors.empty()) throw Error(ErrorCode::Config, "sweep needs at least one floor");
  const Prepared prep = prepare(cfg, measurements, tess);
  const auto slices = build_slices(cfg, prep, prep.kept);
  if (slices.size() < 2) throw Error(ErrorCode::InvalidArgument, "sweep needs at least two slices");

  std::vector<SweepPoint> points;
  for (auto floor : floors) {
    for (int n = 2; n <= max_clusters; ++n) points.push_back({floor, n, 0.0});
  }
  // Infeasible (N, floor) combinations are reported as NaN rather than aborting the sweep.
  parallel_for(
      points.size(),
      [&](std::size_t i) {
        auto& pt = points[i];
        try {
          const auto cs = cluster_slices(slices, pt.n_clusters, pt.floor, cfg.objective, 1);
          pt.median_ari = median_pairwise_ari(cs, slice_keys(slices), CellSetPolicy::Intersect).median;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::InfeasibleFloor && e.code() != ErrorCode::TooManyComponents) throw;
          pt.median_ari = std::numeric_limits<double>::quiet_NaN();
        }
      },
      cfg.max_threads);
  return points;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points) {
  csv::write_record(out, {"floor", "n_clusters", "median_ari"});
  for (const auto& p : points) {
    csv::write_record(out, {std::to_string(p.floor), std::to_string(p.n_clusters), csv::format_number(p.median_ari)});
  }
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_bytes(buf.str());
}

}  // namespace latreg
