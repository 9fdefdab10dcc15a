#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latreg/aggregate.hpp"
#include "latreg/evaluate.hpp"
#include "latreg/geo.hpp"
#include "latreg/ingest.hpp"
#include "latreg/interpolate.hpp"
#include "latreg/regionalize.hpp"
#include "latreg/volatility.hpp"

namespace latreg {

inline constexpr int kDefaultClusters = 7;
inline constexpr std::size_t kDefaultFloor = 2;
inline constexpr int kDefaultReplicates = 1000;

struct PipelineConfig {
  std::filesystem::path input;
  ColumnSchema schema;
  FilterPolicy filters;
  SliceSpec slices;

  InterpolatorConfig interpolator;
  double grid_spacing_m = kDefaultGridSpacingM;
  // Aggregate the measurements directly instead of an interpolated grid.
  bool raw_averaging = false;

  double hex_edge_m = kDefaultHexEdgeM;
  std::optional<std::filesystem::path> polygon_units;
  Contiguity contiguity = Contiguity::Rook;
  // Projection origin; the centre of the filtered data's bounding box when unset.
  std::optional<GeoPoint> origin;

  Metric metric = Metric::Mean;
  std::size_t min_cell_count = 1;
  int n_clusters = kDefaultClusters;
  std::size_t floor = kDefaultFloor;
  Objective objective = Objective::Ssd;

  bool pairwise_ari = true;
  bool morans = false;
  int permutations = kDefaultPermutations;
  SpatialWeights morans_weights = SpatialWeights::Binary;

  bool volatility = false;
  int replicates = kDefaultReplicates;
  Metric volatility_metric = Metric::P10;
  // Slice key the bootstrap runs on; the first slice when empty.
  std::string volatility_slice;

  // Non-empty: keep only these ISPs. With per_isp set, every ISP is clustered
  // separately and compared month by month.
  std::vector<std::string> isps;
  bool per_isp = false;

  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  bool write_svg = true;
  std::size_t max_threads = 0;
};

/// Throws Config for values no stage can run with.
void validate(const PipelineConfig& config);

struct ArtifactEntry {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct SliceResult {
  std::string key;
  std::size_t n_measurements = 0;
  std::vector<CellAggregate> aggregates;
  Clustering clustering;
  std::optional<MoransResult> morans;
};

struct PipelineResult {
  GeoPoint origin;
  std::vector<FunnelStep> funnel;
  std::vector<SliceResult> slices;
  std::optional<PairwiseAri> stability;
  // Per-ISP mode only.
  std::map<std::string, std::vector<SliceResult>> isp_slices;
  std::optional<AriMatrix> isp_matrix;
  std::optional<VolatilityMap> volatility;
  std::vector<ArtifactEntry> manifest;
};

/// Reads cfg.input and runs every stage, writing artifacts and manifest.json
/// under cfg.output_dir.
PipelineResult run_pipeline(const PipelineConfig& config);

/// Same, starting from measurements already in memory. `tess` overrides the
/// configured tessellation; its origin then becomes the projection origin.
PipelineResult run_pipeline(const PipelineConfig& config, std::span<const Measurement> measurements,
                            const Tessellation* tess = nullptr);

struct SweepPoint {
  std::size_t floor = 1;
  int n_clusters = 2;
  double median_ari = 0.0;
};

/// Median pairwise ARI across slices for every N in [2, max_clusters] and
/// every floor. Rows are ordered by floor, then N.
std::vector<SweepPoint> run_sweep(const PipelineConfig& config, std::span<const Measurement> measurements,
                                  int max_clusters, std::span<const std::size_t> floors,
                                  const Tessellation* tess = nullptr);
void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace latreg
