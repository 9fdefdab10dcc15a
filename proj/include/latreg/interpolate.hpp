#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "latreg/geo.hpp"
#include "latreg/ingest.hpp"
#include "latreg/knn.hpp"

namespace latreg {

/// Distances below this are treated as coincident with a sample.
inline constexpr double kCoincidenceEpsM = 1e-9;

/// Default interpolation grid spacing in meters.
inline constexpr double kDefaultGridSpacingM = 50.0;

struct SamplePoint {
  PlanarPoint location;
  double latency_ms = 0.0;
};

enum class Method { Idw, Loess, Stbkr };

struct InterpolatorConfig {
  Method method = Method::Idw;
  double idw_p = 2.0;       // >= 1
  double loess_span = 0.5;  // (0, 1]
  double stbkr_c = 1.0;     // > 0
  int stbkr_k = 10;         // >= 1
};

/// Throws InvalidArgument for out-of-range parameters of the selected method.
void validate(const InterpolatorConfig& config);

double tricube(double d, double h);

/// Inverse distance weighting over every sample.
double idw_predict(PlanarPoint q, std::span<const SamplePoint> samples, double p);

/// Local linear regression on the max(3, ceil(span * n)) nearest samples with
/// tri-cube weights. Falls back to the weighted mean of those neighbours when
/// their locations are collinear.
double loess_predict(PlanarPoint q, std::span<const SamplePoint> samples, double span);

/// Gaussian kernel regression with bandwidth c * R_k^2, R_k the mean distance
/// to the k nearest samples.
double stbkr_predict(PlanarPoint q, std::span<const SamplePoint> samples, double c, int k);

/// k nearest samples; ties by sample order. Throws KTooLarge.
std::vector<Neighbor> knn_query(PlanarPoint q, std::span<const SamplePoint> samples, std::size_t k);

/// Holds the samples and a neighbour index so repeated queries (grids,
/// holdout evaluation) do not rebuild it.
class Interpolator {
 public:
  Interpolator(std::vector<SamplePoint> samples, const InterpolatorConfig& config);

  double predict(PlanarPoint q) const;
  const InterpolatorConfig& config() const { return config_; }
  std::span<const SamplePoint> samples() const { return samples_; }

 private:
  double predict_idw(PlanarPoint q) const;
  double predict_loess(PlanarPoint q) const;
  double predict_stbkr(PlanarPoint q) const;
  double coincident_mean(PlanarPoint q, bool& found) const;

  std::vector<SamplePoint> samples_;
  InterpolatorConfig config_;
  KdTree tree_;
};

struct GridBounds {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;
};

/// Bounding box of the samples grown by `pad` on every side.
GridBounds padded_bounds(std::span<const SamplePoint> samples, double pad);

/// Regular grid of estimates. Point (i, j) sits at origin + (i, j) * spacing;
/// values are stored row-major with j (northing) as the row.
class GridSurface {
 public:
  GridSurface() = default;
  GridSurface(PlanarPoint origin, double spacing, std::size_t nx, std::size_t ny);

  PlanarPoint origin() const { return origin_; }
  double spacing() const { return spacing_; }
  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }

  /// Geographic origin of the planar frame, carried through grid files.
  GeoPoint projection_origin() const { return projection_origin_; }
  void set_projection_origin(GeoPoint origin) { projection_origin_ = origin; }

  PlanarPoint point(std::size_t i, std::size_t j) const;
  double value(std::size_t i, std::size_t j) const { return values_[j * nx_ + i]; }
  bool masked(std::size_t i, std::size_t j) const { return mask_[j * nx_ + i] != 0; }
  void set(std::size_t i, std::size_t j, double value, bool inside);

  std::size_t masked_count() const;
  /// Every in-mask grid point with its value, in row-major order.
  std::vector<std::pair<PlanarPoint, double>> masked_points() const;

 private:
  PlanarPoint origin_{};
  GeoPoint projection_origin_{};
  double spacing_ = kDefaultGridSpacingM;
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> mask_;
};

/// Evaluates the configured predictor at every grid point inside `mask` (or
/// inside the bounds when no mask is given). nx = floor(width / spacing) + 1.
GridSurface make_grid(std::span<const SamplePoint> samples, const InterpolatorConfig& config,
                      const GridBounds& bounds, double spacing = kDefaultGridSpacingM,
                      const PolygonUnit* mask = nullptr);

/// "# key=value" header (origin_lat, origin_lon, origin_x, origin_y, spacing,
/// nx, ny) then "x,y,value" rows for in-mask points.
void write_grid_csv(std::ostream& out, const GridSurface& grid);
GridSurface read_grid_csv(std::istream& in);

std::vector<SamplePoint> to_samples(std::span<const Measurement> ms, GeoPoint origin);

struct HoldoutRecord {
  GeoPoint location;    // truncated to 4 decimal degrees
  PlanarPoint planar;   // where the estimate was evaluated
  std::size_t n_truths = 0;
  double best_truth = 0.0;
  double estimate = 0.0;
  double abs_error = 0.0;
};

struct HoldoutSummary {
  std::size_t locations = 0;
  double mean_abs_error = 0.0;
  double median_abs_error = 0.0;
  double truth_p10 = 0.0, truth_p50 = 0.0, truth_p90 = 0.0;
  double estimate_p10 = 0.0, estimate_p50 = 0.0, estimate_p90 = 0.0;
  std::size_t estimates_over_50ms = 0;
};

struct HoldoutResult {
  std::vector<HoldoutRecord> records;  // sorted by truncated location
  HoldoutSummary summary;
};

/// Best-case holdout error: test measurements are grouped by location
/// (coordinates truncated to 4 decimals), the estimate is computed once per
/// location from `train`, and compared with the closest of that location's
/// ground-truth values. Throws EmptyTest.
HoldoutResult evaluate_holdout(std::span<const Measurement> train, std::span<const Measurement> test,
                               const InterpolatorConfig& config, GeoPoint origin);

struct StbkrChoice {
  double c = 0.0;
  int k = 0;
  double mean_abs_error = 0.0;
};

/// 8 log-spaced values in [1e-5, 100].
std::vector<double> default_stbkr_c_grid();
/// 8 log-spaced integers in [5, 1000].
std::vector<int> default_stbkr_k_grid();

/// Exhaustive grid search minimising mean best-case error on `validation`.
/// k values are clamped to the training size; ties prefer smaller k, then c.
StbkrChoice tune_stbkr(std::span<const Measurement> train, std::span<const Measurement> validation,
                       GeoPoint origin, std::span<const double> c_grid, std::span<const int> k_grid);

}  // namespace latreg
