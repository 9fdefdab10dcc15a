#include "latreg/interpolate.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "latreg/aggregate.hpp"
#include "latreg/csv.hpp"
#include "latreg/error.hpp"
#include "latreg/parallel.hpp"

namespace latreg {

namespace {

constexpr double kEps2 = kCoincidenceEpsM * kCoincidenceEpsM;

double squared(PlanarPoint a, PlanarPoint b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

std::vector<PlanarPoint> locations(std::span<const SamplePoint> samples) {
  std::vector<PlanarPoint> pts;
  pts.reserve(samples.size());
  for (const auto& s : samples) pts.push_back(s.location);
  return pts;
}

std::int64_t truncate4(double degrees) {
  const double scaled = degrees * 1e4;
  // Nudge away from zero so values already at 4 decimals survive rounding.
  return static_cast<std::int64_t>(std::trunc(scaled + (scaled >= 0.0 ? 1e-7 : -1e-7)));
}

}  // namespace

void validate(const InterpolatorConfig& config) {
  switch (config.method) {
    case Method::Idw:
      if (!(config.idw_p >= 1.0) || !std::isfinite(config.idw_p)) {
        throw Error(ErrorCode::InvalidArgument, "idw_p must be >= 1");
      }
      break;
    case Method::Loess:
      if (!(config.loess_span > 0.0 && config.loess_span <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "loess_span must lie in (0, 1]");
      }
      break;
    case Method::Stbkr:
      if (!(config.stbkr_c > 0.0) || !std::isfinite(config.stbkr_c)) {
        throw Error(ErrorCode::InvalidArgument, "stbkr_c must be > 0");
      }
      if (config.stbkr_k < 1) throw Error(ErrorCode::InvalidArgument, "stbkr_k must be >= 1");
      break;
  }
}

double tricube(double d, double h) {
  if (!(h > 0.0) || d > h) return 0.0;
  const double u = d / h;
  const double t = 1.0 - u * u * u;
  return t * t * t;
}

Interpolator::Interpolator(std::vector<SamplePoint> samples, const InterpolatorConfig& config)
    : samples_(std::move(samples)), config_(config) {
  validate(config_);
  if (samples_.empty()) throw Error(ErrorCode::NoSamples, "interpolation needs at least one sample");
  for (const auto& s : samples_) {
    if (!std::isfinite(s.location.x) || !std::isfinite(s.location.y) || !std::isfinite(s.latency_ms)) {
      throw Error(ErrorCode::InvalidArgument, "non-finite sample");
    }
  }
  if (config_.method == Method::Loess && samples_.size() < 3) {
    throw Error(ErrorCode::TooFewSamples, "LOESS needs at least 3 samples");
  }
  if (config_.method == Method::Stbkr && static_cast<std::size_t>(config_.stbkr_k) > samples_.size()) {
    throw Error(ErrorCode::KTooLarge, "stbkr_k=" + std::to_string(config_.stbkr_k) + " exceeds " +
                                          std::to_string(samples_.size()) + " samples");
  }
  if (config_.method != Method::Idw) tree_ = KdTree(locations(samples_));
}

double Interpolator::predict(PlanarPoint q) const {
  switch (config_.method) {
    case Method::Idw: return predict_idw(q);
    case Method::Loess: return predict_loess(q);
    case Method::Stbkr: return predict_stbkr(q);
  }
  return 0.0;
}

double Interpolator::coincident_mean(PlanarPoint q, bool& found) const {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : samples_) {
    if (squared(s.location, q) < kEps2) {
      sum += s.latency_ms;
      ++count;
    }
  }
  found = count > 0;
  return found ? sum / static_cast<double>(count) : 0.0;
}

double Interpolator::predict_idw(PlanarPoint q) const {
  const double p = config_.idw_p;
  double num = 0.0;
  double den = 0.0;
  double coincident_sum = 0.0;
  std::size_t coincident = 0;
  for (const auto& s : samples_) {
    const double d2 = squared(s.location, q);
    if (d2 < kEps2) {
      coincident_sum += s.latency_ms;
      ++coincident;
      continue;
    }
    double w = 0.0;
    if (p == 2.0) {
      w = 1.0 / d2;
    } else if (p == 1.0) {
      w = 1.0 / std::sqrt(d2);
    } else {
      w = std::pow(d2, -0.5 * p);
    }
    num += w * s.latency_ms;
    den += w;
  }
  if (coincident > 0) return coincident_sum / static_cast<double>(coincident);
  return num / den;
}

double Interpolator::predict_loess(PlanarPoint q) const {
  const std::size_t n = samples_.size();
  const auto wanted = static_cast<std::size_t>(std::ceil(config_.loess_span * static_cast<double>(n) - 1e-9));
  const std::size_t m = std::min(n, std::max<std::size_t>(3, wanted));
  const auto nb = tree_.nearest(q, m);
  const double h = nb.back().distance;

  std::vector<double> w(nb.size());
  double wsum = 0.0;
  for (std::size_t i = 0; i < nb.size(); ++i) {
    w[i] = tricube(nb[i].distance, h);
    wsum += w[i];
  }
  if (wsum <= 0.0) {
    // Every neighbour sits exactly at the bandwidth (or h = 0): weight them equally.
    std::fill(w.begin(), w.end(), 1.0);
    wsum = static_cast<double>(w.size());
  }

  // Local coordinates centred on q; the fitted intercept is the estimate.
  double xbar = 0.0, ybar = 0.0, zbar = 0.0;
  std::size_t positive = 0;
  for (std::size_t i = 0; i < nb.size(); ++i) {
    const auto& s = samples_[nb[i].index];
    xbar += w[i] * (s.location.x - q.x);
    ybar += w[i] * (s.location.y - q.y);
    zbar += w[i] * s.latency_ms;
    if (w[i] > 0.0) ++positive;
  }
  xbar /= wsum;
  ybar /= wsum;
  zbar /= wsum;

  double sxx = 0.0, sxy = 0.0, syy = 0.0, sxz = 0.0, syz = 0.0;
  for (std::size_t i = 0; i < nb.size(); ++i) {
    const auto& s = samples_[nb[i].index];
    const double dx = s.location.x - q.x - xbar;
    const double dy = s.location.y - q.y - ybar;
    const double dz = s.latency_ms - zbar;
    sxx += w[i] * dx * dx;
    sxy += w[i] * dx * dy;
    syy += w[i] * dy * dy;
    sxz += w[i] * dx * dz;
    syz += w[i] * dy * dz;
  }
  const double det = sxx * syy - sxy * sxy;
  const double scale = sxx + syy;
  if (positive < 3 || !(scale > 0.0) || det <= 1e-10 * scale * scale) return zbar;
  const double b1 = (syy * sxz - sxy * syz) / det;
  const double b2 = (sxx * syz - sxy * sxz) / det;
  return zbar - b1 * xbar - b2 * ybar;
}

double Interpolator::predict_stbkr(PlanarPoint q) const {
  bool found = false;
  const double coincident = coincident_mean(q, found);
  if (found) return coincident;

  const auto k = static_cast<std::size_t>(config_.stbkr_k);
  const auto nb = tree_.nearest(q, k);
  double rk = 0.0;
  for (const auto& n : nb) rk += n.distance;
  rk /= static_cast<double>(k);
  const double h = config_.stbkr_c * rk * rk;

  double d2_min = HUGE_VAL;
  for (const auto& s : samples_) d2_min = std::min(d2_min, squared(s.location, q));
  double num = 0.0;
  double den = 0.0;
  if (!(h > 0.0)) {
    for (const auto& s : samples_) {
      if (squared(s.location, q) == d2_min) {
        num += s.latency_ms;
        den += 1.0;
      }
    }
    return num / den;
  }
  // Shifting by the nearest squared distance rescales every weight by the
  // same factor, so the ratio is unchanged while total underflow is avoided.
  const double inv = 1.0 / (2.0 * h * h);
  for (const auto& s : samples_) {
    const double w = std::exp(-(squared(s.location, q) - d2_min) * inv);
    num += w * s.latency_ms;
    den += w;
  }
  return num / den;
}

double idw_predict(PlanarPoint q, std::span<const SamplePoint> samples, double p) {
  InterpolatorConfig cfg;
  cfg.method = Method::Idw;
  cfg.idw_p = p;
  return Interpolator({samples.begin(), samples.end()}, cfg).predict(q);
}

double loess_predict(PlanarPoint q, std::span<const SamplePoint> samples, double span) {
  InterpolatorConfig cfg;
  cfg.method = Method::Loess;
  cfg.loess_span = span;
  return Interpolator({samples.begin(), samples.end()}, cfg).predict(q);
}

double stbkr_predict(PlanarPoint q, std::span<const SamplePoint> samples, double c, int k) {
  InterpolatorConfig cfg;
  cfg.method = Method::Stbkr;
  cfg.stbkr_c = c;
  cfg.stbkr_k = k;
  return Interpolator({samples.begin(), samples.end()}, cfg).predict(q);
}

std::vector<Neighbor> knn_query(PlanarPoint q, std::span<const SamplePoint> samples, std::size_t k) {
  const auto pts = locations(samples);
  return KdTree(pts).nearest(q, k);
}

GridBounds padded_bounds(std::span<const SamplePoint> samples, double pad) {
  if (samples.empty()) throw Error(ErrorCode::NoSamples, "cannot bound an empty sample set");
  GridBounds b{HUGE_VAL, HUGE_VAL, -HUGE_VAL, -HUGE_VAL};
  for (const auto& s : samples) {
    b.min_x = std::min(b.min_x, s.location.x);
    b.min_y = std::min(b.min_y, s.location.y);
    b.max_x = std::max(b.max_x, s.location.x);
    b.max_y = std::max(b.max_y, s.location.y);
  }
  b.min_x -= pad;
  b.min_y -= pad;
  b.max_x += pad;
  b.max_y += pad;
  return b;
}

GridSurface::GridSurface(PlanarPoint origin, double spacing, std::size_t nx, std::size_t ny)
    : origin_(origin), spacing_(spacing), nx_(nx), ny_(ny), values_(nx * ny, 0.0), mask_(nx * ny, 0) {
  if (!(spacing > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid spacing must be positive");
}

PlanarPoint GridSurface::point(std::size_t i, std::size_t j) const {
  return {origin_.x + static_cast<double>(i) * spacing_, origin_.y + static_cast<double>(j) * spacing_};
}

void GridSurface::set(std::size_t i, std::size_t j, double value, bool inside) {
  values_[j * nx_ + i] = value;
  mask_[j * nx_ + i] = inside ? 1 : 0;
}

std::size_t GridSurface::masked_count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

std::vector<std::pair<PlanarPoint, double>> GridSurface::masked_points() const {
  std::vector<std::pair<PlanarPoint, double>> out;
  out.reserve(masked_count());
  for (std::size_t j = 0; j < ny_; ++j) {
    for (std::size_t i = 0; i < nx_; ++i) {
      if (masked(i, j)) out.emplace_back(point(i, j), value(i, j));
    }
  }
  return out;
}

GridSurface make_grid(std::span<const SamplePoint> samples, const InterpolatorConfig& config,
                      const GridBounds& bounds, double spacing, const PolygonUnit* mask) {
  if (samples.empty()) throw Error(ErrorCode::NoSamples, "grid needs at least one sample");
  if (!(spacing > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid spacing must be positive");
  if (!(bounds.max_x >= bounds.min_x && bounds.max_y >= bounds.min_y)) {
    throw Error(ErrorCode::InvalidArgument, "grid bounds are inverted");
  }
  const auto nx = static_cast<std::size_t>(std::floor((bounds.max_x - bounds.min_x) / spacing + 1e-9)) + 1;
  const auto ny = static_cast<std::size_t>(std::floor((bounds.max_y - bounds.min_y) / spacing + 1e-9)) + 1;
  GridSurface grid({bounds.min_x, bounds.min_y}, spacing, nx, ny);
  const Interpolator interp({samples.begin(), samples.end()}, config);
  parallel_for(ny, [&](std::size_t j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const PlanarPoint p = grid.point(i, j);
      const bool inside = mask == nullptr || unit_contains(*mask, p);
      grid.set(i, j, inside ? interp.predict(p) : 0.0, inside);
    }
  });
  return grid;
}

void write_grid_csv(std::ostream& out, const GridSurface& grid) {
  out << "# latreg-grid v1\n";
  out << "# origin_lat=" << csv::format_number(grid.projection_origin().lat) << '\n';
  out << "# origin_lon=" << csv::format_number(grid.projection_origin().lon) << '\n';
  out << "# origin_x=" << csv::format_number(grid.origin().x) << '\n';
  out << "# origin_y=" << csv::format_number(grid.origin().y) << '\n';
  out << "# spacing=" << csv::format_number(grid.spacing()) << '\n';
  out << "# nx=" << grid.nx() << '\n';
  out << "# ny=" << grid.ny() << '\n';
  out << "x,y,value\n";
  for (const auto& [p, v] : grid.masked_points()) {
    out << csv::format_number(p.x) << ',' << csv::format_number(p.y) << ',' << csv::format_number(v) << '\n';
  }
}

GridSurface read_grid_csv(std::istream& in) {
  std::map<std::string, std::string> header;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) header[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    break;  // column header "x,y,value"
  }
  for (const char* key : {"origin_x", "origin_y", "spacing", "nx", "ny"}) {
    if (!header.count(key)) throw Error(ErrorCode::InvalidArgument, std::string("grid header lacks ") + key);
  }
  GridSurface grid({std::stod(header["origin_x"]), std::stod(header["origin_y"])}, std::stod(header["spacing"]),
                   std::stoul(header["nx"]), std::stoul(header["ny"]));
  if (header.count("origin_lat") && header.count("origin_lon")) {
    grid.set_projection_origin(make_geo_point(std::stod(header["origin_lat"]), std::stod(header["origin_lon"])));
  }
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream row(line);
    std::string xs, ys, vs;
    std::getline(row, xs, ',');
    std::getline(row, ys, ',');
    std::getline(row, vs, ',');
    const double x = std::stod(xs);
    const double y = std::stod(ys);
    const auto i = static_cast<long long>(std::llround((x - grid.origin().x) / grid.spacing()));
    const auto j = static_cast<long long>(std::llround((y - grid.origin().y) / grid.spacing()));
    if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= grid.nx() || static_cast<std::size_t>(j) >= grid.ny()) {
      throw Error(ErrorCode::InvalidArgument, "grid row outside declared extent: " + line);
    }
    grid.set(static_cast<std::size_t>(i), static_cast<std::size_t>(j), std::stod(vs), true);
  }
  return grid;
}

std::vector<SamplePoint> to_samples(std::span<const Measurement> ms, GeoPoint origin) {
  std::vector<SamplePoint> out;
  out.reserve(ms.size());
  for (const auto& m : ms) out.push_back({project(m.location, origin), m.latency_ms});
  return out;
}

HoldoutResult evaluate_holdout(std::span<const Measurement> train, std::span<const Measurement> test,
                               const InterpolatorConfig& config, GeoPoint origin) {
  if (test.empty()) throw Error(ErrorCode::EmptyTest, "holdout set is empty");
  const Interpolator interp(to_samples(train, origin), config);

  struct Group {
    PlanarPoint where;
    std::vector<double> truths;
  };
  std::map<std::pair<std::int64_t, std::int64_t>, Group> groups;
  for (const auto& m : test) {
    const auto key = std::make_pair(truncate4(m.location.lat), truncate4(m.location.lon));
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) it->second.where = project(m.location, origin);
    it->second.truths.push_back(m.latency_ms);
  }

  HoldoutResult result;
  result.records.resize(groups.size());
  std::vector<const std::pair<const std::pair<std::int64_t, std::int64_t>, Group>*> entries;
  for (const auto& entry : groups) entries.push_back(&entry);
  parallel_for(entries.size(), [&](std::size_t idx) {
    const auto& [key, group] = *entries[idx];
    HoldoutRecord rec;
    rec.location = {static_cast<double>(key.first) / 1e4, static_cast<double>(key.second) / 1e4};
    rec.planar = group.where;
    rec.n_truths = group.truths.size();
    rec.estimate = interp.predict(group.where);
    auto truths = group.truths;
    std::sort(truths.begin(), truths.end());
    rec.best_truth = truths.front();
    rec.abs_error = std::abs(rec.estimate - truths.front());
    for (double t : truths) {
      const double err = std::abs(rec.estimate - t);
      if (err < rec.abs_error) {
        rec.abs_error = err;
        rec.best_truth = t;
      }
    }
    result.records[idx] = rec;
  });

  std::vector<double> errors, truths, estimates;
  for (const auto& r : result.records) {
    errors.push_back(r.abs_error);
    truths.push_back(r.best_truth);
    estimates.push_back(r.estimate);
    if (r.estimate > 50.0) ++result.summary.estimates_over_50ms;
  }
  auto& s = result.summary;
  s.locations = result.records.size();
  double total = 0.0;
  for (double e : errors) total += e;
  s.mean_abs_error = total / static_cast<double>(errors.size());
  s.median_abs_error = percentile(errors, 50.0);
  s.truth_p10 = percentile(truths, 10.0);
  s.truth_p50 = percentile(truths, 50.0);
  s.truth_p90 = percentile(truths, 90.0);
  s.estimate_p10 = percentile(estimates, 10.0);
  s.estimate_p50 = percentile(estimates, 50.0);
  s.estimate_p90 = percentile(estimates, 90.0);
  return result;
}

std::vector<double> default_stbkr_c_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 8; ++i) grid.push_back(1e-5 * std::pow(1e7, i / 7.0));
  return grid;
}

std::vector<int> default_stbkr_k_grid() {
  std::vector<int> grid;
  for (int i = 0; i < 8; ++i) grid.push_back(static_cast<int>(std::lround(5.0 * std::pow(200.0, i / 7.0))));
  return grid;
}

StbkrChoice tune_stbkr(std::span<const Measurement> train, std::span<const Measurement> validation,
                       GeoPoint origin, std::span<const double> c_grid, std::span<const int> k_grid) {
  if (c_grid.empty() || k_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty tuning grid");
  if (train.empty()) throw Error(ErrorCode::NoSamples, "no training samples");
  std::vector<int> ks;
  for (int k : k_grid) ks.push_back(std::clamp(k, 1, static_cast<int>(train.size())));
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  std::vector<double> cs(c_grid.begin(), c_grid.end());
  std::sort(cs.begin(), cs.end());
  cs.erase(std::unique(cs.begin(), cs.end()), cs.end());

  StbkrChoice best;
  bool have = false;
  for (int k : ks) {
    for (double c : cs) {
      InterpolatorConfig cfg;
      cfg.method = Method::Stbkr;
      cfg.stbkr_c = c;
      cfg.stbkr_k = k;
      const double err = evaluate_holdout(train, validation, cfg, origin).summary.mean_abs_error;
      // Errors within rounding noise count as ties, which keep the earlier pair.
      if (!have || err < best.mean_abs_error - 1e-12 * std::max(1.0, best.mean_abs_error)) {
        best = {c, k, err};
        have = true;
      }
    }
  }
  return best;
}

}  // namespace latreg
