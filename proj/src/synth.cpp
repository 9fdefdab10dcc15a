#include "latreg/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "latreg/error.hpp"
#include "latreg/rng.hpp"

namespace latreg {

namespace {

constexpr double kMinLatencyMs = 0.1;

bool inside(const GridBounds& b, PlanarPoint p) {
  return p.x >= b.min_x && p.x <= b.max_x && p.y >= b.min_y && p.y <= b.max_y;
}

double density_of(const PlantedScenario& s, std::size_t region) {
  return s.density.empty() ? 1.0 : s.density[region];
}

}  // namespace

void validate(const PlantedScenario& s) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidScenario, why); };
  const std::size_t k = s.region_seeds.size();
  if (k < 2) fail("need at least two regions");
  if (s.region_means_ms.size() != k) fail("one mean per region required");
  if (std::set<double>(s.region_means_ms.begin(), s.region_means_ms.end()).size() != k) {
    fail("region means must be distinct");
  }
  for (double mu : s.region_means_ms) {
    if (!(mu > 0.0) || !std::isfinite(mu)) fail("region means must be positive");
  }
  if (!s.density.empty()) {
    if (s.density.size() != k) fail("one density multiplier per region required");
    double max_density = 0.0;
    for (double d : s.density) {
      if (!(d >= 0.0) || !std::isfinite(d)) fail("density multipliers must be >= 0");
      max_density = std::max(max_density, d);
    }
    if (max_density <= 0.0) fail("at least one region needs positive density");
  }
  if (!(s.noise_std_ms >= 0.0)) fail("noise_std must be >= 0");
  if (!(s.bounds.max_x > s.bounds.min_x && s.bounds.max_y > s.bounds.min_y)) fail("empty bounds");
  if (s.months < 1 || s.points_per_month < 1) fail("months and points_per_month must be >= 1");
  if (s.start_month < 1 || s.start_month > 12) fail("start_month must lie in 1..12");
  if (s.max_measurements_per_user < 1) fail("max_measurements_per_user must be >= 1");
  if (s.isps.empty()) fail("need at least one ISP name");
}

std::size_t planted_region(const PlantedScenario& s, PlanarPoint p) {
  std::size_t best = 0;
  double best_d2 = HUGE_VAL;
  for (std::size_t i = 0; i < s.region_seeds.size(); ++i) {
    const double dx = p.x - s.region_seeds[i].x;
    const double dy = p.y - s.region_seeds[i].y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

SynthResult generate(const PlantedScenario& s) {
  validate(s);
  Rng rng(s.seed);
  double max_density = 0.0;
  for (std::size_t i = 0; i < s.region_seeds.size(); ++i) max_density = std::max(max_density, density_of(s, i));
  const auto& b = s.bounds;

  auto uniform_point = [&] {
    return PlanarPoint{b.min_x + uniform_unit(rng) * (b.max_x - b.min_x),
                       b.min_y + uniform_unit(rng) * (b.max_y - b.min_y)};
  };
  auto draw_home = [&] {
    for (;;) {
      const PlanarPoint p = uniform_point();
      if (uniform_unit(rng) * max_density < density_of(s, planted_region(s, p))) return p;
    }
  };
  auto draw_near = [&](PlanarPoint home) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      const PlanarPoint p{home.x + s.home_jitter_m * standard_normal(rng),
                          home.y + s.home_jitter_m * standard_normal(rng)};
      if (inside(b, p) && density_of(s, planted_region(s, p)) > 0.0) return p;
    }
    return home;
  };
  auto draw_latency = [&](double mu) {
    if (s.noise_std_ms == 0.0) return mu;
    if (s.noise == NoiseModel::LogNormal) {
      const double sigma2 = std::log1p((s.noise_std_ms / mu) * (s.noise_std_ms / mu));
      return mu * std::exp(std::sqrt(sigma2) * standard_normal(rng) - 0.5 * sigma2);
    }
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double v = mu + s.noise_std_ms * standard_normal(rng);
      if (v >= kMinLatencyMs) return v;
    }
    return kMinLatencyMs;
  };

  using namespace std::chrono;
  const year_month first{year{s.start_year}, month{s.start_month}};
  SynthResult out;
  for (int m = 0; m < s.months; ++m) {
    const year_month ym = first + months{m};
    const sys_days begin{ym / 1};
    const sys_days end{(ym + months{1}) / 1};
    const auto month_start = duration_cast<seconds>(begin.time_since_epoch()).count();
    const auto month_len = duration_cast<seconds>(end - begin).count();

    int emitted = 0;
    int user = 0;
    while (emitted < s.points_per_month) {
      const PlanarPoint home = draw_home();
      const int count = std::min<int>(1 + static_cast<int>(uniform_below(rng, s.max_measurements_per_user)),
                                      s.points_per_month - emitted);
      const std::string user_id = "u" + std::to_string(m) + "-" + std::to_string(user++);
      const std::string& isp = s.isps[uniform_below(rng, s.isps.size())];
      for (int k = 0; k < count; ++k) {
        const PlanarPoint p = draw_near(home);
        const std::size_t region = planted_region(s, p);
        Measurement meas;
        meas.id = "m" + std::to_string(out.measurements.size());
        meas.timestamp = month_start + static_cast<std::int64_t>(uniform_below(rng, static_cast<std::uint64_t>(month_len)));
        meas.location = unproject(p, s.origin);
        meas.latency_ms = draw_latency(s.region_means_ms[region]);
        meas.user_id = user_id;
        meas.isp_id = isp;
        out.measurements.push_back(std::move(meas));
        out.regions.push_back(region);
      }
      emitted += count;
    }
  }
  return out;
}

PlantedScenario four_region_scenario(double hex_edge_m, int rows_per_band, double half_width_m) {
  if (!(hex_edge_m > 0.0) || rows_per_band < 1 || !(half_width_m > 0.0)) {
    throw Error(ErrorCode::InvalidScenario, "band geometry must be positive");
  }
  PlantedScenario s;
  const double band = 1.5 * hex_edge_m * rows_per_band;
  // Hexagon rows are centred at y = 1.5 e r; 0.75 e is halfway between two.
  const double mid = 0.75 * hex_edge_m;
  for (int k = 0; k < 4; ++k) s.region_seeds.push_back({0.0, mid + (k - 1.5) * band});
  s.region_means_ms = {15.0, 45.0, 25.0, 80.0};
  s.bounds = {-half_width_m, mid - 2.0 * band, half_width_m, mid + 2.0 * band};
  return s;
}

}  // namespace latreg
