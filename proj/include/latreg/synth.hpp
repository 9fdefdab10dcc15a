#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latreg/geo.hpp"
#include "latreg/ingest.hpp"
#include "latreg/interpolate.hpp"

namespace latreg {

enum class NoiseModel { Gaussian, LogNormal };

/// Voronoi regions with fixed base latencies, sampled by crowdsourcing-like
/// users. Coordinates are planar meters around `origin`.
struct PlantedScenario {
  std::vector<PlanarPoint> region_seeds;
  std::vector<double> region_means_ms;
  std::vector<double> density;  // per-region sampling multiplier; empty = all 1
  double noise_std_ms = 3.0;
  NoiseModel noise = NoiseModel::Gaussian;
  GridBounds bounds{-5000.0, -5000.0, 5000.0, 5000.0};
  int months = 6;
  int points_per_month = 5000;
  std::uint64_t seed = 0;
  GeoPoint origin{41.8781, -87.6298};
  int start_year = 2022;
  unsigned start_month = 1;
  int max_measurements_per_user = 10;
  double home_jitter_m = 30.0;
  std::vector<std::string> isps{"isp-a", "isp-b", "isp-c"};
};

/// Throws InvalidScenario.
void validate(const PlantedScenario& scenario);

/// Index of the nearest region seed (lowest index on ties).
std::size_t planted_region(const PlantedScenario& scenario, PlanarPoint p);

struct SynthResult {
  std::vector<Measurement> measurements;
  std::vector<std::size_t> regions;  // planted region of each measurement
};

/// Latency = region mean + noise (Gaussian redrawn below 0.1 ms, or
/// log-normal with the same mean and standard deviation). Each user emits
/// 1..max_measurements_per_user tests jittered around a home location drawn
/// by density-weighted rejection sampling. Deterministic in `seed`.
SynthResult generate(const PlantedScenario& scenario);

/// Four stacked bands with means 15, 45, 25, 80 ms from south to north, each
/// `rows_per_band` hexagon rows tall. Band edges fall midway between hexagon
/// rows of the given edge length, so no cell centre sits on a boundary, and
/// every band touches only its neighbours.
PlantedScenario four_region_scenario(double hex_edge_m = kDefaultHexEdgeM, int rows_per_band = 6,
                                     double half_width_m = 3000.0);

}  // namespace latreg
