#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "latreg/error.hpp"
#include "latreg/interpolate.hpp"

using namespace latreg;

namespace {

const GeoPoint kOrigin{41.8781, -87.6298};

std::vector<SamplePoint> random_samples(std::mt19937_64& rng, std::size_t n, double lo = 5.0, double hi = 90.0) {
  std::uniform_real_distribution<double> xy(-1000.0, 1000.0);
  std::uniform_real_distribution<double> z(lo, hi);
  std::vector<SamplePoint> s(n);
  for (auto& p : s) p = {{xy(rng), xy(rng)}, z(rng)};
  return s;
}

InterpolatorConfig idw(double p = 2.0) {
  InterpolatorConfig c;
  c.method = Method::Idw;
  c.idw_p = p;
  return c;
}

InterpolatorConfig loess(double span) {
  InterpolatorConfig c;
  c.method = Method::Loess;
  c.loess_span = span;
  return c;
}

InterpolatorConfig stbkr(double cc, int k) {
  InterpolatorConfig c;
  c.method = Method::Stbkr;
  c.stbkr_c = cc;
  c.stbkr_k = k;
  return c;
}

Measurement at(GeoPoint g, double z, std::string user) {
  Measurement m;
  m.location = g;
  m.latency_ms = z;
  m.user_id = std::move(user);
  return m;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("IDW hand cases") {
  const std::vector<SamplePoint> s{{{0, 0}, 10.0}, {{1, 0}, 20.0}};
  for (double p : {1.0, 2.0, 3.0}) CHECK(idw_predict({0.5, 0}, s, p) == doctest::Approx(15.0).epsilon(1e-15));
  // Distances 0.25 and 0.75: weights 16 and 16/9, ratio 9:1.
  CHECK(std::abs(idw_predict({0.25, 0}, s, 2.0) - 11.0) < 1e-9);
  CHECK(idw_predict({0, 0}, s, 2.0) == 10.0);
}

TEST_CASE("IDW coincident samples average") {
  const std::vector<SamplePoint> s{{{0, 0}, 10.0}, {{0, 0}, 30.0}, {{5, 0}, 100.0}};
  CHECK(idw_predict({0, 0}, s, 2.0) == 20.0);
}

TEST_CASE("IDW against a direct weighted sum") {
  std::mt19937_64 rng(21);
  const auto s = random_samples(rng, 200);
  std::uniform_real_distribution<double> xy(-1200.0, 1200.0);
  for (int i = 0; i < 50; ++i) {
    const PlanarPoint q{xy(rng), xy(rng)};
    for (double p : {1.0, 2.0, 3.0}) {
      long double num = 0, den = 0;
      for (const auto& sp : s) {
        const long double w = 1.0L / std::pow((long double)distance(q, sp.location), (long double)p);
        num += w * sp.latency_ms;
        den += w;
      }
      CHECK(idw_predict(q, s, p) == doctest::Approx(double(num / den)).epsilon(1e-12));
    }
  }
}

TEST_CASE("tri-cube weight") {
  CHECK(tricube(0.5, 1.0) == 0.669921875);
  CHECK(tricube(0.0, 3.0) == 1.0);
  CHECK(tricube(3.0, 3.0) == 0.0);
  CHECK(tricube(4.0, 3.0) == 0.0);
}

TEST_CASE("LOESS reproduces a plane") {
  const std::vector<SamplePoint> s{{{0, 0}, 1.0}, {{1, 0}, 3.0}, {{0, 1}, 4.0}, {{1, 1}, 6.0}};
  CHECK(loess_predict({0.5, 0.5}, s, 1.0) == doctest::Approx(3.5).epsilon(1e-12));
}

TEST_CASE("LOESS reproduces random linear fields") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> coef(-0.05, 0.05);
  std::uniform_real_distribution<double> xy(-900.0, 900.0);
  for (int field = 0; field < 5; ++field) {
    const double a = coef(rng), b = coef(rng), c = 40.0;
    auto s = random_samples(rng, 300);
    for (auto& p : s) p.latency_ms = c + a * p.location.x + b * p.location.y;
    for (double span : {0.05, 0.3, 1.0}) {
      for (int i = 0; i < 20; ++i) {
        const PlanarPoint q{xy(rng), xy(rng)};
        CHECK(std::abs(loess_predict(q, s, span) - (c + a * q.x + b * q.y)) < 1e-6);
      }
    }
  }
}

TEST_CASE("LOESS falls back to a weighted mean on collinear samples") {
  const std::vector<SamplePoint> s{{{0, 0}, 10.0}, {{1, 0}, 20.0}, {{2, 0}, 30.0}, {{3, 0}, 40.0}};
  double v = 0.0;
  CHECK_NOTHROW(v = loess_predict({1.5, 5.0}, s, 1.0));
  CHECK(std::isfinite(v));
  CHECK(v >= 10.0);
  CHECK(v <= 40.0);
  // Symmetric query: neighbours equidistant in pairs, so the mean is central.
  CHECK(v == doctest::Approx(25.0));
}

TEST_CASE("LOESS needs three samples") {
  const std::vector<SamplePoint> s{{{0, 0}, 1.0}, {{1, 0}, 2.0}};
  CHECK(code_of([&] { loess_predict({0, 0}, s, 1.0); }) == ErrorCode::TooFewSamples);
}

TEST_CASE("STBKR basic cases") {
  const std::vector<SamplePoint> one{{{3, 4}, 17.5}};
  CHECK(stbkr_predict({100, -20}, one, 1.0, 1) == 17.5);
  CHECK(stbkr_predict({3, 4}, one, 1.0, 1) == 17.5);
  const std::vector<SamplePoint> two{{{-1, 0}, 10.0}, {{1, 0}, 30.0}};
  CHECK(stbkr_predict({0, 5}, two, 0.5, 2) == doctest::Approx(20.0).epsilon(1e-15));
  CHECK(code_of([&] { stbkr_predict({0, 0}, two, 1.0, 3); }) == ErrorCode::KTooLarge);
  CHECK(code_of([&] { stbkr_predict({0, 0}, std::vector<SamplePoint>{}, 1.0, 1); }) == ErrorCode::NoSamples);
}

TEST_CASE("STBKR bandwidth is c times the squared mean neighbour distance") {
  // Neighbour distances 1 and 3 give R_k = 2, h = 4 for c = 1.
  const std::vector<SamplePoint> s{{{1, 0}, 10.0}, {{-3, 0}, 50.0}};
  const double h = 4.0;
  const double w1 = std::exp(-1.0 / (2 * h * h));
  const double w2 = std::exp(-9.0 / (2 * h * h));
  CHECK(stbkr_predict({0, 0}, s, 1.0, 2) == doctest::Approx((10 * w1 + 50 * w2) / (w1 + w2)).epsilon(1e-14));
}

TEST_CASE("IDW and STBKR are exact at sample locations") {
  std::mt19937_64 rng(2);
  const auto s = random_samples(rng, 100);
  for (const auto& sp : s) {
    CHECK(idw_predict(sp.location, s, 2.0) == sp.latency_ms);
    CHECK(stbkr_predict(sp.location, s, 1.0, 5) == doctest::Approx(sp.latency_ms));
  }
}

TEST_CASE("predictions stay within the sample range") {
  std::mt19937_64 rng(13);
  const auto s = random_samples(rng, 150);
  double lo = 1e9, hi = -1e9;
  for (const auto& p : s) lo = std::min(lo, p.latency_ms), hi = std::max(hi, p.latency_ms);
  std::uniform_real_distribution<double> xy(-1500.0, 1500.0);
  Interpolator fi(s, idw(2.0));
  Interpolator fs(s, stbkr(1e-3, 10));
  for (int i = 0; i < 300; ++i) {
    const PlanarPoint q{xy(rng), xy(rng)};
    const double a = fi.predict(q);
    const double b = fs.predict(q);
    CHECK(a >= lo - 1e-9);
    CHECK(a <= hi + 1e-9);
    CHECK(b >= lo - 1e-9);
    CHECK(b <= hi + 1e-9);
  }
}

TEST_CASE("translation invariance and scale equivariance") {
  std::mt19937_64 rng(17);
  const auto s = random_samples(rng, 120);
  const PlanarPoint shift{1234.5, -987.25};
  std::vector<SamplePoint> moved = s, scaled = s;
  for (auto& p : moved) p.location = {p.location.x + shift.x, p.location.y + shift.y};
  for (auto& p : scaled) p.latency_ms *= 2.5;
  std::uniform_real_distribution<double> xy(-800.0, 800.0);
  for (const auto& cfg : {idw(1.0), idw(3.0), loess(0.2), stbkr(0.01, 12)}) {
    Interpolator base(s, cfg), tr(moved, cfg), sc(scaled, cfg);
    for (int i = 0; i < 30; ++i) {
      const PlanarPoint q{xy(rng), xy(rng)};
      const double v = base.predict(q);
      CHECK(tr.predict({q.x + shift.x, q.y + shift.y}) == doctest::Approx(v).epsilon(1e-9));
      CHECK(sc.predict(q) == doctest::Approx(2.5 * v).epsilon(1e-12));
    }
  }
}

TEST_CASE("Interpolator matches the free functions") {
  std::mt19937_64 rng(19);
  const auto s = random_samples(rng, 80);
  std::uniform_real_distribution<double> xy(-1000.0, 1000.0);
  Interpolator fl(s, loess(0.25)), fs(s, stbkr(0.1, 7)), fi(s, idw(2.0));
  for (int i = 0; i < 40; ++i) {
    const PlanarPoint q{xy(rng), xy(rng)};
    CHECK(fl.predict(q) == doctest::Approx(loess_predict(q, s, 0.25)).epsilon(1e-12));
    CHECK(fs.predict(q) == doctest::Approx(stbkr_predict(q, s, 0.1, 7)).epsilon(1e-12));
    CHECK(fi.predict(q) == doctest::Approx(idw_predict(q, s, 2.0)).epsilon(1e-12));
  }
}

TEST_CASE("knn_query orders by distance then sample order") {
  const std::vector<SamplePoint> s{{{1, 0}, 1}, {{0, 1}, 2}, {{-1, 0}, 3}, {{5, 5}, 4}};
  const auto n = knn_query({0, 0}, s, 3);
  REQUIRE(n.size() == 3);
  CHECK(n[0].index == 0);
  CHECK(n[1].index == 1);
  CHECK(n[2].index == 2);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(validate(idw(0.5)), Error);
  CHECK_THROWS_AS(validate(loess(0.0)), Error);
  CHECK_THROWS_AS(validate(loess(1.5)), Error);
  CHECK_THROWS_AS(validate(stbkr(0.0, 5)), Error);
  CHECK_THROWS_AS(validate(stbkr(1.0, 0)), Error);
  CHECK_NOTHROW(validate(loess(1.0)));
}

TEST_CASE("grid over a 1 km square has 21 points per axis") {
  const std::vector<SamplePoint> s{{{0, 0}, 10.0}, {{1000, 1000}, 20.0}};
  const auto g = make_grid(s, idw(), {0, 0, 1000, 1000}, 50.0);
  CHECK(g.nx() == 21);
  CHECK(g.ny() == 21);
  CHECK(g.masked_count() == 441);
  CHECK(g.point(20, 20).x == doctest::Approx(1000.0));
  CHECK(g.value(0, 0) == 10.0);
  CHECK(g.value(20, 20) == 20.0);
}

TEST_CASE("constant samples give a constant surface for every method") {
  std::mt19937_64 rng(3);
  auto s = random_samples(rng, 60);
  for (auto& p : s) p.latency_ms = 42.0;
  for (const auto& cfg : {idw(), loess(0.3), stbkr(0.5, 5)}) {
    const auto g = make_grid(s, cfg, padded_bounds(s, 50.0), 100.0);
    for (const auto& [pt, v] : g.masked_points()) CHECK(v == doctest::Approx(42.0).epsilon(1e-12));
  }
}

TEST_CASE("padded bounds and polygon masks") {
  const std::vector<SamplePoint> s{{{0, 0}, 10.0}, {{100, 200}, 20.0}};
  const auto b = padded_bounds(s, 50.0);
  CHECK(b.min_x == -50.0);
  CHECK(b.max_y == 250.0);
  PolygonUnit tri{"tri", {{{0, 0}, {200, 0}, {0, 200}, {0, 0}}}};
  const auto g = make_grid(s, idw(), {0, 0, 200, 200}, 50.0, &tri);
  // Points strictly inside the triangle x + y < 200 on the 5x5 lattice.
  std::size_t expected = 0;
  for (int i = 0; i <= 4; ++i) {
    for (int j = 0; j <= 4; ++j) {
      if (unit_contains(tri, {50.0 * i, 50.0 * j})) ++expected;
      CHECK(g.masked(i, j) == unit_contains(tri, {50.0 * i, 50.0 * j}));
    }
  }
  CHECK(g.masked_count() == expected);
}

TEST_CASE("grid is identical to pointwise prediction") {
  std::mt19937_64 rng(31);
  const auto s = random_samples(rng, 90);
  const auto cfg = stbkr(0.05, 9);
  const auto g = make_grid(s, cfg, padded_bounds(s, 0.0), 150.0);
  Interpolator f(s, cfg);
  for (std::size_t j = 0; j < g.ny(); ++j) {
    for (std::size_t i = 0; i < g.nx(); ++i) CHECK(g.value(i, j) == f.predict(g.point(i, j)));
  }
}

TEST_CASE("grid CSV round trip") {
  std::mt19937_64 rng(5);
  const auto s = random_samples(rng, 30);
  PolygonUnit sq{"sq", {{{-500, -500}, {500, -500}, {500, 500}, {-500, 500}, {-500, -500}}}};
  auto g = make_grid(s, idw(), padded_bounds(s, 0.0), 100.0, &sq);
  g.set_projection_origin(kOrigin);
  std::stringstream buf;
  write_grid_csv(buf, g);
  const auto back = read_grid_csv(buf);
  CHECK(back.nx() == g.nx());
  CHECK(back.ny() == g.ny());
  CHECK(back.spacing() == g.spacing());
  CHECK(back.projection_origin() == kOrigin);
  CHECK(back.masked_count() == g.masked_count());
  const auto a = g.masked_points();
  const auto b = back.masked_points();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second == b[i].second);
  }
}

TEST_CASE("best-case holdout picks the closest truth") {
  // Training: a single sample, so every estimate is 12.
  std::vector<Measurement> train{at({41.9, -87.6}, 12.0, "t")};
  std::vector<Measurement> test{at({41.88001, -87.63001}, 10.0, "a"), at({41.88004, -87.63004}, 30.0, "b"),
                                at({41.87, -87.64}, 60.0, "c")};
  const auto r = evaluate_holdout(train, test, idw(), kOrigin);
  REQUIRE(r.records.size() == 2);  // first two share a truncated location
  const auto& shared = r.records[1].n_truths == 2 ? r.records[1] : r.records[0];
  CHECK(shared.n_truths == 2);
  CHECK(shared.best_truth == 10.0);
  CHECK(shared.abs_error == doctest::Approx(2.0));
  CHECK(r.summary.locations == 2);
  CHECK(r.summary.mean_abs_error == doctest::Approx((2.0 + 48.0) / 2));
  CHECK(r.summary.estimates_over_50ms == 0);
  CHECK(code_of([&] { evaluate_holdout(train, std::vector<Measurement>{}, idw(), kOrigin); }) ==
        ErrorCode::EmptyTest);
}

TEST_CASE("holdout on training locations is exact for IDW") {
  std::vector<Measurement> ms;
  for (int i = 0; i < 20; ++i) ms.push_back(at({41.8 + 0.001 * i, -87.6 - 0.0005 * i}, 10.0 + i, "u"));
  const auto r = evaluate_holdout(ms, ms, idw(), kOrigin);
  for (const auto& rec : r.records) CHECK(rec.abs_error == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("estimates over 50 ms match a manual count") {
  std::vector<Measurement> train{at({41.80, -87.60}, 20.0, "t1"), at({41.80, -87.70}, 80.0, "t2")};
  std::vector<Measurement> test;
  for (int i = 0; i <= 10; ++i) test.push_back(at({41.80, -87.60 - 0.01 * i}, 50.0, "x" + std::to_string(i)));
  const auto r = evaluate_holdout(train, test, idw(), kOrigin);
  std::size_t manual = 0;
  for (const auto& rec : r.records) manual += rec.estimate > 50.0 ? 1 : 0;
  CHECK(r.summary.estimates_over_50ms == manual);
  CHECK(manual == 5);  // points strictly west of the midpoint
}

TEST_CASE("default tuning grids") {
  const auto c = default_stbkr_c_grid();
  const auto k = default_stbkr_k_grid();
  REQUIRE(c.size() == 8);
  REQUIRE(k.size() == 8);
  CHECK(c.front() == doctest::Approx(1e-5));
  CHECK(c.back() == doctest::Approx(100.0));
  for (std::size_t i = 1; i < 8; ++i) CHECK(c[i] / c[i - 1] == doctest::Approx(std::pow(1e7, 1.0 / 7)));
  CHECK(k.front() == 5);
  CHECK(k.back() == 1000);
  for (std::size_t i = 1; i < 8; ++i) CHECK(k[i] > k[i - 1]);
}

TEST_CASE("STBKR tuning is the grid minimum") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> d(-0.01, 0.01);
  std::vector<Measurement> train, val;
  auto field = [](GeoPoint g) { return 30.0 + 2000.0 * (g.lat - 41.8781) + 1000.0 * (g.lon + 87.6298); };
  for (int i = 0; i < 300; ++i) {
    GeoPoint g{41.8781 + d(rng), -87.6298 + d(rng)};
    (i % 5 == 0 ? val : train).push_back(at(g, field(g), "u" + std::to_string(i)));
  }
  const std::vector<double> cs{1e-4, 1e-2, 1.0};
  const std::vector<int> ks{2, 10, 50};
  const auto best = tune_stbkr(train, val, kOrigin, cs, ks);
  for (double c : cs) {
    for (int k : ks) {
      const auto r = evaluate_holdout(train, val, stbkr(c, k), kOrigin);
      CHECK(best.mean_abs_error <= r.summary.mean_abs_error + 1e-12);
    }
  }
  const std::vector<double> c1{0.3};
  const std::vector<int> k1{4};
  const auto single = tune_stbkr(train, val, kOrigin, c1, k1);
  CHECK(single.c == 0.3);
  CHECK(single.k == 4);
}

TEST_CASE("STBKR tuning ties prefer smaller k") {
  // Constant field: every pair has zero error.
  std::vector<Measurement> train, val;
  for (int i = 0; i < 30; ++i) train.push_back(at({41.8 + 0.001 * i, -87.6}, 25.0, "t" + std::to_string(i)));
  for (int i = 0; i < 5; ++i) val.push_back(at({41.8005 + 0.001 * i, -87.6}, 25.0, "v" + std::to_string(i)));
  const std::vector<double> cs{10.0, 0.1};
  const std::vector<int> ks{20, 3, 8};
  const auto best = tune_stbkr(train, val, kOrigin, cs, ks);
  CHECK(best.k == 3);
  CHECK(best.c == 0.1);
}
