#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latreg/geo.hpp"

namespace latreg {

enum class GeoSource { Gps, Ip };

/// One crowdsourced latency test.
struct Measurement {
  std::string id;
  std::int64_t timestamp = 0;  // UTC seconds since the epoch
  GeoPoint location;
  double latency_ms = 0.0;
  std::string user_id;
  std::string isp_id;
  bool used_vpn = false;
  bool server_autoselected = true;
  GeoSource geolocation_source = GeoSource::Gps;
};

/// Maps logical fields to CSV header names. Optional columns that are absent
/// from the header default to values that pass every filter.
struct ColumnSchema {
  std::string id = "id";
  std::string timestamp = "timestamp";
  std::string lat = "lat";
  std::string lon = "lon";
  std::string latency_ms = "latency_ms";
  std::string user_id = "user_id";
  std::string isp_id = "isp_id";
  std::string used_vpn = "used_vpn";
  std::string server_autoselected = "server_autoselected";
  std::string geolocation_source = "geolocation_source";
};

struct SkippedRow {
  std::size_t line = 0;  // physical line number, header is line 1
  std::string reason;
};

struct ParseResult {
  std::vector<Measurement> measurements;
  std::vector<SkippedRow> skipped;
  std::vector<std::string> warnings;
};

/// Throws MissingColumn when a required column is not in the header and
/// EmptyInput when there is no header at all.
ParseResult parse_measurements(std::istream& in, const ColumnSchema& schema = {});
ParseResult parse_measurements_file(const std::filesystem::path& path, const ColumnSchema& schema = {});

/// Writes the canonical column layout read by parse_measurements.
void write_measurements_csv(std::ostream& out, std::span<const Measurement> ms);

/// Accepts epoch seconds (integer or decimal) and ISO-8601 UTC forms
/// "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SS[.fff][Z]" or with a space separator.
std::optional<std::int64_t> parse_timestamp(std::string_view text);
std::string format_timestamp(std::int64_t seconds);

struct FilterPolicy {
  bool drop_vpn = true;
  bool require_autoselected_server = true;
  bool require_gps = true;
};

struct FunnelStep {
  std::string step;
  std::size_t retained = 0;
};

struct FilterResult {
  std::vector<Measurement> kept;
  // First entry is the input size, then one entry per step in order.
  std::vector<FunnelStep> funnel;
};

/// Sequential preprocessing: VPN tests, then manually chosen servers, then
/// non-GPS locations. Disabled steps still appear in the funnel.
FilterResult apply_filters(std::span<const Measurement> ms, const FilterPolicy& policy = {});
void write_funnel_csv(std::ostream& out, std::span<const FunnelStep> funnel);

std::vector<Measurement> filter_isps(std::span<const Measurement> ms, const std::set<std::string>& isps);

struct SliceSpec {
  enum class Granularity { CalendarMonth, FixedWindow };
  Granularity granularity = Granularity::CalendarMonth;
  int window_days = 30;  // FixedWindow only
};

/// "YYYY-MM" of a UTC timestamp.
std::string month_key(std::int64_t seconds);

/// Calendar months are keyed "YYYY-MM"; fixed windows are anchored at the
/// UTC midnight of the earliest timestamp and keyed by their start date.
/// Only non-empty slices are emitted; input order is kept within a slice.
std::map<std::string, std::vector<Measurement>> partition_slices(std::span<const Measurement> ms,
                                                                 const SliceSpec& spec = {});

struct UserSplit {
  std::vector<Measurement> train;
  std::vector<Measurement> test;
};

/// Users are sorted lexically, shuffled with std::mt19937_64(seed) by
/// Fisher-Yates, and the first ceil(fraction * U) users (clamped so both
/// sides are non-empty) go to train. Throws TooFewUsers below two users.
UserSplit split_by_user(std::span<const Measurement> ms, double train_fraction = 0.8,
                        std::uint64_t seed = 0);

}  // namespace latreg
