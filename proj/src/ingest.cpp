#include "latreg/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "latreg/csv.hpp"
#include "latreg/error.hpp"
#include "latreg/rng.hpp"

namespace latreg {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::optional<double> parse_double(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  double value = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) return std::nullopt;
  return value;
}

std::optional<bool> parse_bool(std::string_view text) {
  const std::string t = lower(trim(text));
  if (t == "true" || t == "1" || t == "yes" || t == "t" || t == "y") return true;
  if (t == "false" || t == "0" || t == "no" || t == "f" || t == "n") return false;
  return std::nullopt;
}

bool parse_digits(std::string_view s, int& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace

std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  if (t.size() >= 10 && t[4] == '-' && t[7] == '-') {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    if (!parse_digits(std::string_view(t).substr(0, 4), y) || !parse_digits(std::string_view(t).substr(5, 2), mo) ||
        !parse_digits(std::string_view(t).substr(8, 2), d)) {
      return std::nullopt;
    }
    std::string_view rest = std::string_view(t).substr(10);
    if (!rest.empty()) {
      if ((rest[0] != 'T' && rest[0] != ' ') || rest.size() < 9 || rest[3] != ':' || rest[6] != ':') {
        return std::nullopt;
      }
      if (!parse_digits(rest.substr(1, 2), h) || !parse_digits(rest.substr(4, 2), mi) ||
          !parse_digits(rest.substr(7, 2), s)) {
        return std::nullopt;
      }
      rest = rest.substr(9);
      if (!rest.empty() && rest[0] == '.') {
        std::size_t k = 1;
        while (k < rest.size() && std::isdigit(static_cast<unsigned char>(rest[k]))) ++k;
        rest = rest.substr(k);
      }
      if (rest == "Z" || rest == "+00:00") rest = {};
      if (!rest.empty()) return std::nullopt;
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 60) return std::nullopt;
    const auto secs = sys_days{ymd}.time_since_epoch() + hours{h} + minutes{mi} + seconds{s};
    return duration_cast<seconds>(secs).count();
  }
  const auto value = parse_double(t);
  if (!value || !std::isfinite(*value)) return std::nullopt;
  return static_cast<std::int64_t>(std::floor(*value));
}

std::string format_timestamp(std::int64_t secs) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{secs}};
  const auto day_start = floor<days>(tp);
  const year_month_day ymd{day_start};
  const hh_mm_ss hms{tp - day_start};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::string month_key(std::int64_t secs) {
  using namespace std::chrono;
  const year_month_day ymd{floor<days>(sys_seconds{seconds{secs}})};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()));
  return buf;
}

ParseResult parse_measurements(std::istream& in, const ColumnSchema& schema) {
  std::size_t line = 0;
  const auto header = csv::read_record(in, line);
  if (!header || (header->size() == 1 && trim((*header)[0]).empty())) {
    throw Error(ErrorCode::EmptyInput, "no header row");
  }
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header->size(); ++i) column.emplace(trim((*header)[i]), i);

  auto require = [&](const std::string& name) {
    const auto it = column.find(name);
    if (it == column.end()) throw Error(ErrorCode::MissingColumn, name);
    return it->second;
  };
  const std::size_t c_latency = require(schema.latency_ms);
  const std::size_t c_lat = require(schema.lat);
  const std::size_t c_lon = require(schema.lon);
  const std::size_t c_time = require(schema.timestamp);
  const std::size_t c_user = require(schema.user_id);

  ParseResult result;
  auto optional_col = [&](const std::string& name, bool filter_flag) -> std::optional<std::size_t> {
    const auto it = column.find(name);
    if (it == column.end()) {
      if (filter_flag) result.warnings.push_back("column '" + name + "' missing; every row passes its filter");
      return std::nullopt;
    }
    return it->second;
  };
  const auto c_id = optional_col(schema.id, false);
  const auto c_isp = optional_col(schema.isp_id, false);
  const auto c_vpn = optional_col(schema.used_vpn, true);
  const auto c_auto = optional_col(schema.server_autoselected, true);
  const auto c_geo = optional_col(schema.geolocation_source, true);

  while (auto record = csv::read_record(in, line)) {
    const auto& row = *record;
    if (row.size() == 1 && trim(row[0]).empty()) continue;  // blank line
    auto field = [&](std::size_t idx) -> std::string_view {
      return idx < row.size() ? std::string_view(row[idx]) : std::string_view();
    };
    auto skip = [&](std::string reason) { result.skipped.push_back({line, std::move(reason)}); };

    Measurement m;
    const auto latency = parse_double(field(c_latency));
    if (!latency || !std::isfinite(*latency) || *latency <= 0.0) {
      skip("invalid latency_ms '" + std::string(field(c_latency)) + "'");
      continue;
    }
    m.latency_ms = *latency;
    const auto lat = parse_double(field(c_lat));
    const auto lon = parse_double(field(c_lon));
    if (!lat || !lon || *lat < -90.0 || *lat > 90.0 || *lon < -180.0 || *lon > 180.0) {
      skip("invalid coordinates");
      continue;
    }
    m.location = {*lat, *lon};
    const auto ts = parse_timestamp(field(c_time));
    if (!ts) {
      skip("invalid timestamp '" + std::string(field(c_time)) + "'");
      continue;
    }
    m.timestamp = *ts;
    m.user_id = trim(field(c_user));
    if (m.user_id.empty()) {
      skip("empty user_id");
      continue;
    }
    m.id = c_id ? trim(field(*c_id)) : std::string();
    if (m.id.empty()) m.id = std::to_string(line);
    if (c_isp) m.isp_id = trim(field(*c_isp));
    if (c_vpn) {
      const auto v = parse_bool(field(*c_vpn));
      if (!v) {
        skip("invalid used_vpn '" + std::string(field(*c_vpn)) + "'");
        continue;
      }
      m.used_vpn = *v;
    }
    if (c_auto) {
      const auto v = parse_bool(field(*c_auto));
      if (!v) {
        skip("invalid server_autoselected '" + std::string(field(*c_auto)) + "'");
        continue;
      }
      m.server_autoselected = *v;
    }
    if (c_geo) {
      const std::string src = lower(trim(field(*c_geo)));
      if (src == "gps") {
        m.geolocation_source = GeoSource::Gps;
      } else if (src == "ip") {
        m.geolocation_source = GeoSource::Ip;
      } else {
        skip("invalid geolocation_source '" + src + "'");
        continue;
      }
    }
    result.measurements.push_back(std::move(m));
  }
  return result;
}

ParseResult parse_measurements_file(const std::filesystem::path& path, const ColumnSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return parse_measurements(in, schema);
}

void write_measurements_csv(std::ostream& out, std::span<const Measurement> ms) {
  csv::write_record(out, {"id", "timestamp", "lat", "lon", "latency_ms", "user_id", "isp_id", "used_vpn",
                          "server_autoselected", "geolocation_source"});
  for (const auto& m : ms) {
    csv::write_record(out, {m.id, format_timestamp(m.timestamp), csv::format_number(m.location.lat),
                            csv::format_number(m.location.lon), csv::format_number(m.latency_ms), m.user_id,
                            m.isp_id, m.used_vpn ? "true" : "false", m.server_autoselected ? "true" : "false",
                            m.geolocation_source == GeoSource::Gps ? "gps" : "ip"});
  }
}

FilterResult apply_filters(std::span<const Measurement> ms, const FilterPolicy& policy) {
  FilterResult result;
  result.kept.assign(ms.begin(), ms.end());
  result.funnel.push_back({"input", result.kept.size()});
  auto step = [&](const char* name, bool enabled, auto&& keep) {
    if (enabled) std::erase_if(result.kept, [&](const Measurement& m) { return !keep(m); });
    result.funnel.push_back({name, result.kept.size()});
  };
  step("no_vpn", policy.drop_vpn, [](const Measurement& m) { return !m.used_vpn; });
  step("server_autoselected", policy.require_autoselected_server,
       [](const Measurement& m) { return m.server_autoselected; });
  step("gps_location", policy.require_gps,
       [](const Measurement& m) { return m.geolocation_source == GeoSource::Gps; });
  return result;
}

void write_funnel_csv(std::ostream& out, std::span<const FunnelStep> funnel) {
  out << "step,retained\n";
  for (const auto& s : funnel) csv::write_record(out, {s.step, std::to_string(s.retained)});
}

std::vector<Measurement> filter_isps(std::span<const Measurement> ms, const std::set<std::string>& isps) {
  std::vector<Measurement> out;
  for (const auto& m : ms) {
    if (isps.count(m.isp_id)) out.push_back(m);
  }
  return out;
}

std::map<std::string, std::vector<Measurement>> partition_slices(std::span<const Measurement> ms,
                                                                 const SliceSpec& spec) {
  std::map<std::string, std::vector<Measurement>> slices;
  if (ms.empty()) return slices;
  if (spec.granularity == SliceSpec::Granularity::CalendarMonth) {
    for (const auto& m : ms) slices[month_key(m.timestamp)].push_back(m);
    return slices;
  }
  if (spec.window_days < 1) throw Error(ErrorCode::InvalidArgument, "window_days must be >= 1");
  constexpr std::int64_t kDay = 86400;
  std::int64_t first = ms.front().timestamp;
  for (const auto& m : ms) first = std::min(first, m.timestamp);
  const std::int64_t anchor = (first >= 0 ? first / kDay : (first - kDay + 1) / kDay) * kDay;
  const std::int64_t width = static_cast<std::int64_t>(spec.window_days) * kDay;
  for (const auto& m : ms) {
    const std::int64_t start = anchor + ((m.timestamp - anchor) / width) * width;
    slices[format_timestamp(start).substr(0, 10)].push_back(m);
  }
  return slices;
}

UserSplit split_by_user(std::span<const Measurement> ms, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "train_fraction must lie in (0, 1)");
  }
  std::vector<std::string> users;
  for (const auto& m : ms) users.push_back(m.user_id);
  std::sort(users.begin(), users.end());
  users.erase(std::unique(users.begin(), users.end()), users.end());
  if (users.size() < 2) throw Error(ErrorCode::TooFewUsers, "need at least two distinct users");

  Rng rng(seed);
  shuffle(std::span<std::string>(users), rng);
  const auto total = users.size();
  auto n_train = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(total) - 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, total - 1);
  const std::set<std::string> train_users(users.begin(), users.begin() + static_cast<std::ptrdiff_t>(n_train));

  UserSplit split;
  for (const auto& m : ms) (train_users.count(m.user_id) ? split.train : split.test).push_back(m);
  return split;
}

}  // namespace latreg
