#pragma once

// Space-weather index series (daily F10.7, 3-hourly Ap): CSV ingestion, the
// forecast-like nominal averages and the observed values that drive density.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "error.hpp"
#include "frames.hpp"

namespace dragdeorbit {

inline constexpr std::string_view kIndexCsvHeader =
    "DATE,AP1,AP2,AP3,AP4,AP5,AP6,AP7,AP8,AP_AVG,F107_OBS";

/// Integer civil day (Julian day number) containing the instant.
inline long civil_day(const Epoch& e) { return static_cast<long>(std::floor(e.jd + 0.5)); }

/// Global 3-hour slot counter: 8 * civil_day + slot-of-day.
inline long ap_slot(const Epoch& e) { return static_cast<long>(std::floor((e.jd + 0.5) * 8.0)); }

struct IndexRecord {
  long day = 0;  // Julian day number of the UTC date
  std::array<double, 8> ap{};
  double ap_avg = 0.0;
  double f107 = 0.0;
};

inline std::string format_date(long jdn) {
  // Inverse Fliegel-Van Flandern.
  long l = jdn + 68569;
  const long n = 4 * l / 146097;
  l = l - (146097 * n + 3) / 4;
  const long i = 4000 * (l + 1) / 1461001;
  l = l - 1461 * i / 4 + 31;
  const long j = 80 * l / 2447;
  const long day = l - 2447 * j / 80;
  l = j / 11;
  const long month = j + 2 - 12 * l;
  const long year = 100 * (n - 49) + i + l;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04ld-%02ld-%02ld", year, month, day);
  return buf;
}

/// Immutable, validated, date-sorted series. Queries throw CoverageError on missing days.
class IndexSeries {
 public:
  IndexSeries() = default;

  explicit IndexSeries(std::vector<IndexRecord> records) : records_(std::move(records)) {
    std::sort(records_.begin(), records_.end(),
              [](const IndexRecord& a, const IndexRecord& b) { return a.day < b.day; });
    for (std::size_t k = 0; k < records_.size(); ++k) {
      const auto& r = records_[k];
      if (k > 0 && r.day == records_[k - 1].day) {
        throw RangeError("index series: duplicate date " + format_date(r.day));
      }
      if (!(r.f107 > 0.0)) throw RangeError("index series: F107_OBS must be > 0 on " + format_date(r.day));
      for (double a : r.ap) {
        if (!(a >= 0.0)) throw RangeError("index series: AP must be >= 0 on " + format_date(r.day));
      }
      if (!(r.ap_avg >= 0.0)) throw RangeError("index series: AP_AVG must be >= 0 on " + format_date(r.day));
      by_day_.emplace(r.day, k);
    }
  }

  const std::vector<IndexRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  long first_day() const { return records_.front().day; }
  long last_day() const { return records_.back().day; }

  const IndexRecord& day(long jdn) const {
    auto it = by_day_.find(jdn);
    if (it == by_day_.end()) throw CoverageError("index series: no record for " + format_date(jdn));
    return records_[it->second];
  }

  bool covers(long jdn) const { return by_day_.count(jdn) != 0; }

 private:
  std::vector<IndexRecord> records_;
  std::unordered_map<long, std::size_t> by_day_;
};

namespace detail {

inline double parse_number(std::string_view field, const char* name, std::size_t line) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
    field.remove_suffix(1);
  }
  double v = 0.0;
  auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || p != field.data() + field.size()) {
    throw ParseError(std::string("invalid number in field ") + name, line);
  }
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline long parse_iso_date(std::string_view s, std::size_t line) {
  int y = 0, m = 0, d = 0;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw ParseError("DATE must be YYYY-MM-DD", line);
  auto num = [&](std::size_t off, std::size_t len, int& out) {
    auto [p, ec] = std::from_chars(s.data() + off, s.data() + off + len, out);
    if (ec != std::errc() || p != s.data() + off + len) throw ParseError("DATE must be YYYY-MM-DD", line);
  };
  num(0, 4, y);
  num(5, 2, m);
  num(8, 2, d);
  if (m < 1 || m > 12 || d < 1 || d > 31) throw ParseError("DATE out of calendar range", line);
  return civil_day(Epoch::from_calendar(y, m, d));
}

}  // namespace detail

inline IndexSeries parse_indices(std::istream& in) {
  static constexpr const char* kNames[] = {"DATE", "AP1", "AP2", "AP3", "AP4",   "AP5",
                                           "AP6",  "AP7", "AP8", "AP_AVG", "F107_OBS"};
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("index CSV: missing header", 1);
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kIndexCsvHeader) throw ParseError("index CSV: unexpected header", lineno);
  std::vector<IndexRecord> records;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != 11) throw ParseError("index CSV: expected 11 fields", lineno);
    IndexRecord r;
    r.day = detail::parse_iso_date(fields[0], lineno);
    for (int k = 0; k < 8; ++k) {
      r.ap[k] = detail::parse_number(fields[1 + k], kNames[1 + k], lineno);
      if (!(r.ap[k] >= 0.0)) throw RangeError(std::string("index CSV: ") + kNames[1 + k] + " must be >= 0 (line " + std::to_string(lineno) + ")");
    }
    r.ap_avg = detail::parse_number(fields[9], "AP_AVG", lineno);
    if (!(r.ap_avg >= 0.0)) throw RangeError("index CSV: AP_AVG must be >= 0 (line " + std::to_string(lineno) + ")");
    r.f107 = detail::parse_number(fields[10], "F107_OBS", lineno);
    if (!(r.f107 > 0.0)) throw RangeError("index CSV: F107_OBS must be > 0 (line " + std::to_string(lineno) + ")");
    records.push_back(r);
  }
  return IndexSeries(std::move(records));
}

inline IndexSeries load_indices(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open index file: " + path);
  return parse_indices(in);
}

inline void write_indices(std::ostream& out, const IndexSeries& s) {
  out << kIndexCsvHeader << '\n';
  char buf[64];
  for (const auto& r : s.records()) {
    out << format_date(r.day);
    for (double a : r.ap) {
      std::snprintf(buf, sizeof buf, ",%.10g", a);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.10g,%.10g", r.ap_avg, r.f107);
    out << buf << '\n';
  }
}

/// Mean daily F10.7 over the 81 days centred on the day containing t.
inline double nominal_f107(const IndexSeries& s, const Epoch& t) {
  const long d = civil_day(t);
  double sum = 0.0;
  for (long k = d - 40; k <= d + 40; ++k) sum += s.day(k).f107;
  return sum / 81.0;
}

/// Slots averaged by nominal_ap: the slot containing t-36h and the seven before it.
inline std::array<long, 8> nominal_ap_slots(const Epoch& t) {
  const long last = ap_slot(t.plus_seconds(-36.0 * 3600.0));
  std::array<long, 8> out{};
  for (int k = 0; k < 8; ++k) out[k] = last - 7 + k;
  return out;
}

inline double ap_at_slot(const IndexSeries& s, long slot) {
  const long day = slot >= 0 ? slot / 8 : -((-slot + 7) / 8);
  const long idx = slot - 8 * day;
  return s.day(day).ap[static_cast<std::size_t>(idx)];
}

/// Mean of the eight 3-hourly Ap values between 57 h and 36 h before t.
inline double nominal_ap(const IndexSeries& s, const Epoch& t) {
  double sum = 0.0;
  for (long slot : nominal_ap_slots(t)) sum += ap_at_slot(s, slot);
  return sum / 8.0;
}

struct ObservedIndices {
  double f107 = 0.0;
  double ap = 0.0;
};

/// Daily F10.7 of t's day and the 3-hourly Ap slot containing t.
inline ObservedIndices observed(const IndexSeries& s, const Epoch& t) {
  const auto& rec = s.day(civil_day(t));
  const long slot = ap_slot(t) - 8 * rec.day;
  return {rec.f107, rec.ap[static_cast<std::size_t>(slot)]};
}

/// Synthetic index histories for offline runs.
struct SyntheticProfile {
  enum class Kind { Constant, Sinusoid, Storm };
  Kind kind = Kind::Constant;
  double f107_mean = 150.0;
  double f107_amplitude = 0.0;  // sinusoid amplitude [sfu]
  double f107_period_days = 27.0;
  double f107_phase = 0.0;      // rad
  double ap_base = 15.0;
  double storm_start_day = 0.0;  // days after series start
  double storm_length_days = 0.0;
  double storm_ap_peak = 0.0;    // added Ap at the storm peak
};

inline IndexSeries make_synthetic_series(const SyntheticProfile& p, long first_day, long n_days) {
  std::vector<IndexRecord> recs;
  recs.reserve(static_cast<std::size_t>(n_days));
  for (long k = 0; k < n_days; ++k) {
    IndexRecord r;
    r.day = first_day + k;
    r.f107 = p.f107_mean;
    if (p.kind != SyntheticProfile::Kind::Constant && p.f107_amplitude != 0.0) {
      r.f107 += p.f107_amplitude *
                std::sin(constants::kTwoPi * static_cast<double>(k) / p.f107_period_days + p.f107_phase);
    }
    r.f107 = std::max(r.f107, 1.0);
    double sum = 0.0;
    for (int j = 0; j < 8; ++j) {
      double ap = p.ap_base;
      if (p.kind == SyntheticProfile::Kind::Storm && p.storm_length_days > 0.0) {
        const double tday = static_cast<double>(k) + (j + 0.5) / 8.0;
        const double x = (tday - p.storm_start_day) / p.storm_length_days;
        if (x >= 0.0 && x <= 1.0) ap += p.storm_ap_peak * std::sin(constants::kPi * x);
      }
      r.ap[j] = std::max(ap, 0.0);
      sum += r.ap[j];
    }
    r.ap_avg = sum / 8.0;
    recs.push_back(r);
  }
  return IndexSeries(std::move(recs));
}

}  // namespace dragdeorbit
