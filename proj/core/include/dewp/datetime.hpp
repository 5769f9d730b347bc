#pragma once

#include <cstdint>
#include <string>

namespace dewp {

/// Naive calendar datetime with minute resolution. No timezone handling:
/// SCADA timestamps are treated as a plain local clock.
struct DateTime {
  int year = 1970;
  int month = 1;  // 1-12
  int day = 1;    // 1-31
  int hour = 0;   // 0-23
  int minute = 0; // 0-59

  bool operator==(const DateTime&) const = default;
};

/// Days since 1970-01-01 for a civil date (negative before the epoch).
std::int64_t days_from_civil(int year, int month, int day);

/// Inverse of days_from_civil.
void civil_from_days(std::int64_t days, int& year, int& month, int& day);

std::int64_t minutes_since_epoch(const DateTime& dt);
std::int64_t hours_since_epoch(const DateTime& dt);
DateTime datetime_from_hours(std::int64_t hours);
DateTime datetime_from_minutes(std::int64_t minutes);

/// Monday = 0 ... Sunday = 6.
int weekday_index(const DateTime& dt);

/// Parses "YYYY-MM-DD HH:MM[:SS]" or "YYYY-MM-DDTHH:MM[:SS]".
/// Seconds, when present, must be zero-padded and are discarded.
/// Throws DataError on malformed input.
DateTime parse_datetime(const std::string& text);

/// "YYYY-MM-DDTHH:MM"
std::string format_datetime(const DateTime& dt);
std::string format_hour(std::int64_t hours);

/// Calendar features extracted from a timestamp: month, weekday, hour-of-day.
struct TimeFeatures {
  int month_index = 0;    // 0-11
  int weekday_index = 0;  // 0-6, Monday = 0
  int hour_index = 0;     // 0-23

  bool operator==(const TimeFeatures&) const = default;
};

TimeFeatures time_features_of(const DateTime& dt);
TimeFeatures time_features_of_hour(std::int64_t hours);

}  // namespace dewp
