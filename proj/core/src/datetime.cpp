#include "dewp/datetime.hpp"

#include <cctype>
#include <cstdio>

#include "dewp/errors.hpp"

namespace dewp {

// Howard Hinnant's civil-date algorithms.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);             // [0, 399]
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;  // [0, 365]
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;            // [0, 146096]
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& year, int& month, int& day) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  month = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  year = static_cast<int>(y + (month <= 2));
}

std::int64_t minutes_since_epoch(const DateTime& dt) {
  return days_from_civil(dt.year, dt.month, dt.day) * 1440 + dt.hour * 60 + dt.minute;
}

std::int64_t hours_since_epoch(const DateTime& dt) {
  return days_from_civil(dt.year, dt.month, dt.day) * 24 + dt.hour;
}

DateTime datetime_from_minutes(std::int64_t minutes) {
  std::int64_t days = minutes / 1440;
  std::int64_t rem = minutes % 1440;
  if (rem < 0) {
    days -= 1;
    rem += 1440;
  }
  DateTime dt;
  civil_from_days(days, dt.year, dt.month, dt.day);
  dt.hour = static_cast<int>(rem / 60);
  dt.minute = static_cast<int>(rem % 60);
  return dt;
}

DateTime datetime_from_hours(std::int64_t hours) {
  return datetime_from_minutes(hours * 60);
}

int weekday_index(const DateTime& dt) {
  // 1970-01-01 was a Thursday (index 3 with Monday = 0).
  std::int64_t days = days_from_civil(dt.year, dt.month, dt.day);
  std::int64_t w = (days + 3) % 7;
  if (w < 0) w += 7;
  return static_cast<int>(w);
}

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static const int table[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return table[m - 1];
}

}  // namespace

DateTime parse_datetime(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  int consumed = 0;
  int n = std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &consumed);
  if (n != 6 || (sep != ' ' && sep != 'T')) {
    throw DataError("unparseable timestamp: '" + text + "' (expected YYYY-MM-DD[ T]HH:MM[:SS])");
  }
  std::string rest = text.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty()) {
    if (std::sscanf(rest.c_str(), ":%2d", &s) != 1 || s < 0 || s > 59 || rest.size() != 3) {
      throw DataError("unparseable timestamp suffix: '" + text + "'");
    }
  }
  if (mo < 1 || mo > 12 || d < 1 || d > days_in_month(y, mo) || h < 0 || h > 23 || mi < 0 || mi > 59) {
    throw DataError("timestamp out of range: '" + text + "'");
  }
  return DateTime{y, mo, d, h, mi};
}

std::string format_datetime(const DateTime& dt) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d", dt.year, dt.month, dt.day, dt.hour,
                dt.minute);
  return buf;
}

std::string format_hour(std::int64_t hours) { return format_datetime(datetime_from_hours(hours)); }

TimeFeatures time_features_of(const DateTime& dt) {
  return TimeFeatures{dt.month - 1, weekday_index(dt), dt.hour};
}

TimeFeatures time_features_of_hour(std::int64_t hours) {
  return time_features_of(datetime_from_hours(hours));
}

}  // namespace dewp
