#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

#include "medsim/core/error.hpp"

namespace medsim {

using Milliseconds = std::chrono::milliseconds;
using TimePoint = std::chrono::sys_time<Milliseconds>;

// RFC-3339 UTC with millisecond precision, e.g. 2025-03-01T09:30:00.000Z
inline std::string format_rfc3339(TimePoint tp) {
  using namespace std::chrono;
  auto day = floor<days>(tp);
  year_month_day ymd{day};
  hh_mm_ss hms{tp - day};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<int>(hms.hours().count()),
                static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()),
                static_cast<int>(hms.subseconds().count()));
  return buf;
}

// Accepts YYYY-MM-DDTHH:MM:SS[.fff](Z|+00:00); other offsets are applied.
inline TimePoint parse_rfc3339(std::string_view s) {
  using namespace std::chrono;
  int y, mo, d, h, mi, sec;
  int consumed = 0;
  std::string buf(s);
  if (std::sscanf(buf.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &sec,
                  &consumed) != 6)
    throw Error("invalid_timestamp", "not an RFC-3339 timestamp: " + buf);
  std::string_view rest = std::string_view(buf).substr(static_cast<std::size_t>(consumed));
  int millis = 0;
  if (!rest.empty() && rest.front() == '.') {
    rest.remove_prefix(1);
    int digits = 0;
    while (!rest.empty() && rest.front() >= '0' && rest.front() <= '9') {
      if (digits < 3) millis = millis * 10 + (rest.front() - '0');
      ++digits;
      rest.remove_prefix(1);
    }
    for (; digits < 3; ++digits) millis *= 10;
  }
  int offset_minutes = 0;
  if (rest == "Z" || rest == "z") {
  } else if (rest.size() == 6 && (rest[0] == '+' || rest[0] == '-') && rest[3] == ':') {
    int oh = (rest[1] - '0') * 10 + (rest[2] - '0');
    int om = (rest[4] - '0') * 10 + (rest[5] - '0');
    offset_minutes = (rest[0] == '-' ? -1 : 1) * (oh * 60 + om);
  } else {
    throw Error("invalid_timestamp", "missing or malformed UTC offset: " + buf);
  }
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw Error("invalid_timestamp", "invalid calendar date: " + buf);
  auto tp = sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} + milliseconds{millis} -
            minutes{offset_minutes};
  return time_point_cast<Milliseconds>(tp);
}

inline double minutes_between(TimePoint a, TimePoint b) {
  return std::chrono::duration<double, std::ratio<60>>(b - a).count();
}

}  // namespace medsim
